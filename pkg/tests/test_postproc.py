from collections import deque

import numpy as np
import pytest

from hsimdae.errors import DimensionMismatch, ShapeMismatch
from hsimdae.postproc import (
    ClassMap,
    clean_map,
    fill_holes,
    read_pgm,
    write_pgm,
    write_ppm,
)


def bfs_fill_holes(mask):
    """Independent oracle: flood-fill background from the border with a
    4-neighborhood queue; anything background left unreached is a hole."""
    mask = np.asarray(mask, dtype=bool)
    rows, cols = mask.shape
    reached = np.zeros_like(mask)
    queue = deque()
    for r in range(rows):
        for c in (0, cols - 1):
            if not mask[r, c] and not reached[r, c]:
                reached[r, c] = True
                queue.append((r, c))
    for c in range(cols):
        for r in (0, rows - 1):
            if not mask[r, c] and not reached[r, c]:
                reached[r, c] = True
                queue.append((r, c))
    while queue:
        r, c = queue.popleft()
        for dr, dc in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            nr, nc = r + dr, c + dc
            if 0 <= nr < rows and 0 <= nc < cols:
                if not mask[nr, nc] and not reached[nr, nc]:
                    reached[nr, nc] = True
                    queue.append((nr, nc))
    return mask | ~(mask | reached)


class TestFillHoles:
    def test_canonical_ring(self):
        mask = np.ones((3, 3), dtype=bool)
        mask[1, 1] = False
        out = fill_holes(mask)
        assert out.all()

    def test_border_connected_background_is_untouched(self):
        mask = np.zeros((4, 5), dtype=bool)
        mask[1:3, 1:3] = True
        assert np.array_equal(fill_holes(mask), mask)

    def test_matches_bfs_oracle_on_random_masks(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            mask = rng.random((32, 32)) < rng.uniform(0.3, 0.7)
            assert np.array_equal(fill_holes(mask), bfs_fill_holes(mask))

    def test_idempotent_and_monotone(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            mask = rng.random((20, 20)) < 0.5
            once = fill_holes(mask)
            assert np.array_equal(fill_holes(once), once)   # idempotent
            assert np.all(once >= mask)                     # monotone

    def test_diagonal_gap_is_not_an_escape_route(self):
        # only-diagonal background connectivity does not leak out of a hole
        mask = np.array([
            [1, 1, 1, 0],
            [1, 0, 1, 1],
            [1, 1, 1, 1],
        ], dtype=bool)
        out = fill_holes(mask)
        assert out[1, 1]

    def test_non_2d_rejected(self):
        with pytest.raises(ShapeMismatch):
            fill_holes(np.zeros(4, dtype=bool))


class TestCleanMap:
    def _map(self, arr, n_classes):
        arr = np.asarray(arr)
        return ClassMap(arr.shape[0], arr.shape[1], arr, n_classes)

    def test_map_without_enclosures_is_unchanged(self):
        arr = np.repeat(np.array([[1, 1, 2, 2, 3, 3]]), 5, axis=0)
        cleaned, counts = clean_map(self._map(arr, 3))
        assert np.array_equal(cleaned.labels, arr)
        assert all(v == 0 for v in counts.values())

    def test_single_enclosed_pixel_is_reassigned(self):
        arr = np.full((5, 5), 2)
        arr[2, 2] = 5
        cleaned, counts = clean_map(self._map(arr, 5))
        assert cleaned.labels[2, 2] == 2
        assert counts[2] == 1
        assert np.all(cleaned.labels == 2)

    def test_later_classes_overwrite_earlier_fills(self):
        # concentric rings: the center is inside a hole of classes 1, 2 and 3
        # (masks come from the input map); ascending order means 3 wins it
        arr = np.full((7, 7), 1)
        arr[1:6, 1:6] = 2
        arr[2:5, 2:5] = 3
        arr[3, 3] = 4
        cleaned, counts = clean_map(self._map(arr, 4))
        assert counts == {1: 25, 2: 9, 3: 1, 4: 0}
        assert cleaned.labels[3, 3] == 3       # claimed by 1, 2 and 3
        assert cleaned.labels[2, 2] == 2       # claimed by 1 and 2
        assert cleaned.labels[1, 1] == 1       # claimed by 1 only
        assert cleaned.labels[0, 0] == 1       # frame untouched

    def test_counts_report_per_class_fills(self):
        # two one-pixel specks sit inside islands that are themselves holes
        # of the surrounding class, which therefore swallows everything
        arr = np.full((6, 9), 3)
        arr[1:4, 1:4] = 1
        arr[2, 2] = 9           # hole of class 1
        arr[1:4, 5:8] = 2
        arr[2, 6] = 9           # hole of class 2
        cleaned, counts = clean_map(self._map(arr, 9))
        expected = dict.fromkeys(range(1, 10), 0)
        expected.update({1: 1, 2: 1, 3: 18})
        assert counts == expected
        assert np.all(cleaned.labels == 3)

    def test_only_hole_pixels_ever_change(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            arr = rng.integers(1, 5, (16, 16))
            cmap = self._map(arr, 4)
            holes = np.zeros_like(arr, dtype=bool)
            for c in range(1, 5):
                holes |= fill_holes(arr == c) & (arr != c)
            cleaned, _ = clean_map(cmap)
            changed = cleaned.labels != arr
            assert np.all(holes | ~changed)

    def test_simply_connected_frame_touching_regions_are_identity(self):
        rng = np.random.default_rng(2)
        edges = np.sort(rng.choice(np.arange(2, 18), size=3, replace=False))
        arr = np.zeros((12, 20), dtype=int)
        bounds = [0, *edges.tolist(), 20]
        for c in range(4):
            arr[:, bounds[c]:bounds[c + 1]] = c + 1
        cleaned, _ = clean_map(self._map(arr, 4))
        assert np.array_equal(cleaned.labels, arr)


class TestRendering:
    def test_pgm_round_trip(self, tmp_path):
        rng = np.random.default_rng(3)
        labels = rng.integers(1, 17, (9, 13))
        path = tmp_path / "map.pgm"
        write_pgm(path, labels)
        back = read_pgm(path)
        assert np.array_equal(back, labels)

    def test_pgm_rejects_wide_class_ids(self, tmp_path):
        with pytest.raises(DimensionMismatch):
            write_pgm(tmp_path / "x.pgm", np.full((2, 2), 300))

    def test_ppm_header_and_size(self, tmp_path):
        labels = np.array([[1, 2], [3, 4]])
        path = tmp_path / "map.ppm"
        write_ppm(path, labels)
        raw = path.read_bytes()
        assert raw.startswith(b"P6\n2 2\n255\n")
        assert len(raw) == len(b"P6\n2 2\n255\n") + 12

    def test_read_pgm_rejects_other_formats(self, tmp_path):
        path = tmp_path / "x.pgm"
        path.write_bytes(b"P2\n1 1\n255\n0\n")
        with pytest.raises(ShapeMismatch):
            read_pgm(path)
