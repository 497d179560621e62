"""Per-class morphological hole filling over classified maps, plus PGM/PPM
rendering of class maps.

A hole is a 4-connected background component with no pixel on the image
border. Cleaning a map fills each class's holes independently (masks taken
from the input map) and applies the fills in ascending class order, later
classes overwriting earlier ones; the pass runs once, with no iteration to
a fixpoint.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import DimensionMismatch, MissingFile, ShapeMismatch

_CROSS = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)

# class id -> RGB; entry 0 (background) is black, classes cycle if > 32
PALETTE = np.array([
    (0, 0, 0),
    (230, 25, 75), (60, 180, 75), (255, 225, 25), (0, 130, 200),
    (245, 130, 48), (145, 30, 180), (70, 240, 240), (240, 50, 230),
    (210, 245, 60), (250, 190, 190), (0, 128, 128), (230, 190, 255),
    (170, 110, 40), (255, 250, 200), (128, 0, 0), (170, 255, 195),
    (128, 128, 0), (255, 215, 180), (0, 0, 128), (128, 128, 128),
    (255, 255, 255), (155, 89, 182), (26, 188, 156), (241, 196, 15),
    (52, 73, 94), (22, 160, 133), (192, 57, 43), (127, 140, 141),
    (44, 62, 80), (211, 84, 0), (39, 174, 96), (142, 68, 173),
], dtype=np.uint8)


@dataclass
class ClassMap:
    """Fully classified map: every pixel carries a class id in 1..n_classes."""

    rows: int
    cols: int
    labels: np.ndarray
    n_classes: int

    def __post_init__(self):
        self.labels = np.ascontiguousarray(self.labels)
        if self.labels.shape != (self.rows, self.cols):
            raise DimensionMismatch(
                f"class map shape {self.labels.shape} != ({self.rows}, {self.cols})"
            )
        if self.labels.size and (
            self.labels.min() < 1 or self.labels.max() > self.n_classes
        ):
            raise DimensionMismatch(
                f"class map entries must lie in 1..{self.n_classes}"
            )

    @property
    def flat(self):
        return self.labels.reshape(-1)


def fill_holes(mask):
    """Fill 4-connected background components that never touch the border.

    Foreground is never cleared, so the output is a superset of the input;
    the operation is idempotent.
    """
    mask = np.asarray(mask).astype(bool)
    if mask.ndim != 2:
        raise ShapeMismatch(f"mask must be 2-D, got ndim={mask.ndim}")
    background, n_comp = ndimage.label(~mask, structure=_CROSS)
    if n_comp == 0:
        return mask.copy()
    on_border = np.unique(np.concatenate([
        background[0, :], background[-1, :],
        background[:, 0], background[:, -1],
    ]))
    keep = np.zeros(n_comp + 1, dtype=bool)
    keep[on_border] = True
    keep[0] = True          # foreground stays foreground
    return mask | ~keep[background]


def clean_map(cmap):
    """Fill every class's holes; returns (cleaned map, per-class fill counts).

    Hole masks are computed from the input map for each class independently,
    then applied in ascending class order so later classes overwrite earlier
    fills. counts[c] is the number of pixels class c's fill step wrote.
    """
    out = cmap.labels.copy()
    counts = {}
    for c in range(1, cmap.n_classes + 1):
        mask = cmap.labels == c
        filled = fill_holes(mask) & ~mask
        counts[c] = int(filled.sum())
        out[filled] = c
    cleaned = ClassMap(cmap.rows, cmap.cols, out, cmap.n_classes)
    return cleaned, counts


# -- map rendering ------------------------------------------------------------

def write_pgm(path, labels):
    """Binary PGM whose gray value is the class id (requires ids <= 255)."""
    arr = np.asarray(labels)
    if arr.ndim != 2:
        raise ShapeMismatch("PGM output needs a 2-D label array")
    if arr.max(initial=0) > 255:
        raise DimensionMismatch("PGM rendering supports at most 255 classes")
    rows, cols = arr.shape
    header = f"P5\n{cols} {rows}\n255\n".encode("ascii")
    Path(path).write_bytes(header + arr.astype(np.uint8).tobytes())


def read_pgm(path):
    """Read a binary (P5) PGM written by write_pgm back into a label array."""
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"map file not found: {path}")
    raw = path.read_bytes()
    if not raw.startswith(b"P5"):
        raise ShapeMismatch(f"{path} is not a binary PGM")
    fields, pos = [], 2
    while len(fields) < 3:
        while pos < len(raw) and raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":            # comment line
            pos = raw.index(b"\n", pos) + 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos:pos + 1].isspace():
            pos += 1
        fields.append(int(raw[start:pos]))
    pos += 1                                    # single whitespace after maxval
    cols, rows, maxval = fields
    if maxval > 255:
        raise ShapeMismatch("16-bit PGM is not supported")
    data = np.frombuffer(raw[pos:pos + rows * cols], dtype=np.uint8)
    if data.size != rows * cols:
        raise DimensionMismatch(
            f"PGM payload holds {data.size} pixels, expected {rows * cols}"
        )
    return data.reshape(rows, cols).copy()


def write_ppm(path, labels, palette=PALETTE):
    """Binary PPM render using the fixed palette (class c -> palette[c],
    cycling past its length)."""
    arr = np.asarray(labels)
    if arr.ndim != 2:
        raise ShapeMismatch("PPM output needs a 2-D label array")
    rows, cols = arr.shape
    rgb = palette[np.where(arr == 0, 0, (arr - 1) % (len(palette) - 1) + 1)]
    header = f"P6\n{cols} {rows}\n255\n".encode("ascii")
    Path(path).write_bytes(header + rgb.astype(np.uint8).tobytes())
