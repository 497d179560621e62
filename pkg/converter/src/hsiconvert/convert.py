"""MAT-file to portable-dataset conversion.

Reads a hyperspectral cube and its ground truth from MATLAB files (classic
format via scipy, v7.3/HDF5 via h5py) and writes the portable directory
consumed by the classification pipeline:

* ``meta.json``   -- rows, cols, bands, n_classes, optional class names.
* ``cube.bin``    -- float32 little-endian, band-sequential.
* ``labels.bin``  -- uint16 little-endian, row-major.
* ``manifest.json`` -- SHA-256 checksums of the three files above.

Data is stored unnormalized; scaling belongs to the training pipeline.
Water-absorption bands (for raw 224-band AVIRIS cubes the documented list is
108-112, 154-167 and 224, one-based) can be dropped here so the pipeline
never needs band-selection logic.
"""

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

# 20 water-absorption bands of the raw 224-band AVIRIS Salinas cube (1-based);
# distributed "corrected" cubes already have them removed
SALINAS_WATER_BANDS = tuple(
    list(range(108, 113)) + list(range(154, 168)) + [224]
)


class UnreadableInput(Exception):
    pass


class ShapeMismatch(Exception):
    pass


@dataclass
class ConversionSpec:
    cube_path: Path
    gt_path: Path
    out_dir: Path
    drop_bands: tuple | None = None
    class_names: list | None = None

    def __post_init__(self):
        self.cube_path = Path(self.cube_path)
        self.gt_path = Path(self.gt_path)
        self.out_dir = Path(self.out_dir)
        if self.drop_bands is not None:
            bands = tuple(int(b) for b in self.drop_bands)
            if not bands:
                self.drop_bands = None
                return
            if any(b2 <= b1 for b1, b2 in zip(bands, bands[1:])):
                raise ShapeMismatch(
                    f"drop_bands must be strictly increasing, got {bands}"
                )
            if bands[0] < 1:
                raise ShapeMismatch("drop_bands indices are 1-based")
            self.drop_bands = bands


def _load_mat_arrays(path):
    """All named numeric arrays from a MAT file, classic or v7.3 layout.

    v7.3 files are HDF5 and store arrays with MATLAB's column-major axis
    order, so those are transposed back.
    """
    path = Path(path)
    if not path.is_file():
        raise UnreadableInput(f"input file not found: {path}")
    try:
        from scipy.io import loadmat

        mat = loadmat(path)
        return {
            k: np.asarray(v) for k, v in mat.items()
            if not k.startswith("__") and isinstance(v, np.ndarray)
            and v.dtype.kind in "fiub"
        }
    except Exception as scipy_error:   # v7.3 files land here; try HDF5 next
        try:
            import h5py

            out = {}
            with h5py.File(path, "r") as f:
                def visit(name, obj):
                    if isinstance(obj, h5py.Dataset) and obj.dtype.kind in "fiub":
                        out[name] = np.asarray(obj[...]).T
                f.visititems(visit)
            return out
        except Exception:
            raise UnreadableInput(
                f"cannot parse {path} as a MAT file "
                f"(classic reader: {scipy_error})"
            ) from scipy_error


def _pick_array(arrays, ndim, path):
    matches = {k: v for k, v in arrays.items() if v.ndim == ndim}
    if not matches:
        raise UnreadableInput(f"{path} holds no {ndim}-D numeric array")
    if len(matches) > 1:
        raise UnreadableInput(
            f"{path} holds several {ndim}-D arrays ({sorted(matches)}); "
            "cannot choose"
        )
    return next(iter(matches.values()))


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def convert(spec):
    """Run one conversion; returns the parsed metadata dict."""
    cube = _pick_array(_load_mat_arrays(spec.cube_path), 3, spec.cube_path)
    gt = _pick_array(_load_mat_arrays(spec.gt_path), 2, spec.gt_path)

    rows, cols, bands = cube.shape
    if gt.shape != (rows, cols):
        raise ShapeMismatch(
            f"ground truth {gt.shape} does not match cube spatial "
            f"dimensions ({rows}, {cols})"
        )

    if spec.drop_bands:
        if spec.drop_bands[-1] > bands:
            raise ShapeMismatch(
                f"drop_bands go up to {spec.drop_bands[-1]} but the cube has "
                f"{bands} bands"
            )
        keep = np.setdiff1d(np.arange(bands), np.asarray(spec.drop_bands) - 1)
        cube = cube[:, :, keep]
        bands = cube.shape[2]

    gt = np.asarray(gt)
    if gt.min() < 0 or gt.max() > np.iinfo(np.uint16).max:
        raise ShapeMismatch(f"labels outside uint16 range: {gt.min()}..{gt.max()}")
    labels = gt.astype(np.uint16)
    if not np.array_equal(labels.astype(gt.dtype), gt):
        raise ShapeMismatch("ground truth holds non-integer labels")
    n_classes = int(labels.max())
    if n_classes < 1:
        raise ShapeMismatch("ground truth has no labeled pixels")

    meta = {
        "rows": int(rows),
        "cols": int(cols),
        "bands": int(bands),
        "n_classes": n_classes,
    }
    if spec.class_names is not None:
        if len(spec.class_names) != n_classes:
            raise ShapeMismatch(
                f"{len(spec.class_names)} class names for {n_classes} classes"
            )
        meta["class_names"] = list(spec.class_names)

    out = spec.out_dir
    out.mkdir(parents=True, exist_ok=True)
    (out / "meta.json").write_text(json.dumps(meta, indent=2), encoding="utf-8")
    # band-sequential: all of band 0 row-major, then band 1, ...
    bsq = np.ascontiguousarray(np.moveaxis(cube, 2, 0), dtype="<f4")
    (out / "cube.bin").write_bytes(bsq.tobytes())
    (out / "labels.bin").write_bytes(
        np.ascontiguousarray(labels, dtype="<u2").tobytes()
    )
    manifest = {
        "files": {
            name: _sha256(out / name)
            for name in ("meta.json", "cube.bin", "labels.bin")
        }
    }
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8"
    )
    return meta
