"""Volumetric image I/O and preprocessing.

Volumes are raw little-endian voxel arrays with x varying fastest,
described by a JSON sidecar (``<file>.json``) holding dims, dtype and
optional spacing. In memory they are C-contiguous numpy arrays indexed
``[z, y, x]``; the ``dims`` metadata stays in ``(nx, ny, nz)`` order.
Intensities are normalized to [0, 1] on load and every downstream module
assumes that range.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ArgumentError, DataError, FormatError, IoError

# on-disk element types (little-endian); u32 is only used for debug
# supervoxel-id exports, never for intensity volumes
_DTYPES = {
    "u8": np.dtype("<u1"),
    "u16": np.dtype("<u2"),
    "f32": np.dtype("<f4"),
    "u32": np.dtype("<u4"),
}
_VOLUME_DTYPES = ("u8", "u16", "f32")


def _sidecar_path(path) -> Path:
    return Path(str(path) + ".json")


@dataclass(frozen=True)
class Volume:
    """3D scalar intensity field with values in [0, 1].

    ``voxels`` has shape ``(nz, ny, nx)`` so that the fastest-varying
    memory axis is x, matching the raw file layout.
    """

    voxels: np.ndarray
    spacing: tuple[float, float, float] | None = None

    def __post_init__(self):
        v = np.ascontiguousarray(self.voxels, dtype=np.float64)
        if v.ndim != 3 or min(v.shape) < 1:
            raise ArgumentError(f"volume must be 3D with positive dims, got shape {v.shape}")
        if not np.isfinite(v).all():
            raise DataError("volume contains non-finite voxels")
        if v.min() < 0.0 or v.max() > 1.0:
            raise DataError("volume intensities must lie in [0, 1]")
        object.__setattr__(self, "voxels", v)

    @property
    def dims(self) -> tuple[int, int, int]:
        """(nx, ny, nz)."""
        nz, ny, nx = self.voxels.shape
        return (nx, ny, nz)

    @property
    def voxel_count(self) -> int:
        return self.voxels.size


@dataclass(frozen=True)
class LabelVolume:
    """Per-voxel small-integer phase labels plus a code -> phase-name map."""

    labels: np.ndarray
    codebook: dict[int, str] = field(default_factory=dict)

    def __post_init__(self):
        lab = np.ascontiguousarray(self.labels)
        if lab.ndim != 3 or min(lab.shape) < 1:
            raise ArgumentError(f"label volume must be 3D, got shape {lab.shape}")
        if not np.issubdtype(lab.dtype, np.integer):
            raise ArgumentError("labels must be integers")
        if lab.min() < 0:
            raise DataError("labels must be non-negative")
        known = set(int(k) for k in self.codebook)
        present = set(int(c) for c in np.unique(lab))
        if not present <= known:
            raise DataError(f"labels {sorted(present - known)} missing from codebook")
        object.__setattr__(self, "labels", lab)
        object.__setattr__(self, "codebook", {int(k): str(v) for k, v in self.codebook.items()})

    @property
    def dims(self) -> tuple[int, int, int]:
        nz, ny, nx = self.labels.shape
        return (nx, ny, nz)


@dataclass(frozen=True)
class SegmentationMask:
    """Binary per-voxel labels: True/1 = solid, False/0 = pore."""

    solid: np.ndarray

    def __post_init__(self):
        m = np.ascontiguousarray(self.solid)
        if m.ndim != 3 or min(m.shape) < 1:
            raise ArgumentError(f"mask must be 3D, got shape {m.shape}")
        object.__setattr__(self, "solid", m.astype(bool))

    @property
    def dims(self) -> tuple[int, int, int]:
        nz, ny, nx = self.solid.shape
        return (nx, ny, nz)

    @property
    def solid_fraction(self) -> float:
        return float(self.solid.mean())


def _read_meta(path, meta):
    """Resolve the sidecar descriptor: dict, explicit path, or `<path>.json`."""
    if isinstance(meta, dict):
        return dict(meta)
    sidecar = Path(meta) if meta is not None else _sidecar_path(path)
    if not sidecar.exists():
        raise FormatError(f"missing sidecar {sidecar}")
    try:
        with open(sidecar) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"unreadable sidecar {sidecar}: {exc}") from exc


def _parse_meta(meta):
    try:
        dims = tuple(int(d) for d in meta["dims"])
        dtype = str(meta["dtype"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"sidecar missing/invalid dims or dtype: {exc}") from exc
    if len(dims) != 3 or any(d < 1 for d in dims):
        raise FormatError(f"sidecar dims must be 3 positive integers, got {dims}")
    if meta.get("order", "xyz") != "xyz":
        raise FormatError(f"unsupported axis order {meta.get('order')!r}")
    spacing = meta.get("spacing")
    if spacing is not None:
        spacing = tuple(float(s) for s in spacing)
    return dims, dtype, spacing


def _read_raw(path, dims, dtype_code):
    if dtype_code not in _DTYPES:
        raise FormatError(f"unsupported element type {dtype_code!r}")
    dt = _DTYPES[dtype_code]
    nx, ny, nz = dims
    expected = nx * ny * nz * dt.itemsize
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if len(raw) != expected:
        raise FormatError(
            f"{path}: file size {len(raw)} does not match dims {dims} x {dt.itemsize} bytes"
        )
    # x varies fastest on disk -> C-order (nz, ny, nx)
    return np.frombuffer(raw, dtype=dt).reshape((nz, ny, nx)).copy()


def load_volume(path, meta=None) -> Volume:
    """Load a raw volume, normalizing intensities to [0, 1].

    Integer types are divided by their type maximum; f32 files must
    already be in [0, 1].
    """
    m = _read_meta(path, meta)
    dims, dtype_code, spacing = _parse_meta(m)
    if dtype_code not in _VOLUME_DTYPES:
        raise FormatError(f"unsupported volume element type {dtype_code!r}")
    arr = _read_raw(path, dims, dtype_code)
    if dtype_code == "f32":
        arr = arr.astype(np.float64)
        if not np.isfinite(arr).all():
            raise DataError(f"{path}: non-finite voxel values")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise DataError(f"{path}: f32 volumes must already lie in [0, 1]")
    else:
        arr = arr.astype(np.float64) / float(np.iinfo(_DTYPES[dtype_code]).max)
    return Volume(arr, spacing=spacing)


def save_volume(v: Volume, path, dtype: str = "f32") -> None:
    """Write a volume as raw + sidecar, quantizing to the requested type."""
    if dtype not in _VOLUME_DTYPES:
        raise ArgumentError(f"unsupported volume element type {dtype!r}")
    if dtype == "f32":
        out = v.voxels.astype("<f4")
    else:
        mx = float(np.iinfo(_DTYPES[dtype]).max)
        out = np.rint(v.voxels * mx).astype(_DTYPES[dtype])
    _write_raw(out, path, dtype, kind="volume", spacing=v.spacing)


def load_mask(path, meta=None) -> SegmentationMask:
    m = _read_meta(path, meta)
    dims, dtype_code, _ = _parse_meta(m)
    if dtype_code != "u8":
        raise FormatError(f"masks must be u8, got {dtype_code!r}")
    arr = _read_raw(path, dims, "u8")
    if arr.max(initial=0) > 1:
        raise FormatError(f"{path}: mask bytes must be 0 or 1")
    return SegmentationMask(arr.astype(bool))


def save_mask(m: SegmentationMask, path) -> None:
    """Write a mask as u8 raw (0 = pore, 1 = solid) + sidecar."""
    _write_raw(m.solid.astype("<u1"), path, "u8", kind="mask")


def load_labels(path, meta=None) -> LabelVolume:
    m = _read_meta(path, meta)
    dims, dtype_code, _ = _parse_meta(m)
    if dtype_code != "u8":
        raise FormatError(f"label volumes must be u8, got {dtype_code!r}")
    arr = _read_raw(path, dims, "u8")
    codebook = m.get("codebook")
    if not codebook:
        raise FormatError(f"{path}: label sidecar missing codebook")
    return LabelVolume(arr.astype(np.int32), {int(k): v for k, v in codebook.items()})


def save_labels(lv: LabelVolume, path) -> None:
    if max(lv.codebook) > 255:
        raise ArgumentError("label codes above 255 cannot be stored as u8")
    _write_raw(lv.labels.astype("<u1"), path, "u8", kind="labels",
               codebook={str(k): v for k, v in lv.codebook.items()})


def save_field(values: np.ndarray, path) -> None:
    """Write a per-voxel real field (e.g. saliency) as f32 raw + sidecar."""
    _write_raw(np.ascontiguousarray(values, dtype="<f4"), path, "f32", kind="field")


def load_field(path, meta=None) -> np.ndarray:
    m = _read_meta(path, meta)
    dims, dtype_code, _ = _parse_meta(m)
    if dtype_code != "f32":
        raise FormatError(f"fields must be f32, got {dtype_code!r}")
    return _read_raw(path, dims, "f32").astype(np.float64)


def _write_raw(arr: np.ndarray, path, dtype_code, kind, spacing=None, **extra) -> None:
    nz, ny, nx = arr.shape
    meta = {"dims": [nx, ny, nz], "dtype": dtype_code, "kind": kind,
            "spacing": list(spacing) if spacing is not None else None}
    meta.update(extra)
    try:
        Path(path).write_bytes(np.ascontiguousarray(arr).tobytes())
        with open(_sidecar_path(path), "w") as fh:
            json.dump(meta, fh, indent=1)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def contrast_adjust(v: Volume, p_low: float = 0.5, p_high: float = 99.5) -> Volume:
    """Percentile linear stretch: values at/below the p_low percentile map
    to 0, at/above p_high to 1, linear in between.

    The mapping is monotone non-decreasing. A volume whose two percentiles
    coincide (e.g. constant input) is returned unchanged with a warning.
    """
    if not (0.0 <= p_low < p_high <= 100.0):
        raise ArgumentError(f"need 0 <= p_low < p_high <= 100, got ({p_low}, {p_high})")
    lo, hi = np.percentile(v.voxels, [p_low, p_high])
    if hi <= lo:
        warnings.warn("contrast_adjust: degenerate intensity range, volume left unchanged")
        return v
    stretched = np.clip((v.voxels - lo) / (hi - lo), 0.0, 1.0)
    return Volume(stretched, spacing=v.spacing)


def binarize_ground_truth(gt: LabelVolume, solid_code: int) -> SegmentationMask:
    """Mark voxels labelled ``solid_code`` as solid; every other phase
    (water, oil, gas, ...) counts as pore."""
    if int(solid_code) not in gt.codebook:
        raise ArgumentError(f"code {solid_code} not in codebook {gt.codebook}")
    return SegmentationMask(gt.labels == int(solid_code))
