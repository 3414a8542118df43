"""Per-scale binarization and multi-scale fusion of the segmentation pipeline.

One scale runs: contrast adjust -> supervoxels -> mean intensities ->
graph -> pore seeds -> potentials -> smallest eigenpair -> saliency ->
deterministic 2-means -> voxel mask. Scales are fused by voxel-wise
strict-majority vote (ties -> pore, the seeded prior class), and the
per-scale voxelized saliencies are averaged into a real-valued field used
as the ROC scoring surface.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, DegenerateInputError
from .graph import DEFAULT_PHI_MULTIPLIER, DEFAULT_SIGMA, build_graph, select_pore_seeds
from .qcuts import SaliencyVector, quantum_cut
from .supervoxel import SupervoxelMap, slic3d, supervoxel_means
from .volume import SegmentationMask, Volume, contrast_adjust

DEFAULT_SCALES = (2000, 4000, 6000, 8000)
DEFAULT_PERCENTILES = (0.5, 99.5)


@dataclass(frozen=True)
class SaliencyField:
    """Per-voxel solid-likelihood in [0, 1] (scale-averaged, pre-binarization)."""

    values: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.float64)
        if v.ndim != 3:
            raise ArgumentError("saliency field must be 3D")
        if v.min() < 0.0 or v.max() > 1.0:
            raise ArgumentError("saliency field values must lie in [0, 1]")
        object.__setattr__(self, "values", v)

    @property
    def dims(self) -> tuple[int, int, int]:
        nz, ny, nx = self.values.shape
        return (nx, ny, nz)


@dataclass(frozen=True)
class ScaleDiagnostics:
    target_k: int
    realized_k: int
    seed_count: int
    eigenvalue: float
    residual: float
    solid_fraction: float
    degenerate: bool = False


@dataclass(frozen=True)
class SegmentationResult:
    mask: SegmentationMask
    field: SaliencyField
    per_scale: tuple[ScaleDiagnostics, ...] = field(default_factory=tuple)


def kmeans2(values: np.ndarray):
    """Deterministic binary Lloyd clustering of a 1D value vector.

    Centers start at min(values) and max(values) and iterate to a fixed
    point; distance ties go to the lower-center cluster. Returns
    ``(labels, solid_cluster)`` where labels are 0/1 per entry and the
    solid cluster is the one with the higher mean value.
    """
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size < 2:
        raise ArgumentError(f"need at least 2 values, got {v.size}")
    if (v == v[0]).all():
        raise DegenerateInputError("all values identical; no 2-means split exists")
    c_low, c_high = float(v.min()), float(v.max())
    labels = None
    for _ in range(512):
        upper = np.abs(v - c_high) < np.abs(v - c_low)
        if labels is not None and bool((upper == labels).all()):
            break
        labels = upper
        c_low = float(v[~labels].mean())
        c_high = float(v[labels].mean())
    return labels.astype(np.uint8), 1


def voxelize(values, m: SupervoxelMap):
    """Broadcast per-supervoxel values back onto the voxel grid.

    Boolean labels produce a SegmentationMask, real values a SaliencyField.
    """
    if isinstance(values, SaliencyVector):
        values = values.values
    arr = np.asarray(values)
    if arr.shape != (m.k,):
        raise ArgumentError(f"expected {m.k} per-supervoxel values, got shape {arr.shape}")
    out = arr[m.assignment]
    if arr.dtype == bool:
        return SegmentationMask(out)
    return SaliencyField(out.astype(np.float64))


def majority_vote(masks) -> SegmentationMask:
    """Voxel-wise strict majority; exact ties resolve to pore."""
    masks = list(masks)
    if not masks:
        raise ArgumentError("need at least one mask to vote on")
    dims = masks[0].dims
    if any(m.dims != dims for m in masks):
        raise ArgumentError("all masks must share the same dims")
    votes = np.zeros(masks[0].solid.shape, dtype=np.int32)
    for m in masks:
        votes += m.solid
    return SegmentationMask(2 * votes > len(masks))


def _segment_scale(adjusted: Volume, target_k: int, sigma: float, squared: bool,
                   phi_seed, phi_multiplier: float, axis: str, slic_iters: int,
                   tol: float):
    svmap = slic3d(adjusted, target_k, max_iter=slic_iters)
    means = supervoxel_means(adjusted, svmap)
    seeds = select_pore_seeds(adjusted, svmap, means, axis=axis)
    g = build_graph(means, sigma, squared=squared).with_seeds(seeds, phi_seed, phi_multiplier)
    sal = quantum_cut(g, tol=tol)
    degenerate = False
    try:
        labels, solid_cluster = kmeans2(sal.values)
        solid_sv = labels == solid_cluster
    except DegenerateInputError:
        solid_sv = np.zeros(svmap.k, dtype=bool)  # no split -> everything pore
        degenerate = True
    mask = voxelize(solid_sv, svmap)
    field = voxelize(sal.values, svmap)
    diag = ScaleDiagnostics(
        target_k=int(target_k),
        realized_k=svmap.k,
        seed_count=int(len(seeds)),
        eigenvalue=float(sal.eigenvalue),
        residual=float(sal.residual),
        solid_fraction=mask.solid_fraction,
        degenerate=degenerate,
    )
    return mask, field, diag


def segment_volume(v: Volume, scales=DEFAULT_SCALES, *, sigma: float = DEFAULT_SIGMA,
                   phi_seed: float | None = None,
                   phi_multiplier: float = DEFAULT_PHI_MULTIPLIER, axis: str = "z",
                   percentiles=DEFAULT_PERCENTILES, squared: bool = False,
                   slic_iters: int = 10, tol: float = 1e-8,
                   threads: int | None = None) -> SegmentationResult:
    """Run the full multi-scale pipeline on one volume.

    Deterministic for fixed inputs and parameters; per-scale pipelines are
    independent and mapped onto a thread pool.
    """
    scales = tuple(int(s) for s in scales)
    if not scales:
        raise ArgumentError("need at least one supervoxel scale")
    adjusted = contrast_adjust(v, *percentiles)

    if adjusted.voxels.min() == adjusted.voxels.max():
        # constant volume carries no pore/solid evidence; pore is the
        # seeded prior class, so everything is labelled pore
        shape = adjusted.voxels.shape
        mask = SegmentationMask(np.zeros(shape, dtype=bool))
        fld = SaliencyField(np.zeros(shape))
        diags = tuple(
            ScaleDiagnostics(target_k=s, realized_k=0, seed_count=0, eigenvalue=0.0,
                             residual=0.0, solid_fraction=0.0, degenerate=True)
            for s in scales
        )
        return SegmentationResult(mask, fld, diags)

    def run(target_k):
        return _segment_scale(adjusted, target_k, sigma, squared, phi_seed,
                              phi_multiplier, axis, slic_iters, tol)

    if threads is not None and threads < 1:
        raise ArgumentError("threads must be a positive count")
    workers = min(threads or len(scales), len(scales))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, scales))
    else:
        results = [run(s) for s in scales]

    masks = [r[0] for r in results]
    fused = majority_vote(masks)
    stacked = np.mean([r[1].values for r in results], axis=0)
    return SegmentationResult(fused, SaliencyField(stacked),
                              tuple(r[2] for r in results))
