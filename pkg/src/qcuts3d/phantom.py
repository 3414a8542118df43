"""Synthetic porous-media phantoms with exact voxel-wise ground truth.

Spherical grains are placed by rejection sampling (centers may approach
up to 30% overlap, mimicking grain contact); the remaining space is split
among the pore phases by nearest-seed region growth. Intensities are the
per-phase means plus optional Gaussian noise, then Gaussian blur as a
partial-volume model. The label volume always holds the exact pre-noise
phases, and everything is deterministic for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import ArgumentError, PlacementError
from .volume import LabelVolume, Volume

_MAX_ATTEMPTS = 1_000_000
_SEEDS_PER_PORE_PHASE = 4
_CONTACT_FACTOR = 0.7  # accepted center distance >= 0.7 * (r_i + r_j)

DEFAULT_PHASES = {"gas": 0.10, "water": 0.35, "oil": 0.55, "solid": 0.90}


@dataclass(frozen=True)
class PhantomSpec:
    size: int = 64
    grain_count: int = 24
    radius_range: tuple[float, float] = (6.0, 10.0)
    phase_intensities: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_PHASES))
    noise_sigma: float = 0.0
    blur_sigma: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.size < 4:
            raise ArgumentError("phantom edge must be at least 4 voxels")
        if self.grain_count < 0:
            raise ArgumentError("grain count must be non-negative")
        r_min, r_max = self.radius_range
        if not 0 < r_min <= r_max < self.size / 2:
            raise ArgumentError(f"need 0 < rMin <= rMax < size/2, got {self.radius_range}")
        if "solid" not in self.phase_intensities:
            raise ArgumentError("phase_intensities must include 'solid'")
        vals = list(self.phase_intensities.values())
        if any(not 0.0 <= x <= 1.0 for x in vals):
            raise ArgumentError("phase intensities must lie in [0, 1]")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ArgumentError("phase intensities must be strictly increasing as listed")
        if self.noise_sigma < 0 or self.blur_sigma < 0:
            raise ArgumentError("noise and blur sigmas must be non-negative")

    @property
    def codebook(self) -> dict[int, str]:
        return {i: name for i, name in enumerate(self.phase_intensities)}

    @property
    def solid_code(self) -> int:
        return list(self.phase_intensities).index("solid")


def place_spheres(spec: PhantomSpec, rng=None):
    """Rejection-sample grain centers and radii; deterministic per seed."""
    if rng is None:
        rng = np.random.default_rng(spec.rng_seed)
    r_min, r_max = spec.radius_range
    centers = np.empty((spec.grain_count, 3))
    radii = np.empty(spec.grain_count)
    placed = 0
    attempts = 0
    while placed < spec.grain_count:
        if attempts >= _MAX_ATTEMPTS:
            raise PlacementError(
                f"placed only {placed}/{spec.grain_count} grains in "
                f"{_MAX_ATTEMPTS} attempts; use fewer grains or smaller radii")
        attempts += 1
        r = rng.uniform(r_min, r_max)
        c = rng.uniform(r, spec.size - 1 - r, size=3)
        gap = np.linalg.norm(centers[:placed] - c, axis=1) \
            - _CONTACT_FACTOR * (radii[:placed] + r)
        if placed == 0 or gap.min() >= 0.0:
            centers[placed] = c
            radii[placed] = r
            placed += 1
    return centers[:placed], radii[:placed]


def _rasterize_spheres(labels, centers, radii, solid_code):
    size = labels.shape[0]
    for c, r in zip(centers, radii):
        lo = np.maximum(np.floor(c - r).astype(int), 0)
        hi = np.minimum(np.ceil(c + r).astype(int) + 1, size)
        zz, yy, xx = np.ogrid[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]]
        inside = ((zz - c[0]) ** 2 + (yy - c[1]) ** 2 + (xx - c[2]) ** 2) <= r * r
        box = labels[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]]
        box[inside] = solid_code


def _grow_pore_phases(labels, pore_codes, rng):
    """Partition non-solid space among pore phases via nearest-seed growth."""
    pore = np.argwhere(labels < 0)
    if pore.size == 0:
        return
    if len(pore_codes) == 1:
        labels[labels < 0] = pore_codes[0]
        return
    seeds = []
    seed_codes = []
    for code in pore_codes:
        for _ in range(_SEEDS_PER_PORE_PHASE):
            seeds.append(pore[rng.integers(0, pore.shape[0])])
            seed_codes.append(code)
    seeds = np.array(seeds, dtype=np.float64)
    seed_codes = np.array(seed_codes)
    d2 = ((pore[:, None, :] - seeds[None, :, :]) ** 2).sum(axis=2)
    owner = seed_codes[np.argmin(d2, axis=1)]
    labels[pore[:, 0], pore[:, 1], pore[:, 2]] = owner


def generate(spec: PhantomSpec):
    """Build the phantom pair ``(Volume, LabelVolume)``."""
    rng = np.random.default_rng(spec.rng_seed)
    size = spec.size
    labels = np.full((size, size, size), -1, dtype=np.int32)

    centers, radii = place_spheres(spec, rng)
    _rasterize_spheres(labels, centers, radii, spec.solid_code)
    pore_codes = [code for code, name in spec.codebook.items() if name != "solid"]
    if not pore_codes and (labels < 0).any():
        raise ArgumentError("phase_intensities needs at least one pore phase")
    _grow_pore_phases(labels, pore_codes, rng)

    lut = np.array(list(spec.phase_intensities.values()))
    vox = lut[labels]
    if spec.noise_sigma > 0:
        vox = vox + rng.normal(0.0, spec.noise_sigma, size=vox.shape)
    if spec.blur_sigma > 0:
        vox = gaussian_filter(vox, spec.blur_sigma)
    vox = np.clip(vox, 0.0, 1.0)
    return Volume(vox), LabelVolume(labels, spec.codebook)
