"""Smallest-eigenpair solve of the seeded graph Hamiltonian and its
conversion to a per-supervoxel solid-likelihood (saliency) vector.

The minimizer of the Rayleigh quotient z'Hz / z'z over the positive
definite operator H = D - W + diag(phi) is its smallest eigenvector; the
elementwise square of that vector, normalized to a unit maximum, is the
saliency. The solver is matrix-free: a preconditioned Rayleigh-Ritz
iteration over the 3-dimensional subspace span{x, M r, p} (current
iterate, preconditioned residual, previous search direction), so it only
ever touches the operator through applications to vectors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, ConvergenceError
from .graph import SupervoxelGraph, apply_hamiltonian

_FLOOR_FACTOR = 64.0   # times eps * ||H|| estimate: smallest meaningful residual
_STALL_LIMIT = 120     # iterations without residual improvement before giving up


@dataclass(frozen=True)
class SaliencyVector:
    """Per-supervoxel solid-likelihood in [0, 1] with solve diagnostics."""

    values: np.ndarray
    eigenvalue: float
    residual: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1 or v.size < 1:
            raise ArgumentError("saliency values must form a non-empty vector")
        object.__setattr__(self, "values", v)


def smallest_eigenpair(op, n: int, tol: float = 1e-8, max_iter: int | None = None,
                       start: np.ndarray | None = None, precond=None):
    """Smallest eigenpair of a symmetric positive-definite operator.

    ``op`` maps a length-n vector to a length-n vector. Iterates from the
    normalized all-ones vector (or ``start``) until the residual satisfies
    ``||op(z) - lam z|| <= tol * lam`` or reaches the floating-point floor
    for the operator's scale; raises ConvergenceError (carrying the best
    residual) after ``max_iter`` operator applications (default 10 n).

    Returns ``(eigenvalue, unit eigenvector)``. Deterministic for a fixed
    starting vector.
    """
    if n < 1:
        raise ArgumentError(f"dimension must be >= 1, got {n}")
    if tol <= 0:
        raise ArgumentError(f"tolerance must be positive, got {tol}")
    if max_iter is None:
        max_iter = 10 * n
    eps = np.finfo(np.float64).eps

    if start is None:
        x = np.full(n, 1.0 / np.sqrt(n))
    else:
        x = np.asarray(start, dtype=np.float64).copy()
        nx = np.linalg.norm(x)
        if nx == 0.0:
            raise ArgumentError("starting vector must be nonzero")
        x /= nx
    hx = np.asarray(op(x), dtype=np.float64)
    applications = 1
    lam = float(x @ hx)
    if n == 1:
        return lam, np.array([1.0 if x[0] >= 0 else -1.0])
    hnorm = max(np.linalg.norm(hx), eps)

    p = None
    best_res = np.inf
    best = (lam, x.copy())
    stall = 0
    while True:
        r = hx - lam * x
        rn = float(np.linalg.norm(r))
        if rn < best_res * (1.0 - 1e-12):
            best_res, best, stall = rn, (lam, x.copy()), 0
        else:
            stall += 1
        floor = _FLOOR_FACTOR * eps * hnorm
        if rn <= max(tol * abs(lam), floor):
            return lam, x
        if applications >= max_iter or stall > _STALL_LIMIT:
            raise ConvergenceError(
                f"no convergence after {applications} operator applications "
                f"(best residual {best_res:.3e})", best_residual=best_res)

        w = precond(r) if precond is not None else r
        cols = [x]
        hcols = [hx]
        for v in (w, p):
            if v is None:
                continue
            u = v.astype(np.float64, copy=True)
            scale = np.linalg.norm(u)
            if scale == 0.0:
                continue
            for _ in range(2):  # repeated Gram-Schmidt for stability
                for q in cols:
                    u -= (q @ u) * q
            nu = np.linalg.norm(u)
            if nu <= 1e-10 * scale:
                continue
            u /= nu
            hu = np.asarray(op(u), dtype=np.float64)
            applications += 1
            hnorm = max(hnorm, np.linalg.norm(hu))
            cols.append(u)
            hcols.append(hu)
        if len(cols) == 1:  # residual numerically inside span{x}
            return lam, x

        basis = np.stack(cols, axis=1)
        hbasis = np.stack(hcols, axis=1)
        small = basis.T @ hbasis
        small = 0.5 * (small + small.T)
        vals, vecs = np.linalg.eigh(small)
        c = vecs[:, 0]
        x_new = basis @ c
        p = x_new - c[0] * x
        x = x_new / np.linalg.norm(x_new)
        # fresh application instead of the cheaper hbasis @ c: carrying
        # the product across iterations accumulates rounding and stalls
        # the residual well above the attainable floor
        hx = np.asarray(op(x), dtype=np.float64)
        applications += 1
        lam = float(x @ hx)


def saliency_from_eigenvector(z: np.ndarray) -> np.ndarray:
    """Elementwise square normalized to unit maximum; sign-invariant."""
    z = np.asarray(z, dtype=np.float64)
    sq = z * z
    peak = sq.max(initial=0.0)
    if peak == 0.0:
        raise ArgumentError("cannot build saliency from the zero vector")
    return sq / peak


def quantum_cut(g: SupervoxelGraph, tol: float = 1e-8,
                max_iter: int | None = None) -> SaliencyVector:
    """Solve the seeded graph's smallest eigenpair and return its saliency."""
    phi = g.potentials()
    if g.seeds.size == 0 or not (phi > 0).any():
        raise ArgumentError("graph carries no seeded potentials; call with_seeds first")
    diag = phi + g.degrees

    def op(vec):
        return apply_hamiltonian(g, vec)

    lam, z = smallest_eigenpair(op, g.n, tol=tol, max_iter=max_iter,
                                precond=lambda r: r / diag)
    resid = float(np.linalg.norm(op(z) - lam * z))
    rel = resid / max(abs(lam), np.finfo(np.float64).tiny)
    return SaliencyVector(saliency_from_eigenvector(z), lam, rel)
