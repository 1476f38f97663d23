"""SPD-manifold numerics for covariance-based EEG classification.

Covariances of filtered epochs are shrunk toward a scaled identity, compared
with the affine-invariant Riemannian distance, averaged with the geometric
(Frechet) mean, and embedded into the tangent space at a reference point
where linear classifiers apply.

All functions are pure; :class:`SpdMatrix` values are immutable after
construction and safe to share across threads. Reductions over sets run in
input order so results are bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    DegenerateInputError,
    DimMismatchError,
    NoConvergenceError,
    NonFiniteError,
    NotSpdError,
)

SYMMETRY_RTOL = 1e-12


class SpdMatrix:
    """Symmetric positive definite matrix, validated at construction.

    Construction rejects non-symmetric (relative Frobenius asymmetry above
    1e-12) and non-positive-definite input instead of repairing it; the
    shrinkage step upstream is responsible for positivity.
    """

    __slots__ = ("values",)

    def __init__(self, values):
        arr = np.array(values, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise DimMismatchError(f"expected a square matrix, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise NonFiniteError("matrix contains NaN or inf")
        norm = np.linalg.norm(arr)
        if norm > 0 and np.linalg.norm(arr - arr.T) > SYMMETRY_RTOL * norm:
            raise NotSpdError("matrix is not symmetric")
        arr = 0.5 * (arr + arr.T)
        try:
            np.linalg.cholesky(arr)
        except np.linalg.LinAlgError:
            raise NotSpdError("matrix is not positive definite") from None
        arr.setflags(write=False)
        self.values = arr

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def __repr__(self):
        return f"SpdMatrix(dim={self.dim})"


@dataclass(frozen=True)
class TangentVector:
    """Weighted upper-triangle vectorization of a whitened matrix logarithm."""

    values: np.ndarray
    reference_dim: int

    def __post_init__(self):
        expected = self.reference_dim * (self.reference_dim + 1) // 2
        if self.values.shape != (expected,):
            raise DimMismatchError(
                f"tangent vector must have length {expected}, got {self.values.shape}"
            )

    def __len__(self):
        return self.values.shape[0]


@dataclass(frozen=True)
class MeanEstimate:
    """Geometric mean together with the solver's convergence report."""

    mean: SpdMatrix
    iterations: int
    final_gradient_norm: float


# ---------------------------------------------------------------------------
# eigendecomposition helpers (all SPD matrix functions go through eigh)

def _eigh_many(mats: np.ndarray):
    """Batched symmetric eigendecomposition of a (..., P, P) stack."""
    return np.linalg.eigh(mats)


def _apply_eigvals(vals, vecs, fn) -> np.ndarray:
    """Rebuild fn(matrix) from its eigendecomposition; symmetrized output."""
    transformed = fn(vals)
    out = (vecs * transformed[..., None, :]) @ np.swapaxes(vecs, -1, -2)
    return 0.5 * (out + np.swapaxes(out, -1, -2))


def spd_power(mat: np.ndarray, exponent: float) -> np.ndarray:
    vals, vecs = _eigh_many(mat)
    return _apply_eigvals(vals, vecs, lambda v: np.power(v, exponent))


def spd_log(mat: np.ndarray) -> np.ndarray:
    vals, vecs = _eigh_many(mat)
    return _apply_eigvals(vals, vecs, np.log)


def sym_exp(mat: np.ndarray) -> np.ndarray:
    vals, vecs = _eigh_many(mat)
    return _apply_eigvals(vals, vecs, np.exp)


def _stack(mats) -> np.ndarray:
    arrs = [m.values if isinstance(m, SpdMatrix) else np.asarray(m) for m in mats]
    dims = {a.shape for a in arrs}
    if len(dims) != 1:
        raise DimMismatchError(f"matrices have mixed shapes: {sorted(dims)}")
    return np.stack(arrs)


# ---------------------------------------------------------------------------
# shrinkage

def ledoit_wolf_intensity(x: np.ndarray) -> float:
    """Optimal shrinkage intensity toward mu*I from per-sample outer products.

    ``x`` is a P x T epoch matrix whose columns are treated as (already
    centered) observations, matching the uncentered covariance X X^T / T.
    The estimate is clamped to [0, 1].
    """
    x = np.asarray(x, dtype=np.float64)
    p, t = x.shape
    cov = x @ x.T / t
    mu = np.trace(cov) / p
    # d^2 = ||C - mu I||^2 under <A,B> = tr(A B^T)/P
    d2 = (np.linalg.norm(cov - mu * np.eye(p)) ** 2) / p
    if d2 <= 0.0:
        return 0.0
    # mean_t ||x_t x_t^T - C||^2 expanded to avoid forming T outer products
    sq_norms = np.einsum("it,it->t", x, x)
    xtcx = np.einsum("it,ij,jt->t", x, cov, x, optimize=True)
    cov_norm2 = np.linalg.norm(cov) ** 2
    b2 = float(np.mean(sq_norms**2 - 2.0 * xtcx + cov_norm2) / (p * t))
    b2 = min(b2, d2)
    return float(min(1.0, max(0.0, b2 / d2)))


def shrink_covariance(x: np.ndarray, intensity: float | None = None) -> SpdMatrix:
    """Shrunk spatial covariance (1-s) * X X^T / T + s * mu * I of one epoch.

    ``intensity`` overrides the Ledoit-Wolf estimate (diagnostic use, e.g.
    forcing s = 1 yields mu * I exactly).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise DimMismatchError(f"epoch must be a P x T matrix, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise NonFiniteError("epoch contains NaN or inf")
    p, t = x.shape
    if t < 2:
        raise DegenerateInputError(f"need at least 2 samples, got {t}")
    s = ledoit_wolf_intensity(x) if intensity is None else float(intensity)
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"shrinkage intensity must be in [0, 1], got {s}")
    cov = x @ x.T / t
    mu = np.trace(cov) / p
    if mu <= 0.0:
        raise DegenerateInputError("epoch has zero power; covariance undefined")
    shrunk = (1.0 - s) * cov + s * mu * np.eye(p)
    return SpdMatrix(shrunk)


# ---------------------------------------------------------------------------
# metric, mean, tangent space

def riemannian_distance(c1: SpdMatrix, c2: SpdMatrix) -> float:
    """Affine-invariant distance sqrt(sum log^2 eig(C1^-1 C2))."""
    if c1.dim != c2.dim:
        raise DimMismatchError(f"dims differ: {c1.dim} vs {c2.dim}")
    vals = scipy.linalg.eigh(c2.values, c1.values, eigvals_only=True)
    return float(np.sqrt(np.sum(np.log(vals) ** 2)))


def geometric_mean(
    mats, tol: float = 1e-10, max_iter: int = 50
) -> MeanEstimate:
    """Geometric (Frechet) mean of a set of SPD matrices.

    Fixed-point iteration C <- C^1/2 exp(mean_i log(C^-1/2 C_i C^-1/2)) C^1/2
    with unit step, initialized at the arithmetic mean. Convergence when the
    Riemannian gradient norm ||mean_i log(C^-1/2 C_i C^-1/2)||_F <= tol.
    """
    mats = list(mats)
    if not mats:
        raise DegenerateInputError("geometric_mean of an empty set")
    stack = _stack(mats)
    mean = stack.mean(axis=0)
    grad_norm = np.inf
    for iteration in range(max_iter + 1):
        vals, vecs = np.linalg.eigh(mean)
        inv_sqrt = _apply_eigvals(vals, vecs, lambda v: 1.0 / np.sqrt(v))
        whitened = inv_sqrt @ stack @ inv_sqrt
        grad = spd_log(whitened).mean(axis=0)
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm <= tol:
            return MeanEstimate(SpdMatrix(mean), iteration, grad_norm)
        if iteration == max_iter:
            break
        sqrt = _apply_eigvals(vals, vecs, np.sqrt)
        mean = sqrt @ sym_exp(grad) @ sqrt
        mean = 0.5 * (mean + mean.T)
    raise NoConvergenceError(
        f"geometric mean did not reach gradient norm {tol} "
        f"in {max_iter} iterations (final {grad_norm:.3e})",
        iterations=max_iter,
        final_gradient_norm=grad_norm,
    )


def _upper_weights(p: int) -> tuple[tuple[np.ndarray, np.ndarray], np.ndarray]:
    rows, cols = np.triu_indices(p)
    weights = np.where(rows == cols, 1.0, np.sqrt(2.0))
    return (rows, cols), weights


def tangent_map(c: SpdMatrix, reference: SpdMatrix) -> TangentVector:
    """Project one SPD matrix to the tangent space at ``reference``.

    Returns Upper(log(R^-1/2 C R^-1/2)) with weight 1 on the diagonal and
    sqrt(2) off it, so the Euclidean norm of the vector equals the
    affine-invariant distance delta_R(C, reference).
    """
    return TangentVector(tangent_maps([c], reference)[0], reference.dim)


def tangent_maps(mats, reference: SpdMatrix) -> np.ndarray:
    """Batched tangent projection; rows are vectors of length P(P+1)/2."""
    stack = _stack(mats)
    if stack.shape[-1] != reference.dim:
        raise DimMismatchError(
            f"dims differ: {stack.shape[-1]} vs reference {reference.dim}"
        )
    inv_sqrt = spd_power(reference.values, -0.5)
    logs = spd_log(inv_sqrt @ stack @ inv_sqrt)
    (rows, cols), weights = _upper_weights(reference.dim)
    return logs[:, rows, cols] * weights


def untangent(vec: TangentVector, reference: SpdMatrix) -> SpdMatrix:
    """Inverse of :func:`tangent_map` (exp-based retraction)."""
    p = reference.dim
    (rows, cols), weights = _upper_weights(p)
    sym = np.zeros((p, p))
    sym[rows, cols] = vec.values / weights
    sym = sym + np.triu(sym, 1).T
    sqrt = spd_power(reference.values, 0.5)
    return SpdMatrix(sqrt @ sym_exp(sym) @ sqrt)


def recenter(mats, mean: SpdMatrix) -> list[SpdMatrix]:
    """Whiten a set by a reference mean: C_i -> M^-1/2 C_i M^-1/2."""
    stack = _stack(mats)
    if stack.shape[-1] != mean.dim:
        raise DimMismatchError(f"dims differ: {stack.shape[-1]} vs mean {mean.dim}")
    inv_sqrt = spd_power(mean.values, -0.5)
    whitened = inv_sqrt @ stack @ inv_sqrt
    return [SpdMatrix(w) for w in whitened]
