"""Strategies for mapping datasets with different channel sets onto a
common representation.

Signal-level routes build a linear operator A with X_hat = A X:

* SSI — spherical-spline interpolation (Perrin splines on the unit sphere).
* FI  — field interpolation through the spherical forward model: data are
  mapped to brain space with a Tikhonov-regularized (minimum-norm) inverse
  and re-projected onto the target electrode positions.

Covariance/statistical routes:

* common channel selection (intersection across montages),
* DT — isometric block-diagonal expansion of covariances to the union
  channel space,
* ComImp — round-robin iterative ridge imputation of missing channels on
  concatenated time samples.

Both interpolation operators depend only on electrode geometry, never on
signal values, so harmonization of an unseen dataset needs no source data.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import (
    ChannelOrderMismatchError,
    EmptyIntersectionError,
    SingularSystemError,
    SourceSpaceMismatchError,
    TooFewChannelsError,
    UncoveredChannelError,
    UnknownChannelError,
)
from .geometry import SpdMatrix
from .headmodel import Leadfield
from .montage import Montage, TEMPLATE_17_NAMES, normalize_name, project_unit_sphere
from .preprocessing import EpochSet

SSI_STIFFNESS = 4
SSI_N_TERMS = 50
SSI_DEFAULT_REG = 1e-7
FI_DEFAULT_REG = 1e-3


@dataclass(frozen=True)
class InterpOperator:
    """Dense linear map from source channels to target channels."""

    matrix: np.ndarray
    source_names: tuple[str, ...]
    target_names: tuple[str, ...]
    method: str
    reg: float

    def __post_init__(self):
        arr = np.array(self.matrix, dtype=np.float64)
        if arr.shape != (len(self.target_names), len(self.source_names)):
            raise ChannelOrderMismatchError(
                f"operator shape {arr.shape} does not match "
                f"{len(self.target_names)} x {len(self.source_names)} channels"
            )
        if not np.all(np.isfinite(arr)):
            raise SingularSystemError("operator contains non-finite entries")
        arr.setflags(write=False)
        object.__setattr__(self, "matrix", arr)
        object.__setattr__(self, "source_names", tuple(self.source_names))
        object.__setattr__(self, "target_names", tuple(self.target_names))

    def to_json(self) -> str:
        return json.dumps(
            {
                "method": self.method,
                "reg": self.reg,
                "source_names": list(self.source_names),
                "target_names": list(self.target_names),
                "matrix": [float(v) for v in self.matrix.ravel(order="C")],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "InterpOperator":
        doc = json.loads(text)
        shape = (len(doc["target_names"]), len(doc["source_names"]))
        matrix = np.array(doc["matrix"], dtype=float).reshape(shape, order="C")
        return cls(
            matrix,
            tuple(doc["source_names"]),
            tuple(doc["target_names"]),
            doc["method"],
            float(doc["reg"]),
        )


@dataclass(frozen=True)
class ExpandedCov:
    """Covariance embedded in the union channel space, rows/cols in
    union-name order."""

    matrix: SpdMatrix
    union_names: tuple[str, ...]


def _legendre_sum(x: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    """sum_n coeffs[n-1] * P_n(x) for n = 1..len(coeffs), Bonnet recurrence."""
    p_prev = np.ones_like(x)
    p_cur = np.asarray(x, dtype=np.float64).copy()
    total = coeffs[0] * p_cur
    for n in range(1, len(coeffs)):
        p_next = ((2 * n + 1) * x * p_cur - n * p_prev) / (n + 1)
        p_prev, p_cur = p_cur, p_next
        total += coeffs[n] * p_cur
    return total


def ssi_kernel(
    cos_angles: np.ndarray, m_order: int = SSI_STIFFNESS, n_terms: int = SSI_N_TERMS
) -> np.ndarray:
    """Perrin spline kernel g(cos theta) with stiffness ``m_order``."""
    n = np.arange(1, n_terms + 1, dtype=np.float64)
    coeffs = (2 * n + 1) / (n**m_order * (n + 1) ** m_order) / (4 * np.pi)
    return _legendre_sum(np.clip(cos_angles, -1.0, 1.0), coeffs)


def ssi_operator(
    src: Montage,
    dst: Montage,
    m_order: int = SSI_STIFFNESS,
    reg: float = SSI_DEFAULT_REG,
    n_terms: int = SSI_N_TERMS,
) -> InterpOperator:
    """Spherical-spline interpolation operator from src to dst channels.

    The spline system carries a constant term, so constant signals are
    reproduced exactly; ``reg`` is added to the kernel matrix diagonal.
    """
    k = len(src)
    if k < 3:
        raise TooFewChannelsError(f"spherical splines need >= 3 channels, got {k}")
    src_u = project_unit_sphere(src)
    dst_u = project_unit_sphere(dst)
    gram = ssi_kernel(src_u @ src_u.T, m_order, n_terms)
    cross = ssi_kernel(dst_u @ src_u.T, m_order, n_terms)

    system = np.zeros((k + 1, k + 1))
    system[:k, :k] = gram + reg * np.eye(k)
    system[:k, k] = 1.0
    system[k, :k] = 1.0
    rhs = np.zeros((k + 1, k))
    rhs[:k, :k] = np.eye(k)
    try:
        coef = np.linalg.solve(system, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(f"spline system is singular: {exc}") from None
    basis = np.concatenate([cross, np.ones((len(dst), 1))], axis=1)
    return InterpOperator(basis @ coef, src.names, dst.names, "ssi", reg)


def fi_operator(
    src: Montage,
    dst: Montage,
    lf_src: Leadfield,
    lf_dst: Leadfield,
    reg: float = FI_DEFAULT_REG,
) -> InterpOperator:
    """Field interpolation operator A = G_dst G_src^T (G_src G_src^T + lam I)^-1
    with lam = reg * mean(diag(G_src G_src^T))."""
    if lf_src.source is not lf_dst.source and not (
        np.array_equal(lf_src.source.positions, lf_dst.source.positions)
        and np.array_equal(lf_src.source.orientations, lf_dst.source.orientations)
    ):
        raise SourceSpaceMismatchError(
            "source and target leadfields must share one source space"
        )
    g_src = lf_src.matrix
    g_dst = lf_dst.matrix
    gram = g_src @ g_src.T
    lam = reg * float(np.mean(np.diag(gram)))
    try:
        solved = np.linalg.solve(gram + lam * np.eye(gram.shape[0]), g_src @ g_dst.T)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(f"regularized Gram is singular: {exc}") from None
    return InterpOperator(solved.T, src.names, dst.names, "fi", reg)


def apply_operator(op: InterpOperator, epochs: EpochSet) -> EpochSet:
    """Map every epoch through the operator; labels and rate are kept."""
    have = tuple(normalize_name(n) for n in epochs.channel_names)
    want = tuple(normalize_name(n) for n in op.source_names)
    if have != want:
        raise ChannelOrderMismatchError(
            f"epoch channels {have} do not match operator source {want}"
        )
    return epochs.with_data(op.matrix @ epochs.data, channel_names=op.target_names)


# ---------------------------------------------------------------------------
# union bookkeeping

def union_channel_order(name_lists) -> tuple[str, ...]:
    """Union of channel names: template-17 order first, then alphabetical."""
    seen = set()
    for names in name_lists:
        seen.update(normalize_name(n) for n in names)
    template = [normalize_name(n) for n in TEMPLATE_17_NAMES]
    ordered = [n for n in template if n in seen]
    ordered += sorted(seen - set(ordered))
    return tuple(ordered)


def common_channels(montages) -> Montage:
    """Montage of channels present in every input montage.

    Channel order: template-17 order first, then alphabetical. Positions are
    taken from the first montage (alias-normalized lookup).
    """
    montages = list(montages)
    if not montages:
        raise EmptyIntersectionError("no montages given")
    shared = set(montages[0].normalized_names)
    for m in montages[1:]:
        shared &= set(m.normalized_names)
    if not shared:
        raise EmptyIntersectionError("montages share no channels")
    template = [normalize_name(n) for n in TEMPLATE_17_NAMES]
    ordered = [n for n in template if n in shared]
    ordered += sorted(shared - set(ordered))
    first = {name: pos for name, pos in zip(montages[0].normalized_names,
                                            montages[0].positions)}
    positions = np.array([first[n] for n in ordered])
    return Montage(tuple(ordered), positions, montages[0].head_radius)


def dt_expand(c: SpdMatrix, names, union_names) -> ExpandedCov:
    """Isometric expansion: embed C block-diagonally with an identity block
    for the absent channels, rows/cols permuted to union-name order."""
    union = [normalize_name(n) for n in union_names]
    index = {n: i for i, n in enumerate(union)}
    try:
        idx = np.array([index[normalize_name(n)] for n in names])
    except KeyError as exc:
        raise UnknownChannelError(f"channel {exc} not in union") from None
    if len(idx) != c.dim:
        raise ChannelOrderMismatchError(
            f"{len(idx)} names for a covariance of dim {c.dim}"
        )
    out = np.eye(len(union))
    out[np.ix_(idx, idx)] = c.values
    return ExpandedCov(SpdMatrix(out), tuple(union_names))


# ---------------------------------------------------------------------------
# ComImp: iterative multivariate imputation on concatenated time samples

COMIMP_DEFAULT_RIDGE = 1e-3
COMIMP_DEFAULT_MAX_ITER = 10
COMIMP_DEFAULT_TOL = 1e-3


@dataclass(frozen=True)
class ImputerModel:
    """Per-channel ridge regressions fitted round-robin on training data.

    ``weights[j]`` predicts channel j from all others (its own entry is 0);
    the penalty actually used is ``ridge`` times the mean predictor variance
    of each regression.
    """

    union_names: tuple[str, ...]
    means: np.ndarray
    weights: np.ndarray      # (P, P), row j maps the other channels to j
    intercepts: np.ndarray
    visit_order: tuple[int, ...]
    iterations: int
    converged: bool
    ridge: float
    max_iter: int
    tol: float

    def __post_init__(self):
        if np.any(np.diag(self.weights) != 0.0):
            raise ValueError("a channel may not predict itself")


def _union_indices(channel_names, union: dict[str, int]) -> np.ndarray:
    idx = []
    for name in channel_names:
        key = normalize_name(name)
        if key not in union:
            raise UnknownChannelError(f"channel {name!r} not in union")
        idx.append(union[key])
    return np.array(idx, dtype=np.intp)


def _epochs_as_rows(epochs: EpochSet) -> np.ndarray:
    """Stack an epoch set as (n_epochs * n_times, n_channels) time samples."""
    return np.moveaxis(epochs.data, 1, 2).reshape(-1, epochs.n_channels)


def _ridge_solve(gram_c, cross_c, ridge):
    lam = ridge * float(np.mean(np.diag(gram_c))) if gram_c.size else 0.0
    try:
        return np.linalg.solve(gram_c + lam * np.eye(gram_c.shape[0]), cross_c)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(f"imputer regression singular: {exc}") from None


def comimp_fit(
    training,
    union_names,
    ridge: float = COMIMP_DEFAULT_RIDGE,
    max_iter: int = COMIMP_DEFAULT_MAX_ITER,
    tol: float = COMIMP_DEFAULT_TOL,
) -> ImputerModel:
    """Fit the round-robin imputer on the concatenated time samples of the
    training epoch sets.

    Missing entries start at the channel means; channels are then revisited
    in ascending order of available training samples, each regressed on all
    others (rows where the channel is observed) with a ridge penalty, until
    the largest relative change of an imputed value drops below ``tol`` or
    ``max_iter`` sweeps are done.
    """
    union = tuple(normalize_name(n) for n in union_names)
    index = {n: i for i, n in enumerate(union)}
    p = len(union)

    blocks = []         # filled (rows, P) matrix per dataset
    observed = []       # boolean mask (P,) per dataset
    for epochs in training:
        idx = _union_indices(epochs.channel_names, index)
        rows = _epochs_as_rows(epochs)
        block = np.zeros((rows.shape[0], p))
        block[:, idx] = rows
        mask = np.zeros(p, dtype=bool)
        mask[idx] = True
        blocks.append(block)
        observed.append(mask)

    counts = np.zeros(p)
    sums = np.zeros(p)
    for block, mask in zip(blocks, observed):
        counts += mask * block.shape[0]
        sums += mask * block.sum(axis=0)
    if np.any(counts == 0):
        missing = [union[j] for j in np.nonzero(counts == 0)[0]]
        raise UncoveredChannelError(
            f"channels observed in no training dataset: {missing}"
        )
    means = sums / counts

    any_missing = False
    for block, mask in zip(blocks, observed):
        block[:, ~mask] = means[~mask]
        any_missing = any_missing or not mask.all()

    # ascending available-sample count, union index as the deterministic tie-break
    visit_order = tuple(int(j) for j in np.argsort(counts, kind="stable"))

    grams = [block.T @ block for block in blocks]
    col_sums = [block.sum(axis=0) for block in blocks]

    weights = np.zeros((p, p))
    intercepts = np.zeros(p)
    converged = not any_missing
    iterations = 0
    for sweep in range(1, max_iter + 1):
        iterations = sweep
        max_change = 0.0
        max_scale = 0.0
        for j in visit_order:
            uses = [d for d, mask in enumerate(observed) if mask[j]]
            gram = sum(grams[d] for d in uses)
            total = sum(col_sums[d] for d in uses)
            n_rows = sum(blocks[d].shape[0] for d in uses)
            centered = gram - np.outer(total, total) / n_rows
            others = np.arange(p) != j
            w = _ridge_solve(centered[np.ix_(others, others)], centered[others, j],
                             ridge)
            b0 = (total[j] - total[others] @ w) / n_rows
            weights[j, others] = w
            weights[j, j] = 0.0
            intercepts[j] = b0
            for d, mask in enumerate(observed):
                if mask[j]:
                    continue
                new_col = blocks[d] @ weights[j] + b0
                max_change = max(max_change,
                                 float(np.max(np.abs(new_col - blocks[d][:, j]))))
                max_scale = max(max_scale, float(np.max(np.abs(new_col))))
                blocks[d][:, j] = new_col
                grams[d][:, j] = blocks[d].T @ new_col
                grams[d][j, :] = grams[d][:, j]
                col_sums[d][j] = new_col.sum()
        if not any_missing or max_change <= tol * max(max_scale, 1e-300):
            converged = True
            break

    return ImputerModel(
        union, means, weights, intercepts, visit_order,
        iterations, converged, ridge, max_iter, tol,
    )


def comimp_transform(model: ImputerModel, epochs: EpochSet) -> EpochSet:
    """Expand epochs to the union channels: observed channels are copied
    bit-exact, missing ones filled by the fitted regressions iterated as in
    the fit."""
    index = {n: i for i, n in enumerate(model.union_names)}
    idx = _union_indices(epochs.channel_names, index)
    p = len(model.union_names)
    rows = _epochs_as_rows(epochs)
    filled = np.zeros((rows.shape[0], p))
    filled[:, idx] = rows
    mask = np.zeros(p, dtype=bool)
    mask[idx] = True
    missing = [j for j in model.visit_order if not mask[j]]
    if missing:
        filled[:, ~mask] = model.means[~mask]
        for _ in range(model.max_iter):
            max_change = 0.0
            max_scale = 0.0
            for j in missing:
                new_col = filled @ model.weights[j] + model.intercepts[j]
                max_change = max(max_change,
                                 float(np.max(np.abs(new_col - filled[:, j]))))
                max_scale = max(max_scale, float(np.max(np.abs(new_col))))
                filled[:, j] = new_col
            if max_change <= model.tol * max(max_scale, 1e-300):
                break
    out = filled.reshape(epochs.n_epochs, epochs.n_times, p)
    out = np.moveaxis(out, 1, 2)
    # re-copy observed channels so they are bit-identical to the input
    out[:, idx, :] = epochs.data
    return epochs.with_data(out, channel_names=model.union_names)
