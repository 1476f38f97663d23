"""End-to-end covariance classifier: per-domain re-centering, tangent-space
embedding at the identity, and L2 logistic regression.

Each subject is one domain. Training domains are whitened by the geometric
mean of all their covariances; a test domain's mean may only come from its
calibration scope (first session / first run / first half), never from all
of its data. With alignment disabled the whitening step is skipped and
matrix logarithms are taken at the identity directly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DimMismatchError, NoConvergenceError, SingleClassError
from .geometry import (
    MeanEstimate,
    SpdMatrix,
    geometric_mean,
    spd_log,
    spd_power,
    _stack,
    _upper_weights,
)

MEAN_SCOPES = ("all_data", "first_session", "first_run", "first_half")
ALIGN_MODES = ("recenter", "none")
DEFAULT_C = 1.0
LOGISTIC_TOL = 1e-8
LOGISTIC_MAX_ITER = 200


@dataclass(frozen=True)
class DomainRecord:
    """Covariances and metadata of one subject-domain.

    ``labels`` may be None for targets whose labels are withheld until
    scoring. ``mean_scope`` documents which slice of the domain's data the
    whitening mean was estimated from.
    """

    domain_id: tuple[str, str]
    covariances: tuple[SpdMatrix, ...]
    labels: np.ndarray | None
    whitening_mean: SpdMatrix | None
    mean_scope: str

    def __post_init__(self):
        if self.mean_scope not in MEAN_SCOPES:
            raise ValueError(f"unknown mean scope {self.mean_scope!r}")
        dims = {c.dim for c in self.covariances}
        if len(dims) > 1:
            raise DimMismatchError(f"mixed covariance dims {sorted(dims)}")
        if self.whitening_mean is not None and dims and (
            self.whitening_mean.dim != next(iter(dims))
        ):
            raise DimMismatchError("whitening mean dim does not match covariances")
        object.__setattr__(self, "covariances", tuple(self.covariances))
        if self.labels is not None:
            object.__setattr__(
                self, "labels", np.asarray(self.labels, dtype=np.int64)
            )

    @property
    def dim(self) -> int:
        return self.covariances[0].dim


@dataclass(frozen=True)
class Classifier:
    """L2 logistic regression on tangent vectors."""

    weights: np.ndarray
    intercept: float
    C: float
    channel_names: tuple[str, ...] | None = None

    def decision_function(self, vectors: np.ndarray) -> np.ndarray:
        vectors = np.atleast_2d(vectors)
        if vectors.shape[1] != self.weights.shape[0]:
            raise DimMismatchError(
                f"{vectors.shape[1]} features vs {self.weights.shape[0]} weights"
            )
        return vectors @ self.weights + self.intercept

    def predict_proba(self, vectors: np.ndarray) -> np.ndarray:
        return _sigmoid(self.decision_function(vectors))

    def predict_labels(self, vectors: np.ndarray) -> np.ndarray:
        return (self.decision_function(vectors) >= 0.0).astype(np.int64)

    def to_json(self) -> str:
        return json.dumps(
            {
                "weights": [float(w) for w in self.weights],
                "intercept": float(self.intercept),
                "C": float(self.C),
                "channel_names": (
                    list(self.channel_names) if self.channel_names else None
                ),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "Classifier":
        doc = json.loads(text)
        names = doc.get("channel_names")
        return cls(
            np.array(doc["weights"], dtype=float),
            float(doc["intercept"]),
            float(doc["C"]),
            tuple(names) if names else None,
        )


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def logistic_objective(w, b, vectors, signs, C):
    """Objective 0.5 ||w||^2 + C sum log(1 + exp(-y (w.z + b))) and its
    gradient with respect to (w, b)."""
    margins = vectors @ w + b
    z = signs * margins
    loss = 0.5 * float(w @ w) + C * float(np.sum(np.logaddexp(0.0, -z)))
    p = _sigmoid(-z)
    grad_w = w - C * (vectors.T @ (signs * p))
    grad_b = -C * float(np.sum(signs * p))
    return loss, grad_w, grad_b


def fit_logistic(
    vectors: np.ndarray,
    labels: np.ndarray,
    C: float = DEFAULT_C,
    tol: float = LOGISTIC_TOL,
    max_iter: int = LOGISTIC_MAX_ITER,
) -> tuple[np.ndarray, float]:
    """Deterministic Newton solver with backtracking line search.

    The intercept is unpenalized; convergence requires the full gradient
    norm to drop below ``tol``.
    """
    vectors = np.asarray(vectors, dtype=np.float64)
    labels = np.asarray(labels)
    classes = np.unique(labels)
    if classes.size < 2:
        raise SingleClassError(f"training labels contain one class: {classes}")
    if classes.size > 2:
        raise ValueError(f"binary task expected, got classes {classes}")
    signs = np.where(labels == classes.max(), 1.0, -1.0)

    n, d = vectors.shape
    w = np.zeros(d)
    b = 0.0
    loss, grad_w, grad_b = logistic_objective(w, b, vectors, signs, C)
    for _ in range(max_iter):
        grad_norm = float(np.sqrt(grad_w @ grad_w + grad_b * grad_b))
        if grad_norm <= tol:
            return w, b
        margins = vectors @ w + b
        curv = _sigmoid(margins) * _sigmoid(-margins)
        hessian = np.empty((d + 1, d + 1))
        hessian[:d, :d] = C * (vectors.T * curv) @ vectors + np.eye(d)
        hessian[:d, d] = C * (vectors.T @ curv)
        hessian[d, :d] = hessian[:d, d]
        hessian[d, d] = C * float(np.sum(curv)) + 1e-12
        grad = np.concatenate([grad_w, [grad_b]])
        step = np.linalg.solve(hessian, grad)

        # backtracking Armijo line search on the full step
        descent = float(grad @ step)
        t = 1.0
        for _ in range(60):
            w_new = w - t * step[:d]
            b_new = b - t * step[d]
            loss_new, gw_new, gb_new = logistic_objective(
                w_new, b_new, vectors, signs, C
            )
            if loss_new <= loss - 1e-4 * t * descent:
                break
            t *= 0.5
        w, b, loss, grad_w, grad_b = w_new, b_new, loss_new, gw_new, gb_new
    grad_norm = float(np.sqrt(grad_w @ grad_w + grad_b * grad_b))
    if grad_norm <= tol:
        return w, b
    raise NoConvergenceError(
        f"logistic regression gradient norm {grad_norm:.3e} after "
        f"{max_iter} Newton iterations",
        iterations=max_iter,
        final_gradient_norm=grad_norm,
    )


def domain_mean(record: DomainRecord, tol=1e-10, max_iter=50) -> MeanEstimate:
    """Geometric mean over all of a domain's covariances."""
    return geometric_mean(record.covariances, tol=tol, max_iter=max_iter)


def domain_vectors(record: DomainRecord, align: str = "recenter") -> np.ndarray:
    """Tangent vectors of one domain, whitened by its mean when aligning.

    With ``align="recenter"`` the reference is the domain mean, which moves
    the domain to the identity; with ``align="none"`` logarithms are taken
    at the identity without whitening.
    """
    if align not in ALIGN_MODES:
        raise ValueError(f"unknown align mode {align!r}")
    stack = _stack(record.covariances)
    p = stack.shape[-1]
    if align == "recenter":
        if record.whitening_mean is None:
            raise ValueError(
                f"domain {record.domain_id} has no whitening mean; compute one "
                "or use align='none'"
            )
        inv_sqrt = spd_power(record.whitening_mean.values, -0.5)
        stack = inv_sqrt @ stack @ inv_sqrt
    logs = spd_log(stack)
    (rows, cols), weights = _upper_weights(p)
    return logs[:, rows, cols] * weights


def fit_pipeline(
    train,
    C: float = DEFAULT_C,
    align: str = "recenter",
    mean_tol: float = 1e-10,
    mean_max_iter: int = 50,
    channel_names=None,
) -> Classifier:
    """Fit the whiten -> tangent -> logistic pipeline on training domains.

    Records without a precomputed ``whitening_mean`` get one from all their
    covariances (the training-domain scope).
    """
    train = list(train)
    if not train:
        raise SingleClassError("no training domains")
    blocks = []
    label_blocks = []
    for record in sorted(train, key=lambda r: r.domain_id):
        if record.labels is None:
            raise ValueError(f"training domain {record.domain_id} has no labels")
        if align == "recenter" and record.whitening_mean is None:
            mean = domain_mean(record, tol=mean_tol, max_iter=mean_max_iter).mean
            record = DomainRecord(
                record.domain_id, record.covariances, record.labels,
                mean, "all_data",
            )
        blocks.append(domain_vectors(record, align))
        label_blocks.append(record.labels)
    vectors = np.concatenate(blocks)
    labels = np.concatenate(label_blocks)
    w, b = fit_logistic(vectors, labels, C=C)
    return Classifier(
        w, b, C, tuple(channel_names) if channel_names is not None else None
    )


def predict(
    clf: Classifier, target: DomainRecord, align: str = "recenter"
) -> tuple[np.ndarray, np.ndarray]:
    """Per-epoch labels and class-1 probabilities for a target domain.

    The target's whitening mean must come from a calibration scope, never
    from all of its data; labels on the record are ignored.
    """
    if align == "recenter" and target.mean_scope == "all_data":
        raise ValueError(
            "target whitening mean must be estimated from a calibration scope "
            "(first_session / first_run / first_half), not all_data"
        )
    vectors = domain_vectors(target, align)
    probs = clf.predict_proba(vectors)
    return (probs >= 0.5).astype(np.int64), probs


def no_alignment_variant(config):
    """Copy of a pipeline configuration with the re-center step removed."""
    try:
        from dataclasses import replace

        return replace(config, align="none")
    except TypeError:
        updated = dict(config)
        updated["align"] = "none"
        return updated
