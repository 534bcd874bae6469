"""Reference projectors the dual projection is benchmarked against.

PCA and exact t-SNE are single-view baselines. The reweighting pipeline
(stress-majorized MDS plus a diagonal weight fit to modified positions) is
the dual-view baseline: it answers the same "update X to match moved points"
question, but by optimization rather than by inverting a trained model.
"""

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist
from sklearn.base import BaseEstimator, TransformerMixin

from .validation import check_fitted, check_matrix


@dataclass
class StressState:
    """Terminal state of a majorization run: iterate, objective, trace."""

    values: np.ndarray
    stress: float
    iteration: int
    history: list = field(default_factory=list)


def _sq_dists(A, B=None):
    """Fast gram-trick squared distances; fine away from coincident points."""
    B = A if B is None else B
    sa = np.einsum("ij,ij->i", A, A)
    sb = sa if B is A else np.einsum("ij,ij->i", B, B)
    d = sa[:, None] + sb[None, :] - 2.0 * (A @ B.T)
    np.maximum(d, 0.0, out=d)
    return d


# ---- PCA ------------------------------------------------------------------------


def _pca_fit(X, dims):
    mean = X.mean(axis=0)
    _, _, Vt = np.linalg.svd(X - mean, full_matrices=False)
    comps = Vt[:dims].copy()
    # Deterministic orientation: the largest-magnitude loading points positive.
    for comp in comps:
        if comp[np.argmax(np.abs(comp))] < 0:
            comp *= -1.0
    return mean, comps


def pca_project(X, dims=2):
    """Project rows onto the top principal components of the centered matrix."""
    X = check_matrix(X, "X")
    if dims < 1 or dims > min(X.shape):
        raise ValueError(f"dims must lie in [1, {min(X.shape)}], got {dims}")
    mean, comps = _pca_fit(X, dims)
    return (X - mean) @ comps.T


class PCAProjection(BaseEstimator, TransformerMixin):
    """Estimator wrapper so PCA plugs into the same benchmark harness."""

    def __init__(self, dims=2):
        self.dims = dims

    def fit(self, X, y=None):
        X = check_matrix(X, "X")
        if self.dims < 1 or self.dims > min(X.shape):
            raise ValueError(f"dims must lie in [1, {min(X.shape)}]")
        self.mean_, self.components_ = _pca_fit(X, self.dims)
        return self

    def transform(self, X):
        check_fitted(self, "components_")
        X = check_matrix(X, "X")
        return (X - self.mean_) @ self.components_.T

    def inverse_transform(self, Y):
        check_fitted(self, "components_")
        Y = check_matrix(Y, "Y")
        return Y @ self.components_ + self.mean_


# ---- exact t-SNE ----------------------------------------------------------------


def tsne_conditional_p(X, perplexity):
    """Per-row conditional affinities with the bandwidth searched per point.

    Each row i gets its own Gaussian precision, binary-searched until the
    distribution's entropy (base 2) matches log2(perplexity).
    """
    X = check_matrix(X, "X")
    n = X.shape[0]
    if not 5.0 <= perplexity <= (n - 1) / 3.0:
        raise ValueError(
            f"perplexity must lie in [5, (n-1)/3] = [5, {(n - 1) / 3:.1f}], got {perplexity}"
        )
    D2 = _sq_dists(X)
    target = np.log2(perplexity)
    P = np.zeros((n, n))
    keep = ~np.eye(n, dtype=bool)
    for i in range(n):
        d2 = D2[i][keep[i]]
        lo, hi = 0.0, np.inf
        beta = 1.0
        for _ in range(64):
            w = np.exp(-beta * (d2 - d2.min()))
            sw = w.sum()
            p = w / sw
            nz = p > 0
            entropy = -(p[nz] * np.log2(p[nz])).sum()
            if abs(entropy - target) < 1e-6:
                break
            if entropy > target:
                lo = beta
                beta = beta * 2.0 if hi == np.inf else (beta + hi) / 2.0
            else:
                hi = beta
                beta = (lo + beta) / 2.0
        P[i][keep[i]] = p
    return P


def tsne_project(X, perplexity=30.0, iters=500, seed=0, learning_rate=200.0):
    """Exact (all-pairs) t-SNE with early exaggeration, momentum, and gains."""
    X = check_matrix(X, "X")
    n = X.shape[0]
    Pc = tsne_conditional_p(X, perplexity)
    P = (Pc + Pc.T) / (2.0 * n)
    P = np.maximum(P, 1e-12)

    rng = np.random.default_rng(seed)
    Y = 1e-4 * rng.standard_normal((n, 2))
    update = np.zeros_like(Y)
    gains = np.ones_like(Y)
    exaggeration_until = min(250, max(1, iters // 2))

    for it in range(iters):
        Peff = P * 12.0 if it < exaggeration_until else P
        num = 1.0 / (1.0 + _sq_dists(Y))
        np.fill_diagonal(num, 0.0)
        Q = np.maximum(num / num.sum(), 1e-12)
        PQ = (Peff - Q) * num
        grad = 4.0 * (np.diag(PQ.sum(axis=1)) - PQ) @ Y

        momentum = 0.5 if it < exaggeration_until else 0.8
        gains = np.where(np.sign(grad) != np.sign(update), gains + 0.2, gains * 0.8)
        np.maximum(gains, 0.01, out=gains)
        update = momentum * update - learning_rate * gains * grad
        Y = Y + update
        Y -= Y.mean(axis=0)
    return Y


# ---- SMACOF MDS -----------------------------------------------------------------


def mds_smacof(X, iters=300, seed=0, tol=1e-7, return_state=False):
    """2-D positions minimizing raw stress against input-space distances.

    Starts from PCA and applies Guttman transforms, which never increase the
    stress; stops early when the relative improvement drops below ``tol``.
    """
    X = check_matrix(X, "X")
    n = X.shape[0]
    if n < 3:
        raise ValueError(f"need at least 3 rows, got {n}")
    # Majorization needs accurate ratios for nearly coincident points, so use
    # direct per-pair distances rather than the cancellation-prone gram trick.
    D = cdist(X, X)
    Y = pca_project(X, dims=min(2, min(X.shape)))
    if Y.shape[1] < 2:
        Y = np.column_stack([Y, np.zeros(n)])
    if np.abs(Y - Y.mean(axis=0)).max() < 1e-12:
        # Fully degenerate start (identical rows): break the tie randomly.
        Y = Y + 1e-6 * np.random.default_rng(seed).standard_normal(Y.shape)

    triu = np.triu_indices(n, k=1)
    history = []
    for it in range(iters):
        dY = cdist(Y, Y)
        stress = float(((dY[triu] - D[triu]) ** 2).sum())
        history.append(stress)
        if len(history) > 1:
            prev = history[-2]
            if prev == 0.0 or (prev - stress) / max(prev, 1e-30) < tol:
                break
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(dY > 0.0, D / dY, 0.0)
        B = -ratio
        B[np.arange(n), np.arange(n)] = ratio.sum(axis=1)
        Y = (B @ Y) / n

    dY = cdist(Y, Y)
    final = float(((dY[triu] - D[triu]) ** 2).sum())
    history.append(final)
    if not return_state:
        return Y
    return Y, StressState(values=Y, stress=final, iteration=len(history) - 1, history=history)


# ---- diagonal reweighting -------------------------------------------------------

EPS_DIST = 1e-12


def _eps_dists(A):
    return np.sqrt(cdist(A, A, "sqeuclidean") + EPS_DIST)


def _reweight_objective(X, w, D_target, triu):
    Dw = _eps_dists(X * w)
    return float(((Dw[triu] - D_target[triu]) ** 2).sum())


def sirius_reweight(X, S_target, iters=100, return_state=False):
    """Diagonal column weights matching X's weighted distances to target ones.

    Minimizes sum_ij (||(x_i - x_j) W|| - ||s'_i - s'_j||)^2 over diagonal W by
    majorization from W = I; each step is closed-form and never increases the
    objective. A small constant inside every square root guards zero distances,
    applied identically in the update and the reported objective.
    """
    X = check_matrix(X, "X")
    S = check_matrix(S_target, "S_target")
    if S.shape[0] != X.shape[0]:
        raise ValueError(
            f"S_target must have one row per row of X, got {S.shape[0]} vs {X.shape[0]}"
        )
    n, d = X.shape
    triu = np.triu_indices(n, k=1)
    D_target = _eps_dists(S)

    X2 = X * X
    col_sq = X2.sum(axis=0)
    col_sum = X.sum(axis=0)
    denom = 2.0 * n * col_sq - 2.0 * col_sum**2  # sum_ij (x_ik - x_jk)^2

    w = np.ones(d)
    history = [_reweight_objective(X, w, D_target, triu)]
    for _ in range(iters):
        Dw = _eps_dists(X * w)
        R = D_target / Dw
        rowsum = R.sum(axis=1)
        numer = 2.0 * (rowsum @ X2 - np.einsum("ik,ik->k", X, R @ X))
        w = np.where(denom > 0.0, w * numer / np.where(denom > 0.0, denom, 1.0), w)
        history.append(_reweight_objective(X, w, D_target, triu))

    if not return_state:
        return w
    return w, StressState(values=w, stress=history[-1], iteration=len(history) - 1, history=history)


@dataclass
class ReweightUpdate:
    """Full baseline update: reweighted matrix, column embedding, timing."""

    x_new: np.ndarray
    genes: np.ndarray | None
    weights: np.ndarray
    stress: float
    elapsed_seconds: float


def sirius_dual_update(X, S_target, iters=30, embed_cols=True, col_iters=300, seed=0):
    """Run the reweighting pipeline end to end and record wall time."""
    X = check_matrix(X, "X")
    t0 = time.perf_counter()
    w, state = sirius_reweight(X, S_target, iters=iters, return_state=True)
    x_new = X * w
    genes = mds_smacof(x_new.T, iters=col_iters, seed=seed) if embed_cols else None
    elapsed = time.perf_counter() - t0
    return ReweightUpdate(
        x_new=x_new, genes=genes, weights=w, stress=state.stress, elapsed_seconds=elapsed
    )
