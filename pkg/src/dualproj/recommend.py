"""Cross recommendation: feasible-candidate filtering and subset selection.

Candidates are all paternal x maternal crosses that are not already
cultivated, whose parents are genetically far enough apart, and whose
predicted trait score clears a threshold. Among those, a small
representative set is chosen by minimizing facility-location cost plus a
per-representative penalty gamma, either with an ADMM relaxation over a
column-stochastic assignment matrix or with a greedy oracle.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .genomics import homozygous_alleles

DEFAULT_MAX_POOL = 50000
SCORE_SPECS = ("normalized_sum", "sum")


@dataclass
class RecommendationConfig:
    """Constraint and objective knobs for one recommendation run.

    ``cultivated`` holds (paternal id, maternal id) pairs that already
    exist; ``epsilon`` defaults to the mean parent distance over those
    pairs, so new crosses must be at least as outbred as the norm.
    """

    K: int
    gamma: float = None
    epsilon: float = None
    beta: float = None
    score_spec: str = "normalized_sum"
    cultivated: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        self.K = int(self.K)
        if self.K < 1:
            raise ValueError(f"K must be at least 1, got {self.K}")
        if self.gamma is not None and not (np.isfinite(self.gamma) and self.gamma >= 0):
            raise ValueError("gamma must be finite and non-negative")
        if self.epsilon is not None and not (np.isfinite(self.epsilon) and self.epsilon >= 0):
            raise ValueError("epsilon must be finite and non-negative")
        if self.score_spec not in SCORE_SPECS:
            raise ValueError(f"score_spec must be one of {SCORE_SPECS}")
        self.cultivated = frozenset((str(p), str(m)) for p, m in self.cultivated)


@dataclass
class Candidate:
    paternal: str
    maternal: str
    genotype: np.ndarray
    traits: np.ndarray
    score: float


@dataclass
class CandidatePool:
    """Feasible crosses plus their pairwise genomic distance matrix."""

    candidates: list
    D: np.ndarray

    def __post_init__(self):
        self.D = np.asarray(self.D, dtype=np.float64)
        n = len(self.candidates)
        if self.D.shape != (n, n):
            raise ValueError(f"distance matrix shape {self.D.shape} for {n} candidates")
        if n and (not np.allclose(self.D, self.D.T) or np.abs(np.diag(self.D)).max() > 0):
            raise ValueError("distance matrix must be symmetric with zero diagonal")

    def __len__(self):
        return len(self.candidates)

    @property
    def empty(self):
        return len(self.candidates) == 0


def _scores(predictor, traits, spec):
    if spec == "sum":
        return traits.sum(axis=1)
    return predictor.standardize(traits).sum(axis=1)


def _pairwise_hamming(G, chunk=128):
    n = G.shape[0]
    D = np.zeros((n, n))
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        D[lo:hi] = (G[lo:hi, None, :] != G[None, :, :]).sum(axis=2)
    return D


def build_candidates(R, T, config, predictor, reference, max_pool=DEFAULT_MAX_POOL):
    """Synthesize and filter all R x T crosses, then materialize the pool.

    Crosses are generated and filtered one paternal line at a time, so only
    feasible candidates are ever held in memory; if even those exceed
    ``max_pool``, the best-scoring ``max_pool`` are kept. An infeasible
    grid yields an empty pool, never an exception.
    """
    ref = homozygous_alleles(reference)
    d = len(ref)
    pat = np.stack([homozygous_alleles(r) for r in R]) if R else np.empty((0, d), "<U1")
    mat = np.stack([homozygous_alleles(t) for t in T]) if T else np.empty((0, d), "<U1")
    for lines, arr in ((R, pat), (T, mat)):
        for line, row in zip(lines, arr):
            if len(row) != d:
                raise ValueError(f"line {line.id} covers {len(row)} loci, expected {d}")

    epsilon = config.epsilon
    if epsilon is None:
        by_id = {r.id: row for r, row in zip(R, pat)}
        by_id.update({t.id: row for t, row in zip(T, mat)})
        dists = [
            (by_id[p] != by_id[m]).sum()
            for p, m in sorted(config.cultivated)
            if p in by_id and m in by_id
        ]
        epsilon = float(np.mean(dists)) if dists else 0.0

    candidates = []
    for i, r in enumerate(R):
        far = (pat[i][None, :] != mat).sum(axis=1) > epsilon
        fresh = np.array([(r.id, t.id) not in config.cultivated for t in T], dtype=bool)
        keep = np.flatnonzero(far & fresh)
        if keep.size == 0:
            continue
        # Homozygous F1 encoding: matching alleles give 0 (reference) or 2,
        # differing alleles give a heterozygous 1.
        eq = pat[i][None, :] == mat[keep]
        geno = np.where(eq, np.where(pat[i][None, :] == ref[None, :], 0, 2), 1)
        traits = np.atleast_2d(predictor.predict(geno))
        scores = _scores(predictor, traits, config.score_spec)
        good = np.ones(keep.size, dtype=bool) if config.beta is None else scores > config.beta
        for j, t_idx in enumerate(keep):
            if good[j]:
                candidates.append(
                    Candidate(
                        paternal=r.id,
                        maternal=T[t_idx].id,
                        genotype=geno[j].astype(np.int64),
                        traits=traits[j],
                        score=float(scores[j]),
                    )
                )

    if len(candidates) > max_pool:
        order = np.argsort([-c.score for c in candidates], kind="stable")[:max_pool]
        candidates = [candidates[i] for i in sorted(order)]

    if not candidates:
        return CandidatePool(candidates=[], D=np.zeros((0, 0)))
    G = np.stack([c.genotype for c in candidates])
    return CandidatePool(candidates=candidates, D=_pairwise_hamming(G))


def derive_gamma(D, K):
    """Representative penalty sized so roughly K representatives pay off."""
    D = np.asarray(D)
    if D.size == 0:
        raise ValueError("cannot derive gamma from an empty pool")
    return float(D.max() / K)


def objective_value(D, selected, gamma):
    """Facility-location cost: assignment distances plus gamma per representative."""
    if len(selected) == 0:
        return float("inf")
    idx = sorted(int(i) for i in selected)
    return float(D[idx].min(axis=0).sum() + gamma * len(idx))


# ---- solvers -----------------------------------------------------------------------


def _project_columns_simplex(V):
    """Euclidean projection of every column onto the probability simplex."""
    n = V.shape[0]
    U = -np.sort(-V, axis=0)
    css = np.cumsum(U, axis=0) - 1.0
    k = np.arange(1, n + 1)[:, None]
    rho = np.count_nonzero(U - css / k > 0, axis=0)
    theta = css[rho - 1, np.arange(V.shape[1])] / rho
    return np.maximum(V - theta[None, :], 0.0)


def _project_rows_l1(V, radius):
    """Euclidean projection of every row onto the l1 ball of given radius."""
    if radius <= 0.0:
        return np.zeros_like(V)
    A = np.abs(V)
    out = V.copy()
    over = A.sum(axis=1) > radius
    if not over.any():
        return out
    Ao = A[over]
    U = -np.sort(-Ao, axis=1)
    css = np.cumsum(U, axis=1) - radius
    k = np.arange(1, U.shape[1] + 1)[None, :]
    rho = np.count_nonzero(U - css / k > 0, axis=1)
    theta = css[np.arange(len(rho)), rho - 1] / rho
    out[over] = np.sign(V[over]) * np.maximum(Ao - theta[:, None], 0.0)
    return out


def select_admm(pool, gamma, iters=500, rho=1.0, threshold=0.5, tol=1e-6):
    """ADMM relaxation of representative selection.

    Splits the column-stochastic constraint (handled by a per-column simplex
    projection) from the row-wise l-infinity penalty (handled by its prox, a
    Moreau complement of l1-ball projection with radius gamma/rho). Returns
    (selected indices, converged flag); rows whose relaxed assignment weight
    clears ``threshold`` are the representatives, falling back to the single
    strongest row when rounding clears none. A deterministic add/drop descent
    then cleans up rounding artifacts: the relaxation routinely leaves a row
    just under threshold even when adding it would more than pay its gamma.
    """
    n = len(pool)
    if n == 0:
        raise ValueError("cannot select from an empty pool")
    D = pool.D
    C = np.full((n, n), 1.0 / n)
    Z = C.copy()
    dual = np.zeros((n, n))
    converged = False
    for _ in range(int(iters)):
        C = _project_columns_simplex(Z - dual - D / rho)
        V = C + dual
        Z_new = V - _project_rows_l1(V, gamma / rho)
        dual += C - Z_new
        primal = np.abs(C - Z_new).max()
        shift = np.abs(Z_new - Z).max()
        Z = Z_new
        if primal < tol and shift < tol:
            converged = True
            break
    if not converged:
        warnings.warn("representative selection stopped before convergence")
    strength = np.abs(Z).max(axis=1)
    selected = np.flatnonzero(strength > threshold)
    if selected.size == 0:
        selected = np.array([int(np.argmax(strength))])
    return _polish(D, sorted(int(i) for i in selected), gamma), converged


def _polish(D, selected, gamma):
    """Local add/drop descent on the rounded set; ties go to the lowest index."""
    chosen = list(selected)
    assign = D[chosen].min(axis=0)
    while True:
        saving = np.maximum(assign[None, :] - D, 0.0).sum(axis=1)
        saving[chosen] = 0.0
        best_add = int(np.argmax(saving))
        if saving[best_add] > gamma + 1e-12:
            chosen.append(best_add)
            chosen.sort()
            np.minimum(assign, D[best_add], out=assign)
            continue
        if len(chosen) > 1:
            current = assign.sum() + gamma * len(chosen)
            for j in list(chosen):
                rest = [i for i in chosen if i != j]
                cost = D[rest].min(axis=0).sum() + gamma * len(rest)
                if cost < current - 1e-12:
                    chosen = rest
                    assign = D[chosen].min(axis=0)
                    break
            else:
                return chosen
            continue
        return chosen


def select_greedy(pool, gamma):
    """Add whichever candidate lowers the objective most; stop at no gain.

    Ties in marginal gain go to the lowest candidate index.
    """
    n = len(pool)
    if n == 0:
        return []
    D = pool.D
    selected = []
    best = np.full(n, np.inf)
    current = np.inf
    while True:
        choice, choice_obj = None, current
        for i in range(n):
            if i in selected:
                continue
            cand = np.minimum(best, D[i]).sum() + gamma * (len(selected) + 1)
            if cand < choice_obj - 1e-12:
                choice, choice_obj = i, cand
        if choice is None:
            return selected
        selected.append(choice)
        selected.sort()
        best = np.minimum(best, D[choice])
        current = choice_obj


def selection_result(pool, selected, gamma, converged):
    """JSON-ready summary of one selection run."""
    return {
        "selected": [
            {
                "paternal": pool.candidates[i].paternal,
                "maternal": pool.candidates[i].maternal,
                "score": pool.candidates[i].score,
                "predicted_traits": [float(v) for v in pool.candidates[i].traits],
            }
            for i in selected
        ],
        "objective": 0.0 if not selected else objective_value(pool.D, selected, gamma),
        "gamma": gamma,
        "converged": bool(converged),
    }


def recommend(R, T, config, predictor, reference, iters=500, rho=1.0, max_pool=DEFAULT_MAX_POOL):
    """End-to-end: build the pool, derive gamma if needed, select, summarize."""
    pool = build_candidates(R, T, config, predictor, reference, max_pool=max_pool)
    if pool.empty:
        return pool, {"selected": [], "objective": 0.0, "gamma": config.gamma, "converged": True}
    gamma = config.gamma if config.gamma is not None else derive_gamma(pool.D, config.K)
    selected, converged = select_admm(pool, gamma, iters=iters, rho=rho)
    return pool, selection_result(pool, selected, gamma, converged)
