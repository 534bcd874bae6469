"""Embedding quality metrics (trustworthiness/continuity) and update timing."""

import csv
import json
import statistics
import time
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .validation import check_matrix


def _orders_and_ranks(A):
    """Neighbor order and 1-based ranks per row, ties broken by ascending index."""
    d = cdist(A, A, "sqeuclidean")
    np.fill_diagonal(d, np.inf)
    order = np.argsort(d, axis=1, kind="stable")  # stable sort keeps index order on ties
    n = A.shape[0]
    rank = np.empty((n, n), dtype=np.int64)
    rows = np.arange(n)[:, None]
    rank[rows, order] = np.arange(n)[None, :] + 1
    return order, rank


def _check_pair(X, Y, k):
    X = check_matrix(X, "X")
    Y = check_matrix(Y, "Y")
    if X.shape[0] != Y.shape[0]:
        raise ValueError(f"X and Y must have equal row counts, got {X.shape[0]} vs {Y.shape[0]}")
    n = X.shape[0]
    if k < 1 or 2 * k >= n:
        raise ValueError(f"k must satisfy 1 <= k < n/2 = {n / 2}, got {k}")
    return X, Y, n


def _penalty(rank_space, neighbor_order, other_order, k, n):
    """Sum of (rank - k) over points in the first k of one order but not the other."""
    rows = np.arange(n)[:, None]
    in_other = np.zeros((n, n), dtype=bool)
    in_other[rows, other_order[:, :k]] = True
    intruders = ~in_other[rows, neighbor_order[:, :k]]
    ranks = rank_space[rows, neighbor_order[:, :k]]
    return int(ranks[intruders].sum() - k * int(intruders.sum()))


def trustworthiness(X, Y, k):
    """1 minus the normalized rank penalty of false neighbors in the embedding.

    A point j that appears among i's k nearest in the embedding Y but not in
    the original space X is penalized by how far down i's true neighbor list
    it sits. 1.0 means no intruders at all.
    """
    X, Y, n = _check_pair(X, Y, k)
    order_x, rank_x = _orders_and_ranks(X)
    order_y, _ = _orders_and_ranks(Y)
    penalty = _penalty(rank_x, order_y, order_x, k, n)
    return 1.0 - 2.0 * penalty / (n * k * (2.0 * n - 3.0 * k - 1.0))


def continuity(X, Y, k):
    """Symmetric counterpart: penalizes true neighbors the embedding drops."""
    X, Y, n = _check_pair(X, Y, k)
    order_x, _ = _orders_and_ranks(X)
    order_y, rank_y = _orders_and_ranks(Y)
    penalty = _penalty(rank_y, order_x, order_y, k, n)
    return 1.0 - 2.0 * penalty / (n * k * (2.0 * n - 3.0 * k - 1.0))


def time_update(session, event, repeats=5):
    """Median wall-clock seconds to apply one modification to a warm session.

    Each repetition starts from the same session state; only the engine call
    is timed, never serialization or rendering.
    """
    if repeats < 1:
        raise ValueError("repeats must be at least 1")
    times = []
    for _ in range(repeats):
        state = session.checkpoint_state()
        t0 = time.perf_counter()
        session.apply_modification(event)
        times.append(time.perf_counter() - t0)
        session.restore_state(state)
    return float(statistics.median(times))


@dataclass
class MetricReport:
    """One method's scores on one dataset, keyed by neighborhood size."""

    method: str
    dataset: str
    T: dict
    C: dict
    update_seconds: float | None = None

    def __post_init__(self):
        for scores in (self.T, self.C):
            for k, v in scores.items():
                if not 0.0 <= v <= 1.0:
                    raise ValueError(f"metric value out of [0, 1] at k={k}: {v}")


def report_rows(reports):
    """Flatten reports to one row per (method, dataset, k)."""
    rows = []
    for rep in reports:
        for k in sorted(set(rep.T) | set(rep.C)):
            rows.append(
                {
                    "method": rep.method,
                    "dataset": rep.dataset,
                    "k": k,
                    "T": rep.T.get(k),
                    "C": rep.C.get(k),
                    "seconds": rep.update_seconds,
                }
            )
    return rows


REPORT_COLUMNS = ["method", "dataset", "k", "T", "C", "seconds"]


def write_report_csv(reports, path):
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=REPORT_COLUMNS)
        writer.writeheader()
        for row in report_rows(reports):
            writer.writerow({col: ("" if row[col] is None else row[col]) for col in REPORT_COLUMNS})


def write_report_json(reports, path):
    with open(path, "w") as f:
        json.dump(report_rows(reports), f, indent=2)
        f.write("\n")
