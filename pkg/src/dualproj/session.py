"""Session engine: user edits on either scatterplot propagate to the matrix.

A session holds the data matrix plus one trained projection model per side
(rows and columns). Moving or scaling selected points on one side defines new
2-D targets; inverting the row-side model yields an updated matrix, the
column-side model re-projects the counterpart view, and closed-form diagonal
weights summarize how much each gene or hybrid had to change.
"""

import hashlib
import threading
from dataclasses import dataclass, field

import numpy as np

from .validation import check_matrix, check_same_shape

SIDES = ("rows", "cols")
SCALE_FACTOR_BOUNDS = (0.1, 10.0)
WEIGHT_DISPLAY_BOUNDS = (0.1, 10.0)


def dataset_fingerprint(X):
    """Content hash of a matrix: shape plus raw float64 bytes."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    h = hashlib.sha256()
    h.update(f"{X.shape[0]}x{X.shape[1]}:".encode())
    h.update(X.tobytes())
    return h.hexdigest()


def _ratio_weights(X, X_new, axis_spec):
    num = np.einsum(axis_spec, X, X_new)
    den = np.einsum(axis_spec, X, X)
    return np.where(den > 0.0, num / np.where(den > 0.0, den, 1.0), 1.0)


def gene_weights(X, X_new):
    """Per-column diagonal least squares: w_j minimizes ||X[:,j]*w - X_new[:,j]||.

    Closed form (X[:,j]. X_new[:,j]) / (X[:,j] . X[:,j]); an all-zero column
    has no constraint, so its weight stays 1.
    """
    X = check_matrix(X, "X", copy=False)
    X_new = check_matrix(X_new, "X_new", copy=False)
    check_same_shape(X, X_new)
    return _ratio_weights(X, X_new, "ij,ij->j")


def hybrid_weights(X, X_new):
    """Row-side analogue of gene_weights."""
    X = check_matrix(X, "X", copy=False)
    X_new = check_matrix(X_new, "X_new", copy=False)
    check_same_shape(X, X_new)
    return _ratio_weights(X, X_new, "ij,ij->i")


def display_weights(w):
    """Clamp raw weights to the glyph-sizing range; the session keeps raw values."""
    lo, hi = WEIGHT_DISPLAY_BOUNDS
    return np.clip(w, lo, hi)


@dataclass
class ModificationEvent:
    """One user edit: move or scale a selection on one side.

    ``center`` is "centroid" (of the selected points at apply time) or an
    explicit (x, y) pair; it only matters for scale events.
    """

    side: str
    indices: tuple
    kind: str
    delta: tuple = None
    factor: float = None
    center: object = "centroid"

    def __post_init__(self):
        if self.side not in SIDES:
            raise ValueError(f"side must be one of {SIDES}, got {self.side!r}")
        self.indices = tuple(int(i) for i in self.indices)
        if not self.indices:
            raise ValueError("selection is empty")
        if len(set(self.indices)) != len(self.indices):
            raise ValueError("selection contains duplicate indices")
        if any(i < 0 for i in self.indices):
            raise ValueError("selection indices must be non-negative")
        if self.kind == "move":
            if self.delta is None:
                raise ValueError("move event requires a delta")
            self.delta = (float(self.delta[0]), float(self.delta[1]))
            if not all(np.isfinite(self.delta)):
                raise ValueError("delta must be finite")
        elif self.kind == "scale":
            if self.factor is None:
                raise ValueError("scale event requires a factor")
            self.factor = float(self.factor)
            lo, hi = SCALE_FACTOR_BOUNDS
            if not (np.isfinite(self.factor) and lo <= self.factor <= hi):
                raise ValueError(f"scale factor must lie in [{lo}, {hi}], got {self.factor}")
            if self.center != "centroid":
                self.center = (float(self.center[0]), float(self.center[1]))
                if not all(np.isfinite(self.center)):
                    raise ValueError("center must be finite")
        else:
            raise ValueError(f"kind must be 'move' or 'scale', got {self.kind!r}")

    def to_dict(self):
        d = {"side": self.side, "indices": list(self.indices), "kind": self.kind}
        if self.kind == "move":
            d["delta"] = list(self.delta)
        else:
            d["factor"] = self.factor
            d["center"] = "centroid" if self.center == "centroid" else list(self.center)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(
            side=d["side"],
            indices=tuple(d["indices"]),
            kind=d["kind"],
            delta=tuple(d["delta"]) if d.get("delta") is not None else None,
            factor=d.get("factor"),
            center=d.get("center", "centroid")
            if d.get("center") in (None, "centroid")
            else tuple(d["center"]),
        )

    def transform(self, positions):
        """Apply this event to a full position array, returning a new array."""
        new = positions.copy()
        idx = list(self.indices)
        sel = new[idx]
        if self.kind == "move":
            if self.delta != (0.0, 0.0):
                sel = sel + np.asarray(self.delta)
        else:
            if self.factor != 1.0:
                center = (
                    sel.mean(axis=0) if self.center == "centroid" else np.asarray(self.center)
                )
                sel = center + self.factor * (sel - center)
        new[idx] = sel
        return new


class DualSession:
    """Linked row/column views of one matrix with modification history.

    Single-writer: ``lock`` serializes modifications; readers may snapshot
    concurrently. Replaying ``history`` from the original matrix reproduces
    the current one (inversion is deterministic given identical targets).

    Positions on each side are kept as a projected base plus a displacement
    ledger. Move events only touch the ledger, so a move followed by its
    negation cancels to exactly zero and the targets land back bit-for-bit;
    naive (pos + d) - d would round away low bits of pos. Scale events and
    counterpart refreshes rebase (new base, zero ledger).
    """

    def __init__(self, X, model_rows, model_cols):
        X = check_matrix(X, "X")
        n, d = X.shape
        if model_rows.input_dim != d:
            raise ValueError(
                f"row model expects {model_rows.input_dim} features, matrix has {d}"
            )
        if model_cols.input_dim != n:
            raise ValueError(
                f"column model expects {model_cols.input_dim} features, matrix has {n} rows"
            )
        self.model_rows = model_rows
        self.model_cols = model_cols
        self.X_orig = X.copy()
        self.X_cur = X.copy()
        self._s_base = model_rows.project(X)
        self._g_base = model_cols.project(X.T)
        self._s_off = np.zeros((n, 2))
        self._g_off = np.zeros((d, 2))
        self.w_genes = np.ones(d)
        self.w_hybrids = np.ones(n)
        self.history = []
        self.lock = threading.RLock()

    @property
    def S(self):
        return self._s_base + self._s_off

    @property
    def G(self):
        return self._g_base + self._g_off

    @property
    def n_hybrids(self):
        return self.X_cur.shape[0]

    @property
    def n_genes(self):
        return self.X_cur.shape[1]

    def _check_indices(self, event):
        limit = self.n_hybrids if event.side == "rows" else self.n_genes
        for i in event.indices:
            if i >= limit:
                raise IndexError(f"selection index {i} out of range for {event.side} (n={limit})")

    def _edited_positions(self, event, base, off):
        """New (base, offset) pair for the side the event touches."""
        if event.kind == "move":
            off = off.copy()
            off[list(event.indices)] += np.asarray(event.delta)
            return base, off
        new_base = event.transform(base + off)
        return new_base, np.zeros_like(off)

    def apply_modification(self, event: ModificationEvent):
        """Apply one edit: retarget positions, invert, refresh the other side."""
        with self.lock:
            self._check_indices(event)
            X_before = self.X_cur
            # Internal arrays are finite by construction, so the model calls and
            # weight refits below skip re-validation (it costs full passes over
            # the matrix, which dominates interactive latency at scale).
            if event.side == "rows":
                s_base, s_off = self._edited_positions(event, self._s_base, self._s_off)
                X_new = self.model_rows.inverse_project(s_base + s_off, check=False)
                g_base = self.model_cols.project(X_new.T, check=False)
                g_off = np.zeros_like(self._g_off)
                self.w_genes = _ratio_weights(X_before, X_new, "ij,ij->j")
            else:
                g_base, g_off = self._edited_positions(event, self._g_base, self._g_off)
                X_new = self.model_cols.inverse_project(g_base + g_off, check=False).T
                s_base = self.model_rows.project(X_new, check=False)
                s_off = np.zeros_like(self._s_off)
                self.w_hybrids = _ratio_weights(X_before, X_new, "ij,ij->i")
            self._s_base, self._s_off = s_base, s_off
            self._g_base, self._g_off = g_base, g_off
            self.X_cur = X_new
            self.history.append(event)
        return self

    def reset(self):
        """Back to the untouched matrix; embeddings recomputed, history cleared."""
        with self.lock:
            self.X_cur = self.X_orig.copy()
            self._s_base = self.model_rows.project(self.X_orig)
            self._g_base = self.model_cols.project(self.X_orig.T)
            self._s_off = np.zeros_like(self._s_off)
            self._g_off = np.zeros_like(self._g_off)
            self.w_genes = np.ones(self.n_genes)
            self.w_hybrids = np.ones(self.n_hybrids)
            self.history = []
        return self

    # ---- snapshots -----------------------------------------------------------

    def checkpoint_state(self):
        """In-memory state capture for timing harnesses and persistence."""
        return (
            self.X_cur.copy(),
            self._s_base.copy(),
            self._s_off.copy(),
            self._g_base.copy(),
            self._g_off.copy(),
            self.w_genes.copy(),
            self.w_hybrids.copy(),
            list(self.history),
        )

    def restore_state(self, state):
        with self.lock:
            x, s_base, s_off, g_base, g_off, w_g, w_h, history = state
            self.X_cur = x.copy()
            self._s_base = s_base.copy()
            self._s_off = s_off.copy()
            self._g_base = g_base.copy()
            self._g_off = g_off.copy()
            self.w_genes = w_g.copy()
            self.w_hybrids = w_h.copy()
            self.history = list(history)
        return self

    def snapshot(self):
        """JSON-ready view: embeddings, weights (per-event and cumulative), history."""
        with self.lock:
            return {
                "fingerprint": dataset_fingerprint(self.X_orig),
                "n_hybrids": self.n_hybrids,
                "n_genes": self.n_genes,
                "S": self.S.tolist(),
                "G": self.G.tolist(),
                "w_genes": self.w_genes.tolist(),
                "w_hybrids": self.w_hybrids.tolist(),
                "w_genes_vs_orig": gene_weights(self.X_orig, self.X_cur).tolist(),
                "w_hybrids_vs_orig": hybrid_weights(self.X_orig, self.X_cur).tolist(),
                "history": [e.to_dict() for e in self.history],
            }
