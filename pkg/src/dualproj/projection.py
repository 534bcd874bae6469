"""Parametric projection: autoencoder wrapped around an invertible stack.

The encoder compresses rows into a latent vector, the invertible stack maps
the latent to a 2-D position y plus an auxiliary remainder phi, and the
decoder reconstructs rows from latents. Because the stack is exactly
invertible, moving a point's y and estimating phi from trained neighbors
yields an updated row via one backward pass instead of an optimization.
"""

import io
import json
from dataclasses import asdict, dataclass

import numpy as np
from scipy.spatial import cKDTree
from sklearn.base import BaseEstimator

from .flow import InvertibleStack
from .nn import MLP, AdamW, TrainingError, cosine_lr
from .validation import check_fitted, check_matrix

CHECKPOINT_FORMAT = "dualproj-projection-v1"


@dataclass(frozen=True)
class TrainConfig:
    hidden_dim: int = 64
    batch_size: int | None = None  # None -> max(2, n // 10)
    lr: float = 0.01
    epochs: int = 1000
    tau: float = 0.15
    lam: float = 0.1
    knn_positive_k: int = 10
    phi_k: int = 10
    weight_decay: float = 1e-4
    clamp: float = 5.0
    seed: int = 0

    def __post_init__(self):
        if self.hidden_dim < 4:
            raise ValueError("hidden_dim must be at least 4")
        if self.batch_size is not None and self.batch_size < 2:
            raise ValueError("batch_size must be at least 2")
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.lam < 0:
            raise ValueError("lam must be non-negative")
        if self.knn_positive_k < 1:
            raise ValueError("knn_positive_k must be at least 1")


def knn_indices(X, k, chunk=512):
    """Indices of each row's k nearest rows (self excluded), computed in chunks."""
    n = X.shape[0]
    if k >= n:
        raise ValueError(f"k={k} requires more than k+1 rows, got {n}")
    sq = np.einsum("ij,ij->i", X, X)
    out = np.empty((n, k), dtype=np.int64)
    for start in range(0, n, chunk):
        end = min(start + chunk, n)
        d = sq[start:end, None] + sq[None, :] - 2.0 * (X[start:end] @ X.T)
        d[np.arange(end - start), np.arange(start, end)] = np.inf
        out[start:end] = np.argpartition(d, k - 1, axis=1)[:, :k]
    return out


def infonce_loss_and_grad(y, tau):
    """Contrastive loss over a [anchors; positives] batch and its gradient in y.

    Entry i's positive sits at i+B (and symmetrically i-B); similarity is the
    negative squared distance between 2-D outputs divided by tau. Returns the
    mean loss and dL/dy.
    """
    m = y.shape[0]
    if m < 4 or m % 2:
        raise ValueError("batch must hold an even number (>= 4) of rows")
    b = m // 2
    sq = np.einsum("ij,ij->i", y, y)
    dist = sq[:, None] + sq[None, :] - 2.0 * (y @ y.T)
    np.maximum(dist, 0.0, out=dist)
    scores = -dist / tau
    np.fill_diagonal(scores, -np.inf)
    pos = np.concatenate([np.arange(b) + b, np.arange(b)])
    row_max = scores.max(axis=1)
    exps = np.exp(scores - row_max[:, None])
    denom = exps.sum(axis=1)
    losses = np.log(denom) + row_max - scores[np.arange(m), pos]
    grad_scores = exps / denom[:, None]
    grad_scores[np.arange(m), pos] -= 1.0
    grad_scores /= m
    sym = grad_scores + grad_scores.T
    grad_y = (-2.0 / tau) * (sym.sum(axis=1)[:, None] * y - sym @ y)
    return losses.mean(), grad_y


class ProjectionModel:
    """Trained parameters plus the stored (y, phi) table of the training rows."""

    def __init__(self, config: TrainConfig, input_dim: int, rng):
        h = config.hidden_dim
        self.config = config
        self.input_dim = input_dim
        self.encoder = MLP([input_dim, h, h, h, h], rng, name="enc")
        self.decoder = MLP([h, h, h, h, input_dim], rng, name="dec")
        self.inn = InvertibleStack(h, h, rng, clamp=config.clamp)
        self.mu = np.zeros(input_dim)
        self.sigma = np.ones(input_dim)
        self.train_y = None
        self.train_phi = None
        self.z_lo = None
        self.z_hi = None
        self._tree = None

    # ---- forward / inverse paths -------------------------------------------------

    def _standardize(self, X):
        out = X - self.mu
        out /= self.sigma
        return out

    def _unstandardize(self, Xs):
        out = Xs * self.sigma
        out += self.mu
        return out

    def latent(self, X, training=False):
        return self.encoder.forward(self._standardize(X), training=training)

    def _encode_fast(self, X):
        """Inference encoding with standardization folded into the first layer.

        Large inputs then cost one matmul instead of matmul plus two full
        elementwise passes, and X may be any layout (a transposed view is
        handled by BLAS without an explicit copy).
        """
        b0 = self.encoder.blocks[0]
        w0 = b0.linear.weight.value / self.sigma[:, None]
        h = X @ w0
        h += b0.linear.bias.value - (self.mu / self.sigma) @ b0.linear.weight.value
        if b0.norm is not None:
            h = b0.norm.forward(h)
        if b0.activation == "relu":
            np.maximum(h, 0.0, out=h)
        for block in self.encoder.blocks[1:]:
            h = block.forward(h)
        return h

    def _decode_fast(self, z):
        """Inference decoding with unit restoration folded into the last layer."""
        blocks = self.decoder.blocks
        h = z
        for block in blocks[:-1]:
            h = block.forward(h)
        last = blocks[-1].linear
        out = h @ (last.weight.value * self.sigma[None, :])
        out += last.bias.value * self.sigma + self.mu
        return out

    def project_full(self, X, check=True):
        """(y, phi) of every row in inference mode."""
        if check:
            X = check_matrix(X, "rows", copy=False)
        if X.shape[1] != self.input_dim:
            raise ValueError(f"rows have {X.shape[1]} features, model expects {self.input_dim}")
        a = self.inn.forward(self._encode_fast(X))
        return a[:, :2], a[:, 2:]

    def project(self, X, check=True):
        return self.project_full(X, check=check)[0]

    def reconstruct(self, X):
        """Autoencoder round trip in the row's original units."""
        X = check_matrix(X, "rows", copy=False)
        return self._decode_fast(self._encode_fast(X))

    def estimate_phi(self, y_new, k=None):
        """Inverse-distance weighted phi of the k nearest stored embeddings.

        An exact hit on a stored y returns that row's phi directly.
        """
        if self.train_y is None:
            raise RuntimeError("model has no stored training embeddings")
        k = self.config.phi_k if k is None else k
        if k < 1:
            raise ValueError("k must be at least 1")
        y_new = check_matrix(np.atleast_2d(y_new), "y_new", copy=False)
        k = min(k, self.train_y.shape[0])
        dist, idx = self._tree.query(y_new, k=k)
        if k == 1:
            dist = dist[:, None]
            idx = idx[:, None]
        phi = np.empty((y_new.shape[0], self.train_phi.shape[1]))
        exact = dist[:, 0] == 0.0
        if np.any(exact):
            # Lowest stored index among each row's zero-distance ties; the
            # sentinel n never wins because column 0 is already a zero hit.
            n = self.train_y.shape[0]
            tied = np.where(dist[exact] == 0.0, idx[exact], n)
            phi[exact] = self.train_phi[tied.min(axis=1)]
        rest = ~exact
        if np.any(rest):
            w = 1.0 / dist[rest]
            phi[rest] = (w[:, :, None] * self.train_phi[idx[rest]]).sum(axis=1) / w.sum(axis=1)[:, None]
        return phi

    def inverse_project(self, targets, k=None, check=True):
        """Rows whose projection equals ``targets``: phi-estimate, invert, decode.

        Inverted latents are clamped to the (slightly inflated) bounding box of
        the training latents before decoding. Targets on the data manifold are
        unaffected; a target dragged into empty canvas would otherwise send the
        coupling nets far outside anything they saw in training, and the decoded
        row explodes by orders of magnitude.
        """
        if check:
            targets = check_matrix(targets, "targets", copy=False)
        if targets.shape[1] != 2:
            raise ValueError("targets must be n x 2 positions")
        phi = self.estimate_phi(targets, k=k)
        z = self.inn.inverse(np.concatenate([targets, phi], axis=1))
        if self.z_lo is not None:
            np.clip(z, self.z_lo, self.z_hi, out=z)
        return self._decode_fast(z)

    # ---- persistence ---------------------------------------------------------------

    def _bn_modules(self):
        blocks = list(self.encoder.blocks) + list(self.decoder.blocks)
        for layer in self.inn.layers:
            for mlp in (layer.t1, layer.s, layer.t2):
                blocks.extend(mlp.blocks)
        for block in blocks:
            if block.norm is not None:
                base = block.norm.gamma.name.rsplit(".gamma", 1)[0]
                yield base, block.norm

    def parameters(self):
        return self.encoder.parameters() + self.decoder.parameters() + self.inn.parameters()

    def state_dict(self):
        state = {f"p:{p.name}": p.value for p in self.parameters()}
        for base, bn in self._bn_modules():
            state[f"rm:{base}"] = bn.running_mean
            state[f"rv:{base}"] = bn.running_var
        for i, perm in enumerate(self.inn.perms):
            state[f"perm:{i}"] = perm.perm
        state["mu"] = self.mu
        state["sigma"] = self.sigma
        if self.train_y is not None:
            state["train_y"] = self.train_y
            state["train_phi"] = self.train_phi
        if self.z_lo is not None:
            state["z_lo"] = self.z_lo
            state["z_hi"] = self.z_hi
        return state

    def load_state_dict(self, state):
        for p in self.parameters():
            p.value[...] = state[f"p:{p.name}"]
        for base, bn in self._bn_modules():
            bn.running_mean[...] = state[f"rm:{base}"]
            bn.running_var[...] = state[f"rv:{base}"]
        for i, perm in enumerate(self.inn.perms):
            perm.perm = np.asarray(state[f"perm:{i}"], dtype=np.int64)
            perm.inv_perm = np.argsort(perm.perm)
        self.mu = np.asarray(state["mu"])
        self.sigma = np.asarray(state["sigma"])
        if "train_y" in state:
            self.train_y = np.asarray(state["train_y"])
            self.train_phi = np.asarray(state["train_phi"])
            self._tree = cKDTree(self.train_y)
        if "z_lo" in state:
            self.z_lo = np.asarray(state["z_lo"])
            self.z_hi = np.asarray(state["z_hi"])

    def save(self, path):
        meta = {
            "format": CHECKPOINT_FORMAT,
            "input_dim": self.input_dim,
            "config": asdict(self.config),
        }
        buf = io.BytesIO()
        np.savez(buf, meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8),
                 **self.state_dict())
        with open(path, "wb") as f:
            f.write(buf.getvalue())

    @classmethod
    def load(cls, path):
        with np.load(path) as data:
            meta = json.loads(bytes(data["meta"]).decode())
            if meta.get("format") != CHECKPOINT_FORMAT:
                raise ValueError(f"not a projection checkpoint: {path}")
            state = {k: data[k] for k in data.files if k != "meta"}
        config = TrainConfig(**meta["config"])
        model = cls(config, meta["input_dim"], np.random.default_rng(0))
        model.load_state_dict(state)
        return model


def train_projection(X, config: TrainConfig):
    """Fit a ProjectionModel on the rows of X. Returns (model, loss_history)."""
    X = check_matrix(X, "X")
    n = X.shape[0]
    if n < 2 * config.knn_positive_k:
        raise ValueError(
            f"need at least {2 * config.knn_positive_k} rows to sample positives, got {n}"
        )
    rng = np.random.default_rng(config.seed)
    model = ProjectionModel(config, X.shape[1], rng)

    mu = X.mean(axis=0)
    sigma = X.std(axis=0)
    sigma[sigma == 0.0] = 1.0
    model.mu, model.sigma = mu, sigma
    Xs = (X - mu) / sigma

    neighbors = knn_indices(Xs, config.knn_positive_k)
    batch = config.batch_size or max(2, n // 10)
    batch = min(batch, n)
    opt = AdamW(model.parameters(), lr=config.lr, weight_decay=config.weight_decay)

    loss_history = []
    for epoch in range(config.epochs):
        opt.lr = cosine_lr(config.lr, epoch, config.epochs)
        order = rng.permutation(n)
        epoch_loss = 0.0
        steps = 0
        for start in range(0, n, batch):
            anchors = order[start : start + batch]
            if anchors.size < 2:
                continue
            pos = neighbors[anchors, rng.integers(0, config.knn_positive_k, size=anchors.size)]
            xb = Xs[np.concatenate([anchors, pos])]

            z = model.encoder.forward(xb, training=True)
            a = model.inn.forward(z, training=True)
            l_proj, grad_y = infonce_loss_and_grad(a[:, :2], config.tau)
            grad_a = np.zeros_like(a)
            grad_a[:, :2] = grad_y
            grad_z = model.inn.backward(grad_a)

            loss = l_proj
            if config.lam > 0:
                xhat = model.decoder.forward(z, training=True)
                resid = xhat - xb
                loss += config.lam * (resid * resid).sum() / xb.shape[0]
                grad_z = grad_z + model.decoder.backward(
                    (2.0 * config.lam / xb.shape[0]) * resid
                )
            model.encoder.backward(grad_z)

            if not np.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}", layer=epoch)
            opt.step()
            opt.zero_grad()
            epoch_loss += loss
            steps += 1
        loss_history.append(epoch_loss / max(steps, 1))

    y, phi = model.project_full(X)
    model.train_y = y
    model.train_phi = phi
    z_train = model._encode_fast(X)
    span = z_train.max(axis=0) - z_train.min(axis=0)
    pad = 0.1 * span + 1e-9
    model.z_lo = z_train.min(axis=0) - pad
    model.z_hi = z_train.max(axis=0) + pad
    model._tree = cKDTree(y)
    return model, loss_history


class InvertibleProjection(BaseEstimator):
    """Sklearn-style front end: fit projects rows, inverse_transform updates them."""

    def __init__(
        self,
        hidden_dim=64,
        batch_size=None,
        lr=0.01,
        epochs=1000,
        tau=0.15,
        lam=0.1,
        knn_positive_k=10,
        phi_k=10,
        weight_decay=1e-4,
        clamp=5.0,
        seed=0,
    ):
        self.hidden_dim = hidden_dim
        self.batch_size = batch_size
        self.lr = lr
        self.epochs = epochs
        self.tau = tau
        self.lam = lam
        self.knn_positive_k = knn_positive_k
        self.phi_k = phi_k
        self.weight_decay = weight_decay
        self.clamp = clamp
        self.seed = seed

    def _config(self):
        return TrainConfig(
            hidden_dim=self.hidden_dim,
            batch_size=self.batch_size,
            lr=self.lr,
            epochs=self.epochs,
            tau=self.tau,
            lam=self.lam,
            knn_positive_k=self.knn_positive_k,
            phi_k=self.phi_k,
            weight_decay=self.weight_decay,
            clamp=self.clamp,
            seed=self.seed,
        )

    def fit(self, X, y=None):
        self.model_, self.loss_history_ = train_projection(X, self._config())
        return self

    def transform(self, X):
        check_fitted(self, "model_")
        return self.model_.project(X)

    def fit_transform(self, X, y=None):
        return self.fit(X).transform(X)

    def inverse_transform(self, Y, k=None):
        check_fitted(self, "model_")
        return self.model_.inverse_project(Y, k=k)

    def save(self, path):
        check_fitted(self, "model_")
        self.model_.save(path)

    @classmethod
    def load(cls, path):
        model = ProjectionModel.load(path)
        est = cls(**asdict(model.config))
        est.model_ = model
        est.loss_history_ = []
        return est
