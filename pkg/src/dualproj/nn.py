"""Minimal dense neural-network blocks with hand-written gradients.

The layer zoo is deliberately small (linear, batch norm, relu) so every
backward pass can be written and verified by finite differences, and the
whole stack stays float64-exact for the inversion paths built on top.
"""

import math

import numpy as np


class TrainingError(RuntimeError):
    """Raised when training hits non-finite numbers; carries the layer id."""

    def __init__(self, message, layer=None):
        super().__init__(message)
        self.layer = layer


class Parameter:
    """A named tensor with an accumulated gradient."""

    __slots__ = ("name", "value", "grad", "decay")

    def __init__(self, name, value, decay=True):
        self.name = name
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)
        self.decay = decay

    def zero_grad(self):
        self.grad[...] = 0.0


class Linear:
    """Affine map ``x @ W + b`` with W of shape (in_dim, out_dim)."""

    def __init__(self, in_dim, out_dim, rng, name="linear", zero_init=False):
        if zero_init:
            W = np.zeros((in_dim, out_dim))
        else:
            limit = math.sqrt(6.0 / (in_dim + out_dim))
            W = rng.uniform(-limit, limit, size=(in_dim, out_dim))
        self.weight = Parameter(f"{name}.weight", W)
        self.bias = Parameter(f"{name}.bias", np.zeros(out_dim), decay=False)
        self._x = None

    @property
    def in_dim(self):
        return self.weight.value.shape[0]

    @property
    def out_dim(self):
        return self.weight.value.shape[1]

    def forward(self, x, training=False):
        if x.shape[1] != self.in_dim:
            raise ValueError(
                f"{self.weight.name}: input has {x.shape[1]} features, expected {self.in_dim}"
            )
        if training:
            self._x = x
        out = x @ self.weight.value
        out += self.bias.value
        return out

    def backward(self, grad_out):
        self.weight.grad += self._x.T @ grad_out
        self.bias.grad += grad_out.sum(axis=0)
        return grad_out @ self.weight.value.T

    def parameters(self):
        return [self.weight, self.bias]


class BatchNorm1d:
    """Per-feature normalization with running statistics (momentum 0.9).

    Training normalizes by batch statistics and updates the running ones;
    inference uses the frozen running statistics, so it is a pure function.
    """

    def __init__(self, dim, name="bn", momentum=0.9, eps=1e-5):
        self.gamma = Parameter(f"{name}.gamma", np.ones(dim), decay=False)
        self.beta = Parameter(f"{name}.beta", np.zeros(dim), decay=False)
        self.running_mean = np.zeros(dim)
        self.running_var = np.ones(dim)
        self.momentum = momentum
        self.eps = eps
        self._cache = None

    def forward(self, x, training=False):
        if not training:
            # Inference folds the whole affine into one scale/shift pair so large
            # batches take two passes over x instead of four.
            scale = self.gamma.value / np.sqrt(self.running_var + self.eps)
            shift = self.beta.value - self.running_mean * scale
            out = x * scale
            out += shift
            return out
        mu = x.mean(axis=0)
        var = x.var(axis=0)
        inv_std = 1.0 / np.sqrt(var + self.eps)
        x_hat = (x - mu) * inv_std
        self._cache = (x_hat, inv_std)
        self.running_mean = self.momentum * self.running_mean + (1 - self.momentum) * mu
        self.running_var = self.momentum * self.running_var + (1 - self.momentum) * var
        return self.gamma.value * x_hat + self.beta.value

    def backward(self, grad_out):
        x_hat, inv_std = self._cache
        n = x_hat.shape[0]
        self.gamma.grad += (grad_out * x_hat).sum(axis=0)
        self.beta.grad += grad_out.sum(axis=0)
        dx_hat = grad_out * self.gamma.value
        # Batch statistics are functions of x, so their gradients fold back in.
        return (inv_std / n) * (
            n * dx_hat - dx_hat.sum(axis=0) - x_hat * (dx_hat * x_hat).sum(axis=0)
        )

    def parameters(self):
        return [self.gamma, self.beta]


class LinearBlock:
    """linear -> optional batch norm -> activation in {relu, none}."""

    def __init__(
        self,
        in_dim,
        out_dim,
        rng,
        name="block",
        normalize=True,
        activation="relu",
        zero_init=False,
    ):
        if activation not in ("relu", "none"):
            raise ValueError(f"unknown activation {activation!r}")
        self.name = name
        self.linear = Linear(in_dim, out_dim, rng, name=f"{name}.linear", zero_init=zero_init)
        self.norm = BatchNorm1d(out_dim, name=f"{name}.bn") if normalize else None
        self.activation = activation
        self._pre_act = None

    def forward(self, x, training=False):
        h = self.linear.forward(x, training=training)
        if self.norm is not None:
            h = self.norm.forward(h, training=training)
        if self.activation == "relu":
            if training:
                self._pre_act = h
                h = np.maximum(h, 0.0)
            else:
                # h is always a fresh array here, so clamp it in place.
                np.maximum(h, 0.0, out=h)
        return h

    def backward(self, grad_out):
        if self.activation == "relu":
            grad_out = grad_out * (self._pre_act > 0.0)
        if self.norm is not None:
            grad_out = self.norm.backward(grad_out)
        return self.linear.backward(grad_out)

    def parameters(self):
        params = self.linear.parameters()
        if self.norm is not None:
            params += self.norm.parameters()
        return params


class MLP:
    """A stack of LinearBlocks; the final block is plain linear by default."""

    def __init__(
        self,
        dims,
        rng,
        name="mlp",
        final_activation="none",
        final_norm=False,
        zero_init_final=False,
    ):
        self.blocks = []
        last = len(dims) - 2
        for i, (a, b) in enumerate(zip(dims[:-1], dims[1:])):
            if i == last:
                block = LinearBlock(
                    a, b, rng,
                    name=f"{name}.{i}",
                    normalize=final_norm,
                    activation=final_activation,
                    zero_init=zero_init_final,
                )
            else:
                block = LinearBlock(a, b, rng, name=f"{name}.{i}")
            self.blocks.append(block)

    def forward(self, x, training=False):
        for block in self.blocks:
            x = block.forward(x, training=training)
        return x

    def backward(self, grad_out):
        for block in reversed(self.blocks):
            grad_out = block.backward(grad_out)
        return grad_out

    def parameters(self):
        return [p for block in self.blocks for p in block.parameters()]


class AdamW:
    """AdamW with decoupled, multiplicative weight decay."""

    def __init__(self, params, lr=0.01, betas=(0.9, 0.999), eps=1e-8, weight_decay=0.0):
        self.params = list(params)
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.step_count = 0
        self._m = [np.zeros_like(p.value) for p in self.params]
        self._v = [np.zeros_like(p.value) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def step(self):
        self.step_count += 1
        b1, b2 = self.betas
        bc1 = 1.0 - b1 ** self.step_count
        bc2 = 1.0 - b2 ** self.step_count
        for p, m, v in zip(self.params, self._m, self._v):
            g = p.grad
            if not np.all(np.isfinite(g)):
                raise TrainingError(f"non-finite gradient in {p.name}", layer=p.name)
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            if self.weight_decay and p.decay:
                p.value *= 1.0 - self.lr * self.weight_decay
            p.value -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


def cosine_lr(base_lr, epoch, total_epochs):
    """Cosine schedule: base_lr * 0.5 * (1 + cos(pi * epoch / total_epochs))."""
    if total_epochs <= 0:
        raise ValueError("total_epochs must be positive")
    if not 0 <= epoch <= total_epochs:
        raise ValueError("epoch must lie in [0, total_epochs]")
    return base_lr * 0.5 * (1.0 + math.cos(math.pi * epoch / total_epochs))
