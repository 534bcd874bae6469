"""Invertible coupling stack: the exactly reversible half of the projection model.

Each layer splits its input, shifts the first part by a function of the
second, then rescales and shifts the second part by functions of the updated
first part. Both directions share the same subnetwork evaluations, so the
inverse is algebraically exact, not a numerical solve.
"""

import numpy as np

from .nn import MLP


class FlowNumericsError(RuntimeError):
    """Non-finite intermediate inside the invertible stack."""

    def __init__(self, message, layer):
        super().__init__(message)
        self.layer = layer


class ShufflePermutation:
    """Fixed feature permutation; a measure-preserving relabeling."""

    def __init__(self, width, rng=None):
        if rng is None:
            self.perm = np.arange(width)
        else:
            self.perm = rng.permutation(width)
        self.inv_perm = np.argsort(self.perm)

    def forward(self, x):
        return x[:, self.perm]

    def inverse(self, x):
        return x[:, self.inv_perm]

    def backward(self, grad_out):
        return grad_out[:, self.inv_perm]


class CouplingLayer:
    """Affine coupling with an additive update on the pass-through half.

    forward:  a1 = z1 + t1(z2);  a2 = z2 * exp(s(a1)) + t2(a1)
    inverse:  z2 = (a2 - t2(a1)) * exp(-s(a1));  z1 = a1 - t1(z2)

    The scale output is smoothly bounded to (-clamp, clamp) before
    exponentiation so neither direction can overflow.
    """

    def __init__(self, dim_z1, dim_z2, hidden, rng, name="acl", clamp=5.0):
        self.dim_z1 = dim_z1
        self.dim_z2 = dim_z2
        self.clamp = clamp
        dims_t1 = [dim_z2, hidden, hidden, hidden, dim_z1]
        dims_st2 = [dim_z1, hidden, hidden, hidden, dim_z2]
        self.t1 = MLP(dims_t1, rng, name=f"{name}.t1", zero_init_final=True)
        self.s = MLP(dims_st2, rng, name=f"{name}.s", zero_init_final=True)
        self.t2 = MLP(dims_st2, rng, name=f"{name}.t2", zero_init_final=True)
        self._cache = None

    def _bounded_scale(self, raw):
        t = np.tanh(raw / self.clamp)
        return self.clamp * t, t

    def forward(self, z, training=False):
        z1, z2 = z[:, : self.dim_z1], z[:, self.dim_z1 :]
        a1 = z1 + self.t1.forward(z2, training=training)
        sc, tanh_v = self._bounded_scale(self.s.forward(a1, training=training))
        exp_sc = np.exp(sc)
        a2 = z2 * exp_sc + self.t2.forward(a1, training=training)
        if training:
            self._cache = (z2, exp_sc, tanh_v)
        return np.concatenate([a1, a2], axis=1)

    def inverse(self, a):
        a1, a2 = a[:, : self.dim_z1], a[:, self.dim_z1 :]
        sc, _ = self._bounded_scale(self.s.forward(a1))
        z2 = (a2 - self.t2.forward(a1)) * np.exp(-sc)
        z1 = a1 - self.t1.forward(z2)
        return np.concatenate([z1, z2], axis=1)

    def backward(self, grad_out):
        z2, exp_sc, tanh_v = self._cache
        ga1 = grad_out[:, : self.dim_z1].copy()
        ga2 = grad_out[:, self.dim_z1 :]
        ga1 += self.t2.backward(ga2)
        d_raw = ga2 * z2 * exp_sc * (1.0 - tanh_v**2)
        ga1 += self.s.backward(d_raw)
        gz2 = ga2 * exp_sc + self.t1.backward(ga1)
        return np.concatenate([ga1, gz2], axis=1)

    def parameters(self):
        return self.t1.parameters() + self.s.parameters() + self.t2.parameters()


def split_schedule(width, n_layers=4):
    """Widths of the pass-through half: halving toward the final 2-D output."""
    if width < 4:
        raise ValueError("latent width must be at least 4")
    dims = [max(2, width >> (i + 1)) for i in range(n_layers - 1)] + [2]
    return dims


class InvertibleStack:
    """Coupling layers interleaved with fixed shuffles.

    The shuffle after the last coupling layer is the identity so the final
    layer's halves come out as the 2-D projection y and the auxiliary phi.
    """

    def __init__(self, width, hidden, rng, n_layers=4, clamp=5.0, identity_perms=False):
        self.width = width
        d1s = split_schedule(width, n_layers)
        self.layers = []
        self.perms = []
        for i, d1 in enumerate(d1s):
            self.layers.append(
                CouplingLayer(d1, width - d1, hidden, rng, name=f"inn.{i}", clamp=clamp)
            )
            last = i == len(d1s) - 1
            perm_rng = None if (identity_perms or last) else rng
            self.perms.append(ShufflePermutation(width, perm_rng))

    def forward(self, z, training=False):
        a = z
        for i, (layer, perm) in enumerate(zip(self.layers, self.perms)):
            a = perm.forward(layer.forward(a, training=training))
            if not np.all(np.isfinite(a)):
                raise FlowNumericsError(f"non-finite output after coupling layer {i}", layer=i)
        return a

    def inverse(self, a):
        z = a
        for i in reversed(range(len(self.layers))):
            z = self.layers[i].inverse(self.perms[i].inverse(z))
            if not np.all(np.isfinite(z)):
                raise FlowNumericsError(f"non-finite output inverting coupling layer {i}", layer=i)
        return z

    def backward(self, grad_out):
        g = grad_out
        for layer, perm in zip(reversed(self.layers), reversed(self.perms)):
            g = layer.backward(perm.backward(g))
        return g

    def parameters(self):
        return [p for layer in self.layers for p in layer.parameters()]
