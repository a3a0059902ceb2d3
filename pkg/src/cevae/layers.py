"""Dense feed-forward networks on top of the autodiff engine."""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Value

__all__ = ["DenseNet", "DEFAULT_WIDTH", "DEFAULT_INIT_SCALE"]

# Hidden width when a caller does not override it.
DEFAULT_WIDTH = 200
# Weight init: N(0, (scale / sqrt(fan_in))^2), zero biases. Scales much
# below ~0.5 leave latent-variable models stuck in collapsed saddles.
DEFAULT_INIT_SCALE = 0.5


class DenseNet:
    """Stack of affine layers with ELU between them.

    ``sizes = [d_in, h1, ..., d_out]`` gives the layer dimensions. The
    activation is applied after every layer except the last, unless
    ``activate_final`` is set (used for shared representation trunks whose
    output feeds further heads). With ``sizes = [d_in, d_out]`` the net is a
    single affine map.
    """

    def __init__(self, sizes, rng, *, activation="elu", activate_final=False,
                 init_scale=DEFAULT_INIT_SCALE):
        if len(sizes) < 2:
            raise ValueError("DenseNet needs at least input and output sizes")
        if activation not in ("elu", "identity"):
            raise ValueError(f"unknown activation {activation!r}")
        self.sizes = list(sizes)
        self.activation = activation
        self.activate_final = activate_final
        self.weights: list[Value] = []
        self.biases: list[Value] = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            std = init_scale / np.sqrt(fan_in)
            w = rng.normal(0.0, std, size=(fan_in, fan_out))
            self.weights.append(Value(w, op="param"))
            self.biases.append(Value(np.zeros(fan_out), op="param"))

    @property
    def depth(self) -> int:
        """Number of activated (hidden) layers."""
        n = len(self.weights)
        return n if self.activate_final else n - 1

    @property
    def d_in(self) -> int:
        return self.sizes[0]

    @property
    def d_out(self) -> int:
        return self.sizes[-1]

    def _check_input(self, x_data: np.ndarray) -> None:
        if x_data.ndim != 2 or x_data.shape[1] != self.d_in:
            raise ValueError(
                f"expected input of shape (n, {self.d_in}), got {x_data.shape}"
            )

    def forward(self, x) -> Value:
        """Graph-building forward pass; ``x`` is a Value or array (n, d_in)."""
        x = ad.as_value(x)
        self._check_input(x.data)
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = ad.matmul(h, w) + b
            if self.activation == "elu" and (i < last or self.activate_final):
                h = ad.elu(h)
        return h

    def forward_np(self, x: np.ndarray) -> np.ndarray:
        """Plain numpy forward pass (no graph); for frozen-model inference."""
        x = np.asarray(x, dtype=np.float64)
        self._check_input(x)
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w.data + b.data
            if self.activation == "elu" and (i < last or self.activate_final):
                h = np.where(h > 0.0, h, np.expm1(np.minimum(h, 0.0)))
        return h

    def params(self, prefix: str) -> dict[str, Value]:
        out = {}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            out[f"{prefix}.w{i}"] = w
            out[f"{prefix}.b{i}"] = b
        return out
