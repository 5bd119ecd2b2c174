"""Central finite-difference verification of every layer's backward pass.

For each layer kind a small random case is built; the scalar loss is the
inner product of the layer output with a fixed random projection, so the
analytic gradient of the loss is exactly backward(projection). Gradients of
the input and of every parameter are compared against central differences.
"""

import numpy as np

from .layers import (
    BatchNorm2d,
    ChannelSoftmax,
    Conv2d,
    Dense,
    Dropout,
    Flatten,
    Identity,
    MaxPool2,
    ReLU,
    Upsample2,
)

STEP = 1e-4
TOLERANCE = 1e-4


def _spaced(rng: np.random.Generator, shape) -> np.ndarray:
    """Random values with pairwise gaps well above the probe step.

    Keeps inputs away from ReLU kinks and max-pool ties so the central
    difference stays valid.
    """
    n = int(np.prod(shape))
    vals = (rng.permutation(n) + 0.5) / n * 2.0 - 1.0
    return vals.reshape(shape)


def _case(kind: str, rng: np.random.Generator):
    if kind == "conv2d":
        return Conv2d(3, 4, 3, rng), rng.normal(size=(2, 3, 6, 6)), True
    if kind == "relu":
        return ReLU(), _spaced(rng, (2, 3, 5, 5)), True
    if kind == "batchnorm":
        return BatchNorm2d(3), rng.normal(size=(4, 3, 4, 4)), True
    if kind == "maxpool2":
        return MaxPool2(), _spaced(rng, (2, 3, 6, 6)), True
    if kind == "upsample2":
        return Upsample2(), rng.normal(size=(2, 3, 4, 4)), True
    if kind == "dropout":
        return Dropout(0.25), rng.normal(size=(2, 3, 4, 4)), True
    if kind == "flatten":
        return Flatten(), rng.normal(size=(2, 3, 4, 4)), True
    if kind == "dense":
        return Dense(10, 7, rng), rng.normal(size=(4, 10)), True
    if kind == "softmax_channelwise":
        return ChannelSoftmax(), rng.normal(size=(2, 5, 3, 3)), True
    if kind == "linear":
        return Identity(), rng.normal(size=(3, 4)), True
    raise ValueError(f"no gradient case for layer kind {kind!r}")


ALL_KINDS = (
    "conv2d",
    "relu",
    "batchnorm",
    "maxpool2",
    "upsample2",
    "dropout",
    "flatten",
    "dense",
    "softmax_channelwise",
    "linear",
)


def _rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    num = float(np.abs(analytic - numeric).max())
    den = max(float(np.abs(analytic).max()), float(np.abs(numeric).max()), 1.0)
    return num / den


def check_layer(kind: str, seed: int = 0, corrupt: bool = False) -> float:
    """Worst relative error across input and parameter gradients for one kind."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 13]))
    layer, x, train = _case(kind, rng)
    projection = rng.normal(size=layer.forward(x.copy(), train=train).shape)
    dropout_seed = int(rng.integers(2**32))

    def run_forward(inp):
        if isinstance(layer, Dropout):
            layer.rng = np.random.default_rng(dropout_seed)  # same mask every call
        return layer.forward(inp, train=train)

    def loss(inp):
        return float((run_forward(inp) * projection).sum())

    run_forward(x)
    dx = layer.backward(projection.copy())
    analytic = [dx] + [g.copy() for g in layer.grads()]
    if corrupt:
        analytic[0] = analytic[0] * 1.01 + 1e-3

    tensors = [x] + layer.params()
    worst = 0.0
    for tensor, grad in zip(tensors, analytic):
        numeric = np.zeros_like(tensor, dtype=np.float64)
        flat_t = tensor.reshape(-1)
        flat_n = numeric.reshape(-1)
        for i in range(flat_t.size):
            orig = flat_t[i]
            flat_t[i] = orig + STEP
            up = loss(x)
            flat_t[i] = orig - STEP
            down = loss(x)
            flat_t[i] = orig
            flat_n[i] = (up - down) / (2.0 * STEP)
        worst = max(worst, _rel_error(np.asarray(grad), numeric))
    return worst


def run_all(seed: int = 0, corrupt: bool = False) -> dict[str, float]:
    """Max relative gradient error per layer kind."""
    return {kind: check_layer(kind, seed=seed, corrupt=corrupt) for kind in ALL_KINDS}
