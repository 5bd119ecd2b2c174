"""Segmentation and thickness-regression models plus their training loops.

The segmenter pairs a compact four-block downsampling encoder with a
four-block nearest-upsampling decoder and a per-pixel two-class softmax head;
it trains on pixelwise cross-entropy. The regression net maps a band mask
(resampled to a fixed 64x256 grid) to a single mean-thickness scalar and
trains on mean squared error. Both train with plain SGD + momentum and are
bit-deterministic given (data, config, seed).
"""

import math
from dataclasses import dataclass

import numpy as np

from ..image import BinaryMask, GrayImage
from .layers import (
    BatchNorm2d,
    ChannelSoftmax,
    Conv2d,
    Dense,
    Dropout,
    Flatten,
    Identity,
    Layer,
    MaxPool2,
    ReLU,
    Upsample2,
)

SEG_ARCH = 1
RCNN_ARCH = 2

SEG_CLASSES = 2
SEG_DOWNSAMPLE = 16
ENCODER_CHANNELS = (1, 8, 16, 32, 64)
DECODER_CHANNELS = (64, 32, 16, 8, 8)

RCNN_INPUT = (64, 256)  # (height, width) of the resampled mask
RCNN_BLOCKS = ((1, 8, 8, 8), (8, 16, 16, 16))
RCNN_DROPOUT = 0.25
RCNN_DENSE = (64, 16)


class DivergenceError(RuntimeError):
    """Training loss became non-finite; `epoch` is where it happened."""

    def __init__(self, epoch: int):
        super().__init__(f"training diverged (non-finite loss) at epoch {epoch}")
        self.epoch = epoch


@dataclass
class TrainConfig:
    batch_size: int = 4
    epochs: int = 30
    learning_rate: float = 0.1
    momentum: float = 0.9
    seed: int = 0

    def validate(self) -> None:
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")


class Model:
    arch = 0

    def __init__(self, layers: list[Layer]):
        self.layers = layers

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        for layer in self.layers:
            x = layer.forward(x, train=train)
        return x

    def params(self) -> list[np.ndarray]:
        return [p for layer in self.layers for p in layer.params()]

    def grads(self) -> list[np.ndarray]:
        return [g for layer in self.layers for g in layer.grads()]

    def dropout_layers(self) -> list[Dropout]:
        return [l for l in self.layers if isinstance(l, Dropout)]


class SegModel(Model):
    """Encoder-decoder segmenter ending in a channel softmax; K = 2 classes."""

    arch = SEG_ARCH

    def forward_logits(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        for layer in self.layers[:-1]:
            x = layer.forward(x, train=train)
        return x

    def backward_from_logits(self, dlogits: np.ndarray) -> np.ndarray:
        for layer in reversed(self.layers[:-1]):
            dlogits = layer.backward(dlogits)
        return dlogits


class RcnnModel(Model):
    """Convolutional regressor from a resampled band mask to a thickness scalar."""

    arch = RCNN_ARCH

    def backward(self, dy: np.ndarray) -> np.ndarray:
        for layer in reversed(self.layers):
            dy = layer.backward(dy)
        return dy


def build_segmenter(seed: int = 0) -> SegModel:
    rng = np.random.default_rng(np.random.SeedSequence([seed, SEG_ARCH]))
    layers: list[Layer] = []
    for cin, cout in zip(ENCODER_CHANNELS, ENCODER_CHANNELS[1:]):
        layers += [Conv2d(cin, cout, 3, rng), ReLU(), BatchNorm2d(cout), MaxPool2()]
    for cin, cout in zip(DECODER_CHANNELS, DECODER_CHANNELS[1:]):
        layers += [Upsample2(), Conv2d(cin, cout, 3, rng), ReLU(), BatchNorm2d(cout)]
    layers += [Conv2d(DECODER_CHANNELS[-1], SEG_CLASSES, 1, rng), ChannelSoftmax()]
    return SegModel(layers)


def build_rcnn(seed: int = 0) -> RcnnModel:
    rng = np.random.default_rng(np.random.SeedSequence([seed, RCNN_ARCH]))
    layers: list[Layer] = []
    for block in RCNN_BLOCKS:
        for cin, cout in zip(block, block[1:]):
            layers += [Conv2d(cin, cout, 3, rng), ReLU()]
        # Pool before dropout: dropout's 1/(1-p) rescale ahead of a max over
        # positive activations would inflate train-mode features relative to
        # inference and bias the regression output low.
        layers += [MaxPool2(), Dropout(RCNN_DROPOUT)]
    h, w = RCNN_INPUT[0] // 4, RCNN_INPUT[1] // 4
    flat = RCNN_BLOCKS[-1][-1] * h * w
    layers += [Flatten()]
    widths = (flat,) + RCNN_DENSE
    for nin, nout in zip(widths, widths[1:]):
        layers += [Dense(nin, nout, rng), ReLU()]
    layers += [Dense(RCNN_DENSE[-1], 1, rng), Identity()]
    return RcnnModel(layers)


def _seed_dropouts(model: Model, seed: int) -> None:
    for i, layer in enumerate(model.dropout_layers()):
        layer.rng = np.random.default_rng(np.random.SeedSequence([seed, 7, i]))


def _sgd_step(params, grads, velocity, lr: float, momentum: float) -> None:
    for p, g, v in zip(params, grads, velocity):
        v *= momentum
        v += g
        p -= lr * v


def _check_uniform_dims(shapes: list[tuple[int, int]], divisor: int = 1) -> tuple[int, int]:
    first = shapes[0]
    for s in shapes:
        if s != first:
            raise ValueError(f"non-uniform sample dimensions: {first} vs {s}")
    if first[0] % divisor or first[1] % divisor:
        raise ValueError(f"dimensions {first} must be divisible by {divisor}")
    return first


def _run_epochs(model, x, y, cfg, batch_loss):
    """Shared SGD loop; `batch_loss` returns (loss, and backpropagates)."""
    cfg.validate()
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 11]))
    velocity = [np.zeros_like(p) for p in model.params()]
    losses = []
    n = x.shape[0]
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        total, seen = 0.0, 0
        for lo in range(0, n, cfg.batch_size):
            idx = order[lo : lo + cfg.batch_size]
            loss = batch_loss(x[idx], y[idx])
            if not math.isfinite(loss):
                raise DivergenceError(epoch)
            _sgd_step(model.params(), model.grads(), velocity, cfg.learning_rate, cfg.momentum)
            total += loss * idx.size
            seen += idx.size
        losses.append(total / seen)
    return losses


def train_segmenter(data: list[tuple[GrayImage, BinaryMask]], cfg: TrainConfig) -> tuple[SegModel, list[float]]:
    """Train the segmenter on (image, mask) pairs with pixelwise cross-entropy."""
    if len(data) < 2 * cfg.batch_size:
        raise ValueError(f"need at least {2 * cfg.batch_size} samples, got {len(data)}")
    _check_uniform_dims([(img.height, img.width) for img, _ in data], SEG_DOWNSAMPLE)
    for img, m in data:
        if (img.height, img.width) != (m.height, m.width):
            raise ValueError("image and mask dimensions differ within a sample")
    x = np.stack([img.pixels for img, _ in data])[:, None, :, :]
    y = np.stack([m.cells for _, m in data]).astype(np.int64)

    model = build_segmenter(cfg.seed)
    _seed_dropouts(model, cfg.seed)
    eps = 1e-12

    def batch_loss(xb, yb):
        logits = model.forward_logits(xb, train=True)
        probs = model.layers[-1].forward(logits)
        onehot = np.stack([yb == 0, yb == 1], axis=1).astype(np.float64)
        loss = float(-(onehot * np.log(probs + eps)).sum() / (yb.size))
        model.backward_from_logits((probs - onehot) / yb.size)
        return loss

    losses = _run_epochs(model, x, y, cfg, batch_loss)
    return model, losses


def predict_mask(model: SegModel, image: GrayImage) -> BinaryMask:
    """Per-pixel argmax over class probabilities; ties go to background."""
    if image.height % SEG_DOWNSAMPLE or image.width % SEG_DOWNSAMPLE:
        raise ValueError(
            f"image dims {image.width}x{image.height} must be divisible by {SEG_DOWNSAMPLE}; "
            "use segment_image for automatic padding"
        )
    probs = model.forward(image.pixels[None, None, :, :], train=False)
    return BinaryMask(probs[0, 1] > probs[0, 0])


def segment_image(model: SegModel, image: GrayImage) -> BinaryMask:
    """Reflect-pad to a multiple of 16, predict, and crop back."""
    h, w = image.height, image.width
    ph = (-h) % SEG_DOWNSAMPLE
    pw = (-w) % SEG_DOWNSAMPLE
    if ph == 0 and pw == 0:
        return predict_mask(model, image)
    padded = np.pad(image.pixels, ((0, ph), (0, pw)), mode="reflect")
    mask = predict_mask(model, GrayImage(padded))
    return BinaryMask(mask.cells[:h, :w])


def resample_mask_nearest(mask: BinaryMask, height: int, width: int) -> np.ndarray:
    """Nearest-neighbor resample of mask cells to (height, width) float64 0/1."""
    rows = np.floor((np.arange(height) + 0.5) * mask.height / height).astype(int)
    cols = np.floor((np.arange(width) + 0.5) * mask.width / width).astype(int)
    return mask.cells[np.ix_(rows, cols)].astype(np.float64)


def train_rcnn(data: list[tuple[BinaryMask, float]], cfg: TrainConfig) -> tuple[RcnnModel, list[float]]:
    """Train the thickness regressor on (mask, thickness-in-pixels) pairs.

    Masks are resampled to the fixed input grid; targets are rescaled by each
    mask's vertical resample factor so the net learns in resampled units.
    """
    if len(data) < 2 * cfg.batch_size:
        raise ValueError(f"need at least {2 * cfg.batch_size} samples, got {len(data)}")
    x = np.stack([resample_mask_nearest(m, *RCNN_INPUT) for m, _ in data])[:, None, :, :]
    y = np.array([t * (RCNN_INPUT[0] / m.height) for m, t in data], dtype=np.float64)[:, None]

    model = build_rcnn(cfg.seed)
    _seed_dropouts(model, cfg.seed)

    def batch_loss(xb, yb):
        pred = model.forward(xb, train=True)
        diff = pred - yb
        loss = float(np.mean(diff**2))
        model.backward(2.0 * diff / diff.size)
        return loss

    losses = _run_epochs(model, x, y, cfg, batch_loss)
    if cfg.epochs > 0:
        _recalibrate_output(model, x, y, cfg.batch_size)
    return model, losses


def _recalibrate_output(model: RcnnModel, x: np.ndarray, y: np.ndarray, batch_size: int) -> None:
    """Fold the exact affine fit of inference outputs onto targets into the head.

    Dropout puts training and inference in different activation regimes, which
    a linear regression output inherits as a systematic scale/offset error.
    Solving the closed-form least squares of deterministic predictions against
    the training targets and absorbing it into the last dense layer removes
    that error without changing the architecture.
    """
    preds = np.concatenate(
        [model.forward(x[i : i + batch_size], train=False) for i in range(0, x.shape[0], batch_size)]
    )[:, 0]
    targets = y[:, 0]
    mp, mt = preds.mean(), targets.mean()
    var = float(np.sum((preds - mp) ** 2))
    if var > 1e-9:
        gain = float(np.sum((preds - mp) * (targets - mt)) / var)
    else:
        gain = 1.0
    offset = float(mt - gain * mp)
    head = model.layers[-2]
    head.weight *= gain
    head.bias *= gain
    head.bias += offset


def predict_thickness(model: RcnnModel, mask: BinaryMask, scale: float = 1.0) -> float:
    """Predicted mean thickness, rescaled to source pixels then by nm-per-px."""
    if mask.area == 0:
        raise ValueError("cannot predict thickness of an empty mask")
    x = resample_mask_nearest(mask, *RCNN_INPUT)[None, None, :, :]
    out = model.forward(x, train=False)
    return float(out[0, 0]) * (mask.height / RCNN_INPUT[0]) * scale
