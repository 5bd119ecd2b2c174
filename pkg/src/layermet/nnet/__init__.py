"""Minimal neural-network engine: layers, models, training, serialization."""

from .gradcheck import ALL_KINDS, TOLERANCE, check_layer, run_all
from .io import ArchitectureMismatchError, ModelFormatError, load_model, save_model
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
from .models import (
    DivergenceError,
    RcnnModel,
    SegModel,
    TrainConfig,
    build_rcnn,
    build_segmenter,
    predict_mask,
    predict_thickness,
    resample_mask_nearest,
    segment_image,
    train_rcnn,
    train_segmenter,
)

__all__ = [
    "ALL_KINDS",
    "TOLERANCE",
    "ArchitectureMismatchError",
    "BatchNorm2d",
    "ChannelSoftmax",
    "Conv2d",
    "Dense",
    "DivergenceError",
    "Dropout",
    "Flatten",
    "Identity",
    "Layer",
    "MaxPool2",
    "ModelFormatError",
    "RcnnModel",
    "ReLU",
    "SegModel",
    "TrainConfig",
    "Upsample2",
    "build_rcnn",
    "build_segmenter",
    "check_layer",
    "load_model",
    "predict_mask",
    "predict_thickness",
    "resample_mask_nearest",
    "run_all",
    "save_model",
    "segment_image",
    "train_rcnn",
    "train_segmenter",
]
