"""Augmented pointer network for decomposition programs."""
from qdecomp.ptrnet.model import (
    AugmentedQuestion,
    ModelConfig,
    PointerNet,
    Vocab,
    augment,
    decode_distribution,
    encode,
    gru_step,
    loss,
    make_batch,
    predict,
    predict_batch,
)
from qdecomp.ptrnet.train import TrainResult, build_model, exact_accuracy, grad_check, train

__all__ = [
    "AugmentedQuestion",
    "ModelConfig",
    "PointerNet",
    "TrainResult",
    "Vocab",
    "augment",
    "build_model",
    "decode_distribution",
    "encode",
    "exact_accuracy",
    "grad_check",
    "gru_step",
    "loss",
    "make_batch",
    "predict",
    "predict_batch",
    "train",
]
