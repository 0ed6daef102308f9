"""Tiny trainable models and toy datasets for the evaluation protocol."""

from necode.nn.datasets import LabeledDataset, make_dataset
from necode.nn.models import ModelSpec, TrainedModel, accuracy, predict
from necode.nn.serialize import load_model, save_model
from necode.nn.training import train

__all__ = [
    "LabeledDataset",
    "ModelSpec",
    "TrainedModel",
    "accuracy",
    "load_model",
    "make_dataset",
    "predict",
    "save_model",
    "train",
]
