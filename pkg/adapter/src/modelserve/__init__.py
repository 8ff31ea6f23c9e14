"""Serve TorchScript classifiers over the line-delimited JSON protocol."""

from .model import ModelLoadError, ServedModel, load_served_model
from .serve import PROTOCOL_VERSION, main, run_loop

__all__ = [
    "ModelLoadError",
    "PROTOCOL_VERSION",
    "ServedModel",
    "load_served_model",
    "main",
    "run_loop",
]
