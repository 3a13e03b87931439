"""Iterative regularization of noisy linear inverse problems by the dual subgradient flow."""

from . import diagnostics, flows, instances, linop, regularizers, tikhonov
from .errors import DualFlowError

__version__ = "0.1.0"

__all__ = ["diagnostics", "flows", "instances", "linop", "regularizers", "tikhonov", "DualFlowError"]
