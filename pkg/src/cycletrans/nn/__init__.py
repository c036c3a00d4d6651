"""Numerics backbone: kernels, layers, optimizer, checkpoints, gradient checks."""

from .kernels import BACKEND

__all__ = ["BACKEND"]
