"""Numeric policy shared by every module."""

from dataclasses import dataclass


@dataclass(frozen=True)
class NumericPolicy:
    hermiticity: float = 1e-12
    eigen_residual: float = 1e-9
    psd_slack: float = 1e-9
    normalization: float = 1e-9
    negative_entry: float = 1e-12
    clip_negative: float = 1e-9
    povm: float = 1e-10


POLICY = NumericPolicy()
