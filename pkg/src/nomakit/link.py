"""Flat-fading AWGN link with SIC and joint ML symbol detection."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constellation import Constellation, PowerSplit, SuperConstellation

# relative slack under which two squared distances count as a tie
TIE_RTOL = 1e-12


@dataclass(frozen=True)
class ChannelState:
    gains: tuple[complex, ...]
    noise_power: float

    def __post_init__(self):
        if not self.gains:
            raise ValueError("at least one channel gain is required")
        if not self.noise_power > 0:
            raise ValueError("noise_power must be positive")


@dataclass(frozen=True)
class DetectionResult:
    label1: str
    label2: str
    point_index: int


def complex_noise(shape, sigma2: float, rng: np.random.Generator) -> np.ndarray:
    """Circularly symmetric Gaussian samples with total variance ``sigma2``."""
    scale = math.sqrt(sigma2 / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def transmit(point, h: complex, sigma2: float, rng: np.random.Generator):
    """Return ``h*point + noise``; works on scalars and arrays alike."""
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    x = np.asarray(point, dtype=complex)
    y = h * x + complex_noise(x.shape, sigma2, rng)
    return complex(y) if y.ndim == 0 else y


def nearest(y, refs: np.ndarray) -> np.ndarray:
    """Index of the nearest reference for each entry of ``y``.

    Near-ties (within ``TIE_RTOL``) go to the lowest index so that decisions
    do not flip under rounding of rotated or rescaled inputs.
    """
    y = np.asarray(y, dtype=complex)
    d = np.abs(y[..., None] - refs) ** 2
    best = d.min(axis=-1, keepdims=True)
    slack = TIE_RTOL * np.maximum(best, np.abs(y[..., None]) ** 2 + 1e-300)
    return np.argmax(d <= best + slack, axis=-1)


def sic_detect_indices(y, h, c_fine: Constellation, c_coarse: Constellation, split: PowerSplit):
    """Vectorised SIC: returns ``(fine_index, coarse_index)`` arrays."""
    coarse_ref = math.sqrt(split.p2) * h * c_coarse.points
    i_coarse = nearest(y, coarse_ref)
    residual = np.asarray(y) - coarse_ref[i_coarse]
    fine_ref = math.sqrt(split.p1) * h * c_fine.points
    i_fine = nearest(residual, fine_ref)
    return i_fine, i_coarse


def sic_detect(y: complex, h: complex, c_fine: Constellation, c_coarse: Constellation,
               split: PowerSplit) -> DetectionResult:
    """Two-stage SIC detection.

    The coarse user holds power share ``1 - alpha`` and is sliced first; its
    contribution is then removed and the fine user is sliced from the rest.
    ``label1`` is the fine user's label, ``label2`` the coarse user's.
    """
    i_fine, i_coarse = (int(v) for v in sic_detect_indices(y, h, c_fine, c_coarse, split))
    return DetectionResult(c_fine.labels[i_fine], c_coarse.labels[i_coarse],
                           i_fine * c_coarse.order + i_coarse)


def ml_detect_indices(y, h, sc: SuperConstellation) -> np.ndarray:
    return nearest(y, h * sc.values)


def ml_detect(y: complex, h: complex, sc: SuperConstellation) -> DetectionResult:
    """Joint minimum-distance decision over all super-points."""
    idx = int(ml_detect_indices(y, h, sc))
    c1, c2 = sc.parents
    return DetectionResult(c1.labels[idx // c2.order], c2.labels[idx % c2.order], idx)
