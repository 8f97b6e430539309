"""Two-mode local signal model.

Each detector receives both polarization modes of an unpolarized source,
each mode carrying its own random phase offset. The hidden variables are
the incidence angle ``theta`` and the phase offsets ``gamma_x``, ``gamma_y``,
all on [0, pi] with uniform measure.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .quadrature import QuadratureSpec, nodes_for

HIDDEN_DOMAIN = (0.0, math.pi)


@dataclass(frozen=True)
class HiddenVars:
    """One draw of the hidden variables; fields may also be broadcastable arrays."""

    theta: float
    gamma_x: float
    gamma_y: float


@dataclass(frozen=True)
class DetectorModel:
    """Ideal detector; ``gain`` absorbs detector volume and exposure time."""

    gain: float = 1.0

    def __post_init__(self):
        if not self.gain > 0:
            raise ValueError(f"gain must be positive, got {self.gain!r}")


@dataclass(frozen=True)
class AnalyzerPair:
    """Detector B is oriented at ``phi`` radians relative to detector A."""

    phi: float = 0.0

    def __post_init__(self):
        if not np.all(np.isfinite(self.phi)):
            raise ValueError(f"analyzer angle must be finite, got {self.phi!r}")


def amplitude_a(h: HiddenVars):
    """Signal at the detector aligned with the coordinate system."""
    return np.cos(h.theta) * np.cos(h.gamma_x) + np.sin(h.theta) * np.cos(h.gamma_y)


def amplitude_b(h: HiddenVars, pair: AnalyzerPair):
    """Signal at the detector rotated by ``pair.phi``."""
    angle = np.add(h.theta, pair.phi)
    return np.cos(angle) * np.cos(h.gamma_x) + np.sin(angle) * np.cos(h.gamma_y)


def intensity(amplitude, d: DetectorModel = DetectorModel()):
    """Detected intensity, ``gain * amplitude**2``."""
    return d.gain * np.square(amplitude)


def singles_rate(q: QuadratureSpec = QuadratureSpec(), d: DetectorModel = DetectorModel()) -> float:
    """Mean intensity at detector A over the full hidden-variable cube."""
    nodes, weights = nodes_for(q)
    h = HiddenVars(nodes[:, None, None], nodes[None, :, None], nodes[None, None, :])
    w3 = weights[:, None, None] * weights[None, :, None] * weights[None, None, :]
    return float(np.sum(w3 * intensity(amplitude_a(h), d))) / math.pi**3


def pair_rate(q: QuadratureSpec = QuadratureSpec(), d: DetectorModel = DetectorModel()) -> float:
    """Ideal pair production rate: half the singles rate."""
    return singles_rate(q, d) / 2.0
