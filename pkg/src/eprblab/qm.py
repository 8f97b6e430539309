"""Quantum predictions for a polarization-entangled photon pair.

States are real four-vectors over the product basis
``|x1 x2>, |x1 y2>, |y1 x2>, |y1 y2>``; no complex arithmetic is needed.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

NORM_TOL = 1e-12


class MeasurementChannel(enum.Enum):
    """Exit channel of a dichotomic (Wollaston) analyzer."""

    PLUS = "plus"
    MINUS = "minus"

    @property
    def eigenvalue(self) -> int:
        return 1 if self is MeasurementChannel.PLUS else -1


# x polarization exits the plus channel, y the minus channel
_BASIS_CHANNELS = (MeasurementChannel.PLUS, MeasurementChannel.MINUS)


@dataclass(frozen=True)
class Rotation2:
    """Proper rotation of the (x, y) polarization basis by ``angle`` radians."""

    angle: float

    @property
    def matrix(self) -> np.ndarray:
        c, s = math.cos(self.angle), math.sin(self.angle)
        return np.array([[c, s], [-s, c]])

    def compose(self, other: Rotation2) -> Rotation2:
        return Rotation2(self.angle + other.angle)

    def __matmul__(self, other: Rotation2) -> Rotation2:
        return self.compose(other)


@dataclass(frozen=True)
class TwoPhotonState:
    c_xx: float
    c_xy: float
    c_yx: float
    c_yy: float

    def __post_init__(self):
        if abs(self.norm() - 1.0) > NORM_TOL:
            raise ValueError(f"state is not normalized (norm={self.norm()!r})")

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> TwoPhotonState:
        """Build from a 2x2 array indexed ``[photon-1 basis, photon-2 basis]``."""
        return cls(float(m[0, 0]), float(m[0, 1]), float(m[1, 0]), float(m[1, 1]))

    def as_matrix(self) -> np.ndarray:
        return np.array([[self.c_xx, self.c_xy], [self.c_yx, self.c_yy]])

    def as_array(self) -> np.ndarray:
        return np.array([self.c_xx, self.c_xy, self.c_yx, self.c_yy])

    def norm(self) -> float:
        return math.sqrt(self.c_xx**2 + self.c_xy**2 + self.c_yx**2 + self.c_yy**2)


def singlet() -> TwoPhotonState:
    r = math.sqrt(2.0) / 2.0
    return TwoPhotonState(0.0, r, -r, 0.0)


def rotate_arm(state: TwoPhotonState, phi: float) -> TwoPhotonState:
    """Express ``state`` in the basis of a second analyzer rotated by ``phi``.

    Each photon-1 row of coefficients is mapped through the rotation matrix,
    so the singlet becomes ``(sin, cos, -cos, sin) * phi / sqrt(2)``.
    """
    if not math.isfinite(phi):
        raise ValueError(f"rotation angle must be finite, got {phi!r}")
    m = state.as_matrix() @ Rotation2(phi).matrix.T
    return TwoPhotonState.from_matrix(m)


def expectation_m1m2(state: TwoPhotonState) -> float:
    """<psi| M1 M2 |psi> with M = +1 on x and -1 on y for each photon."""
    m = state.as_matrix()
    total = 0.0
    for i, ch1 in enumerate(_BASIS_CHANNELS):
        for j, ch2 in enumerate(_BASIS_CHANNELS):
            total += ch1.eigenvalue * ch2.eigenvalue * float(m[i, j]) ** 2
    return total


def state_correlation(phi: float) -> float:
    """Correlation obtained by rotating the singlet and taking the expectation."""
    return expectation_m1m2(rotate_arm(singlet(), phi))


def state_joint_probability(phi: float) -> float:
    """Probability of x on photon 1 and x' on photon 2, from the rotated state."""
    return rotate_arm(singlet(), phi).c_xx ** 2


def qm_correlation(phi):
    """Closed-form correlation coefficient ``-cos(2 phi)``; accepts arrays."""
    return -np.cos(2.0 * np.asarray(phi, dtype=float))


def qm_joint_probability(phi):
    """Closed-form joint probability ``sin(phi)**2 / 2``; accepts arrays."""
    return 0.5 * np.sin(np.asarray(phi, dtype=float)) ** 2


def component_sum(phi):
    """Scalar sum ``cos(phi) + sin(phi)`` of the rotated basis coefficients.

    Peaks at sqrt(2), above the unit cap of Bell's response functions.
    """
    phi = np.asarray(phi, dtype=float)
    return np.cos(phi) + np.sin(phi)
