"""Fixed-order one-dimensional rules on [0, pi] and their tensor products."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np


class Rule(str, enum.Enum):
    GAUSS_LEGENDRE = "gauss_legendre"
    TRAPEZOID = "trapezoid"


@dataclass(frozen=True)
class QuadratureSpec:
    nodes_per_dim: int = 64
    rule: Rule = Rule.GAUSS_LEGENDRE

    def __post_init__(self):
        if isinstance(self.nodes_per_dim, bool) or not isinstance(self.nodes_per_dim, int):
            raise TypeError("nodes_per_dim must be an int")
        if self.nodes_per_dim < 2:
            raise ValueError(f"need at least 2 nodes per dimension, got {self.nodes_per_dim}")
        object.__setattr__(self, "rule", Rule(self.rule))

    def fingerprint(self) -> str:
        return f"quad:{self.rule.value}:{self.nodes_per_dim}"

    def refined(self, factor: int = 2) -> QuadratureSpec:
        return QuadratureSpec(self.nodes_per_dim * factor, self.rule)

    def to_dict(self) -> dict:
        return {"nodes_per_dim": self.nodes_per_dim, "rule": self.rule.value}


@lru_cache(maxsize=32)
def _nodes(n: int, rule: Rule) -> tuple[np.ndarray, np.ndarray]:
    if rule is Rule.GAUSS_LEGENDRE:
        x, w = np.polynomial.legendre.leggauss(n)
        nodes = 0.5 * math.pi * (x + 1.0)
        weights = 0.5 * math.pi * w
    else:
        nodes = np.linspace(0.0, math.pi, n)
        weights = np.full(n, math.pi / (n - 1))
        weights[[0, -1]] *= 0.5
    nodes.flags.writeable = False
    weights.flags.writeable = False
    return nodes, weights


def quadrature_nodes(n: int, rule: Rule | str = Rule.GAUSS_LEGENDRE) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of an ``n``-point rule on [0, pi].

    The returned arrays are cached and read-only.
    """
    if n < 2:
        raise ValueError(f"need at least 2 nodes, got {n}")
    return _nodes(int(n), Rule(rule))


def nodes_for(spec: QuadratureSpec) -> tuple[np.ndarray, np.ndarray]:
    return quadrature_nodes(spec.nodes_per_dim, spec.rule)
