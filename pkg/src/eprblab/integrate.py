"""Coincidence integral of the two-mode model, by quadrature and by Monte Carlo.

The bracketed phase average in the coincidence formula can be read in more
than one way, so every evaluation is tagged with an :class:`Interpretation`:

``literal``
    ``(1/pi) int [ (1/pi^2) iint sqrtA sqrtB dgx dgy ]^2 dtheta``, the square
    applied to the phase-averaged product exactly as typeset.
``square_before_phase_average``
    ``(1/pi^3) iiint (sqrtA sqrtB)^2``, the squared signal product averaged
    over all three hidden variables.
``pair_rate_normalized``
    the ``literal`` integral, normalized by the total coincidence rate over
    all four exit-channel pairs instead of half the singles rate.

Both ``literal`` and ``square_before_phase_average`` rates divide by
:func:`eprblab.model.pair_rate`.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .model import AnalyzerPair, HiddenVars, amplitude_a, amplitude_b, pair_rate
from .quadrature import QuadratureSpec, nodes_for
from .sampling import McSpec, fsum_arrays, iter_hidden_chunks, map_chunks, uniform_angles


class Interpretation(str, enum.Enum):
    LITERAL = "literal"
    SQUARE_FIRST = "square_before_phase_average"
    PAIR_NORM = "pair_rate_normalized"

    @classmethod
    def parse(cls, name: str | Interpretation) -> Interpretation:
        if isinstance(name, Interpretation):
            return name
        key = str(name).strip().lower()
        if key in CLI_MODE_NAMES:
            return CLI_MODE_NAMES[key]
        return cls(key)

    @property
    def cli_name(self) -> str:
        return {v: k for k, v in CLI_MODE_NAMES.items()}[self]


CLI_MODE_NAMES = {
    "literal": Interpretation.LITERAL,
    "square-first": Interpretation.SQUARE_FIRST,
    "pair-norm": Interpretation.PAIR_NORM,
}

ALL_MODES = tuple(Interpretation)

# one random stream per functional so modes never share draws
_MC_STREAM = {
    Interpretation.LITERAL: 1,
    Interpretation.SQUARE_FIRST: 2,
    Interpretation.PAIR_NORM: 3,
}
SINGLES_STREAM = 4
ENVELOPE_STREAM = 5

ESTIMATOR_NOTES = {
    Interpretation.LITERAL.value: (
        "per sample: theta ~ U[0,pi), two independent phase pairs (gx1,gy1), (gx2,gy2) ~ U[0,pi)^2; "
        "f = [sqrtA sqrtB](theta,g1) * [sqrtA sqrtB](theta,g2), an unbiased estimate of the squared "
        "phase average; rate = mean(f) / pair_rate(quadrature)"
    ),
    Interpretation.SQUARE_FIRST.value: (
        "per sample: (theta,gx,gy) ~ U[0,pi)^3; f = (sqrtA sqrtB)^2; rate = mean(f) / pair_rate(quadrature)"
    ),
    Interpretation.PAIR_NORM.value: (
        "numerator as literal (own stream); rate = mean(f) / [2 C(phi) + 2 C(phi + pi/2)] with C the "
        "literal quadrature integral, i.e. the four exit-channel coincidence total"
    ),
    "common": (
        "all phi points share the same draws (common random numbers); sqrtB(phi) is evaluated as "
        "cos(phi) sqrtA + sin(phi) sqrtA_perp; std_error = sample std (ddof=1) / sqrt(samples)"
    ),
}


class DegenerateNormalization(ArithmeticError):
    pass


@dataclass(frozen=True)
class Estimate:
    value: float
    std_error: float
    mode: Interpretation
    fingerprint: str

    @property
    def is_quadrature(self) -> bool:
        return self.std_error == 0.0

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "std_error": self.std_error,
            "mode": self.mode.value,
            "fingerprint": self.fingerprint,
        }


def _as_phis(phi) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(phi, dtype=float))
    if not np.all(np.isfinite(arr)):
        raise ValueError("phi must be finite")
    return arr


def _grid(q: QuadratureSpec):
    nodes, w = nodes_for(q)
    h = HiddenVars(nodes[:, None, None], nodes[None, :, None], nodes[None, None, :])
    return h, w, np.outer(w, w)


def inner_phase_average(theta, phi: float, q: QuadratureSpec = QuadratureSpec()):
    """``(1/pi^2) iint sqrtA sqrtB dgx dgy`` at the given incidence angle(s)."""
    nodes, w = nodes_for(q)
    theta_arr = np.atleast_1d(np.asarray(theta, dtype=float))
    h = HiddenVars(theta_arr[:, None, None], nodes[None, :, None], nodes[None, None, :])
    prod = amplitude_a(h) * amplitude_b(h, AnalyzerPair(phi))
    out = np.tensordot(prod, np.outer(w, w), axes=([1, 2], [0, 1])) / math.pi**2
    return float(out[0]) if np.ndim(theta) == 0 else out


def _raw_integrals(phis: np.ndarray, q: QuadratureSpec) -> tuple[np.ndarray, np.ndarray]:
    """(bracket-squared, product-squared) integrals for every phi."""
    h, w, w2 = _grid(q)
    sa = amplitude_a(h)
    lit = np.empty(len(phis))
    sq = np.empty(len(phis))
    for i, phi in enumerate(phis):
        prod = sa * amplitude_b(h, AnalyzerPair(phi))
        inner = np.tensordot(prod, w2, axes=([1, 2], [0, 1])) / math.pi**2
        lit[i] = np.dot(w, inner * inner) / math.pi
        sq[i] = np.dot(w, np.tensordot(prod * prod, w2, axes=([1, 2], [0, 1]))) / math.pi**3
    return lit, sq


def coincidence_integrals(phis, q: QuadratureSpec = QuadratureSpec(), m=Interpretation.LITERAL) -> np.ndarray:
    """Vectorized :func:`coincidence_integral` values over a phi grid."""
    m = Interpretation.parse(m)
    lit, sq = _raw_integrals(_as_phis(phis), q)
    return sq if m is Interpretation.SQUARE_FIRST else lit


def coincidence_integral(phi: float, q: QuadratureSpec = QuadratureSpec(), m=Interpretation.LITERAL) -> Estimate:
    m = Interpretation.parse(m)
    value = float(coincidence_integrals(phi, q, m)[0])
    return Estimate(value, 0.0, m, q.fingerprint())


def normalizations(phis, q: QuadratureSpec = QuadratureSpec(), m=Interpretation.LITERAL) -> np.ndarray:
    """Denominator that turns a coincidence integral into a rate."""
    m = Interpretation.parse(m)
    phis = _as_phis(phis)
    if m is Interpretation.PAIR_NORM:
        lit, _ = _raw_integrals(phis, q)
        lit_perp, _ = _raw_integrals(phis + math.pi / 2, q)
        norm = 2.0 * lit + 2.0 * lit_perp
    else:
        norm = np.full(len(phis), pair_rate(q))
    if np.any(np.abs(norm) < 1e-300):
        raise DegenerateNormalization(f"normalization vanishes for mode {m.value}")
    return norm


def coincidence_rates(phis, q: QuadratureSpec = QuadratureSpec(), m=Interpretation.LITERAL) -> np.ndarray:
    m = Interpretation.parse(m)
    return coincidence_integrals(phis, q, m) / normalizations(phis, q, m)


def coincidence_rate(phi: float, q: QuadratureSpec = QuadratureSpec(), m=Interpretation.LITERAL) -> Estimate:
    """Normalized coincidence rate; compare against ``sin(phi)**2 / 2`` downstream."""
    m = Interpretation.parse(m)
    value = float(coincidence_rates(phi, q, m)[0])
    return Estimate(value, 0.0, m, q.fingerprint())


# --- Monte Carlo -----------------------------------------------------------


def _signal_parts(theta, gx, gy):
    """Return ``(sqrtA^2, sqrtA * sqrtA_perp)`` so that sqrtA sqrtB = c*u + s*v."""
    x, y = np.cos(gx), np.cos(gy)
    ct, st = np.cos(theta), np.sin(theta)
    a = ct * x + st * y
    a_perp = ct * y - st * x
    return a * a, a * a_perp


def _moments(features: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return features.sum(axis=1), features @ features.T


def _chunk_square_first(rng: np.random.Generator, n: int):
    theta, gx, gy = uniform_angles(rng, n, 3)
    u, v = _signal_parts(theta, gx, gy)
    return _moments(np.stack([u * u, u * v, v * v]))


def _chunk_literal(rng: np.random.Generator, n: int):
    theta, gx1, gy1, gx2, gy2 = uniform_angles(rng, n, 5)
    u1, v1 = _signal_parts(theta, gx1, gy1)
    u2, v2 = _signal_parts(theta, gx2, gy2)
    return _moments(np.stack([u1 * u2, u1 * v2 + u2 * v1, v1 * v2]))


def _feature_weights(phis: np.ndarray, m: Interpretation) -> np.ndarray:
    c, s = np.cos(phis), np.sin(phis)
    cross = 2.0 * c * s if m is Interpretation.SQUARE_FIRST else c * s
    return np.stack([c * c, cross, s * s], axis=1)


def mc_coincidence_curve(phis, mc: McSpec, m=Interpretation.LITERAL, workers: int = 1):
    """Monte Carlo coincidence integrals over a phi grid.

    Returns ``(values, std_errors)``. Per-chunk moment sums are combined in
    chunk order with exactly rounded summation, so the output is
    bit-identical for any ``workers``.
    """
    m = Interpretation.parse(m)
    phis = _as_phis(phis)
    chunk_fn = _chunk_square_first if m is Interpretation.SQUARE_FIRST else _chunk_literal
    parts = map_chunks(chunk_fn, mc, _MC_STREAM[m], workers)
    n = mc.samples
    mean = fsum_arrays([p[0] for p in parts]) / n
    second = fsum_arrays([p[1] for p in parts])
    w = _feature_weights(phis, m)
    values = w @ mean
    if n > 1:
        cov = (second - n * np.outer(mean, mean)) / (n - 1)
        var = np.einsum("pi,ij,pj->p", w, cov, w)
        std_errors = np.sqrt(np.maximum(var, 0.0) / n)
    else:
        std_errors = np.full(len(phis), math.inf)
    return values, std_errors


def mc_coincidence(phi: float, mc: McSpec, m=Interpretation.LITERAL, workers: int = 1) -> Estimate:
    m = Interpretation.parse(m)
    values, errors = mc_coincidence_curve(phi, mc, m, workers)
    return Estimate(float(values[0]), float(errors[0]), m, mc.fingerprint(_MC_STREAM[m]))


def mc_coincidence_rates(phis, mc: McSpec, m=Interpretation.LITERAL,
                         q: QuadratureSpec = QuadratureSpec(), workers: int = 1):
    """MC rates: the integral by sampling, its normalization by quadrature."""
    m = Interpretation.parse(m)
    values, errors = mc_coincidence_curve(phis, mc, m, workers)
    norm = normalizations(phis, q, m)
    return values / norm, errors / np.abs(norm)


def mc_coincidence_rate(phi: float, mc: McSpec, m=Interpretation.LITERAL,
                        q: QuadratureSpec = QuadratureSpec(), workers: int = 1) -> Estimate:
    m = Interpretation.parse(m)
    values, errors = mc_coincidence_rates(phi, mc, m, q, workers)
    return Estimate(float(values[0]), float(errors[0]), m,
                    f"{mc.fingerprint(_MC_STREAM[m])}|norm={q.fingerprint()}")


def mc_singles_rate(mc: McSpec) -> tuple[float, float]:
    """Monte Carlo mean of ``sqrtA^2`` and its standard error."""
    sums, sumsq = [], []
    for theta, gx, gy in iter_hidden_chunks(mc, SINGLES_STREAM):
        f = amplitude_a(HiddenVars(theta, gx, gy)) ** 2
        sums.append(f.sum())
        sumsq.append(np.dot(f, f))
    n = mc.samples
    mean = math.fsum(sums) / n
    if n == 1:
        return mean, math.inf
    var = (math.fsum(sumsq) - n * mean * mean) / (n - 1)
    return mean, math.sqrt(max(var, 0.0) / n)


def amplitude_envelope(mc: McSpec) -> float:
    """Largest ``|sqrtA|`` seen over ``mc.samples`` uniform hidden-variable draws."""
    best = 0.0
    for theta, gx, gy in iter_hidden_chunks(mc, ENVELOPE_STREAM):
        best = max(best, float(np.max(np.abs(amplitude_a(HiddenVars(theta, gx, gy))))))
    return best
