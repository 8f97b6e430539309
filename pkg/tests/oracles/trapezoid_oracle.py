"""Brute-force trapezoid reference values for the two-mode signal model.

Standalone on purpose: imports nothing from ``eprblab``. Every integral is
evaluated on the full tensor grid with 512 trapezoid nodes per dimension
over [0, pi]. Run once to regenerate ``tests/fixtures/oracle_values.json``::

    python tests/oracles/trapezoid_oracle.py
"""
import json
import math
import sys
from pathlib import Path

import numpy as np

N = 512
NODES = np.linspace(0.0, math.pi, N)
WEIGHTS = np.full(N, math.pi / (N - 1))
WEIGHTS[0] *= 0.5
WEIGHTS[-1] *= 0.5

COS_G = np.cos(NODES)
W2 = np.outer(WEIGHTS, WEIGHTS)


def signal_pair(theta, phi):
    # rows: gamma_x, cols: gamma_y
    gx = COS_G[:, None]
    gy = COS_G[None, :]
    sa = math.cos(theta) * gx + math.sin(theta) * gy
    sb = math.cos(theta + phi) * gx + math.sin(theta + phi) * gy
    return sa, sb


def inner_average(theta, phi):
    sa, sb = signal_pair(theta, phi)
    return float(np.sum(W2 * sa * sb)) / math.pi**2


def integrals(phi):
    """(bracket-squared integral, squared-product integral) at one phi."""
    lit = 0.0
    sq = 0.0
    for t, wt in zip(NODES, WEIGHTS):
        sa, sb = signal_pair(t, phi)
        prod = sa * sb
        inner = float(np.sum(W2 * prod)) / math.pi**2
        lit += wt * inner**2
        sq += wt * float(np.sum(W2 * prod * prod))
    return lit / math.pi, sq / math.pi**3


def singles():
    total = 0.0
    for t, wt in zip(NODES, WEIGHTS):
        sa, _ = signal_pair(t, 0.0)
        total += wt * float(np.sum(W2 * sa * sa))
    return total / math.pi**3


def main(out):
    s = singles()
    pair = s / 2.0
    print(f"singles_rate = {s!r}", file=sys.stderr)

    inner = []
    for theta in (0.0, 0.4, 1.1, 2.0, 3.0):
        for phi in (0.0, math.pi / 6, math.pi / 3, math.pi / 2, 2 * math.pi / 3):
            inner.append({"theta": theta, "phi": phi, "value": inner_average(theta, phi)})

    points = []
    for deg in range(0, 181, 15):
        phi = math.radians(deg)
        lit, sq = integrals(phi)
        lit_q, sq_q = integrals(phi + math.pi / 2)
        claim = 0.5 * math.sin(phi) ** 2
        rates = {
            "literal": lit / pair,
            "square_before_phase_average": sq / pair,
            "pair_rate_normalized": lit / (2.0 * lit + 2.0 * lit_q),
        }
        points.append({
            "phi_deg": deg,
            "phi": phi,
            "literal_integral": lit,
            "square_integral": sq,
            "literal_integral_orthogonal": lit_q,
            "square_integral_orthogonal": sq_q,
            "claim": claim,
            "rates": rates,
            "residuals": {k: v - claim for k, v in rates.items()},
        })
        print(f"phi={deg:3d}  {rates}", file=sys.stderr)

    doc = {
        "rule": "trapezoid",
        "nodes_per_dim": N,
        "singles_rate": s,
        "pair_rate": pair,
        "inner_phase_average": inner,
        "points": points,
    }
    Path(out).write_text(json.dumps(doc, indent=1) + "\n")


if __name__ == "__main__":
    default = Path(__file__).resolve().parents[1] / "fixtures" / "oracle_values.json"
    main(sys.argv[1] if len(sys.argv) > 1 else default)
