import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eprblab.bounds import (
    REFERENCE_LIMITS,
    CapViolation,
    ChshSetting,
    LocalStrategy,
    audit_strategy,
    chsh_max,
    chsh_max_matrix,
    chsh_value,
    classical_bound,
    constant_one_strategy,
    grid_size,
    model_amplitude_strategy,
    random_deterministic_strategy,
    sign_cos_strategy,
)
from eprblab.qm import qm_correlation

SQRT2 = math.sqrt(2)


def brute_force(M):
    """max |S| over every index tuple, lexicographically smallest maximizer."""
    n = M.shape[0]
    best, arg = -1.0, None
    for a, ap, b, bp in itertools.product(range(n), repeat=4):
        s = abs(M[a, b] - M[a, bp] + M[ap, b] + M[ap, bp])
        if s > best + 1e-12:
            best, arg = s, (a, ap, b, bp)
    return best, arg


def test_chsh_value_examples():
    s = ChshSetting(0.0, math.pi / 4, math.pi / 8, 3 * math.pi / 8)
    assert chsh_value(qm_correlation, s) == pytest.approx(-2.8284271247461903, abs=1e-15)
    assert chsh_value(lambda x: 0.0, s) == 0.0
    assert chsh_value(lambda x: 1.0, s) == 2.0


angle = st.floats(-7.0, 7.0)


@given(angle, angle, angle, angle, st.floats(-3.0, 3.0), angle)
def test_chsh_value_linear_and_shift_invariant(a, ap, b, bp, alpha, offset):
    s = ChshSetting(a, ap, b, bp)
    assert abs(chsh_value(lambda x: alpha * qm_correlation(x), s) - alpha * chsh_value(qm_correlation, s)) <= 1e-12
    shifted = ChshSetting(a + offset, ap + offset, b + offset, bp + offset)
    assert abs(chsh_value(qm_correlation, shifted) - chsh_value(qm_correlation, s)) <= 1e-12


def test_canonical_setting():
    s = ChshSetting(math.pi + 0.1, -0.2, 3.0, 7.0).canonical()
    assert all(0 <= x < math.pi for x in s.as_tuple())
    with pytest.raises(ValueError):
        ChshSetting(math.nan, 0, 0, 0)


@pytest.mark.parametrize("cap, expected", [(1.0, 2.0), (SQRT2, 4.0), (2.0, 8.0)])
def test_classical_bound(cap, expected):
    assert classical_bound(cap) == pytest.approx(expected, rel=1e-15)


def test_classical_bound_exact_and_monotone():
    assert classical_bound(1) == 2
    caps = np.linspace(0.01, 5, 200)
    values = [classical_bound(c) for c in caps]
    assert all(x < y for x, y in zip(values, values[1:]))
    for bad in (0.0, -1.0):
        with pytest.raises(ValueError):
            classical_bound(bad)


def test_reference_limits():
    assert sorted(REFERENCE_LIMITS.values()) == pytest.approx([2.0, 2 * SQRT2, 4.0, 8.0], rel=1e-15)


@pytest.mark.parametrize("step", [math.pi / 7, math.pi / 7.5, 0.0, -0.1])
def test_grid_step_rejected(step):
    with pytest.raises(ValueError):
        grid_size(step)


@pytest.mark.parametrize("seed", range(6))
def test_chsh_max_matches_brute_force(seed):
    n = 8
    rng = np.random.default_rng(seed)
    table = rng.uniform(-1, 1, n)
    table = np.where(rng.random(n) < 0.3, np.round(table), table)  # force some ties
    E = lambda x: table[np.round(np.asarray(x) / (math.pi / n)).astype(int) % n]
    report = chsh_max(E, math.pi / n)
    k = np.arange(n)
    best, arg = brute_force(table[(k[:, None] - k[None, :]) % n])
    assert report.max_abs_S == pytest.approx(best, abs=1e-12)
    assert report.argmax.as_tuple() == pytest.approx(tuple(i * math.pi / n for i in arg))


@pytest.mark.parametrize("seed", range(6))
def test_chsh_max_matrix_matches_brute_force(seed):
    n = 7
    rng = np.random.default_rng(100 + seed)
    M = rng.choice([-1.0, -0.5, 0.0, 0.5, 1.0], size=(n, n))
    angles = np.arange(n) * math.pi / n
    S, setting, idx = chsh_max_matrix(M, angles)
    best, arg = brute_force(M)
    assert abs(S) == pytest.approx(best, abs=1e-12)
    assert idx == arg


def test_qm_grid_maximum():
    coarse = chsh_max(qm_correlation, math.pi / 180)
    assert abs(coarse.max_abs_S - 2 * SQRT2) < 1e-3
    assert coarse.violated and coarse.bound_used == 2.0
    fine = chsh_max(qm_correlation, math.pi / 1800)
    assert abs(fine.max_abs_S - 2 * SQRT2) < 1e-5
    assert fine.max_abs_S <= classical_bound(SQRT2)
    assert fine.exceeds == {"bell_cap_1": True, "threshold_2sqrt2": False, "cap_sqrt2": False, "cap_2": False}


def test_chsh_max_trivial_and_scaled():
    assert chsh_max(lambda x: 0.0, math.pi / 36).max_abs_S == 0.0
    half = chsh_max(lambda x: 0.5 * qm_correlation(x), math.pi / 180)
    assert abs(half.max_abs_S - SQRT2) < 1e-3


def test_chsh_max_ties_lexicographic():
    report = chsh_max(lambda x: 1.0, math.pi / 8)
    assert report.max_abs_S == 2.0
    assert report.argmax.as_tuple() == (0.0, 0.0, 0.0, 0.0)


def test_audit_constant_one():
    r = audit_strategy(constant_one_strategy(), math.pi / 36, 1000)
    assert r.max_abs_S == 2.0 and not r.violated


def test_audit_sign_cos():
    r = audit_strategy(sign_cos_strategy(), math.pi / 36, 100_000)
    assert r.max_abs_S <= 2 + 3 * r.std_error
    assert not r.violated
    assert r.observed_max_a == 1.0 and r.observed_max_b == 1.0


def test_audit_model_amplitude_strategy():
    r = audit_strategy(model_amplitude_strategy(), math.pi / 36, 100_000, seed=4)
    assert SQRT2 - 0.01 <= r.observed_max_a <= SQRT2 * (1 + 1e-12)
    # <A B> over the hidden variables is cos(a - b) / 2, so max |S| is sqrt(2)
    assert abs(r.max_abs_S - SQRT2) <= 4 * r.std_error + 0.01
    assert r.bound_used == pytest.approx(4.0)
    assert not r.exceeds["bell_cap_1"] and not r.exceeds["cap_sqrt2"]


def test_audit_deterministic():
    a = audit_strategy(model_amplitude_strategy(), math.pi / 12, 5000, seed=3)
    b = audit_strategy(model_amplitude_strategy(), math.pi / 12, 5000, seed=3)
    assert a == b


def test_cap_violation_names_offender():
    wide = LocalStrategy("too-wide", lambda ang, lam: 1.5 * np.ones((len(ang), len(lam))),
                         lambda ang, lam: np.ones((len(ang), len(lam))), 1.0,
                         lambda rng, n: rng.random(n))
    with pytest.raises(CapViolation, match=r"A\(a=0\.0, lambda="):
        audit_strategy(wide, math.pi / 8, 1000)


def test_response_never_sees_remote_setting():
    seen = []

    def response(angles, lam):
        seen.append(np.array(angles))
        return np.ones((len(angles), len(lam)))

    strategy = LocalStrategy("spy", response, response, 1.0, lambda rng, n: rng.random(n))
    audit_strategy(strategy, math.pi / 8, 1000)
    # each call gets only its own side's angles, never a setting pair
    assert all(arr.ndim == 1 for arr in seen)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_random_deterministic_strategies_respect_bell_bound(seed):
    rng = np.random.default_rng(seed)
    r = audit_strategy(random_deterministic_strategy(rng), math.pi / 12, 1000, seed=seed)
    assert r.max_abs_S <= 2 + 4 * r.std_error
    assert r.observed_max_a <= 1.0
