import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phidetect import (
    DomainError,
    EndpointSide,
    PhiIndex,
    Regime,
    SortedPValueSample,
    kappa,
    phi,
    sup_statistic,
    sup_statistic_values,
    z_sup,
)

S_GRID = [-2.0, -1.0, 0.0, 0.5, 1.0, 2.0, 3.0]

# dyadic rationals k/2^53: 1-u is exact in double precision, which makes the
# (u,v) -> (1-u,1-v) symmetry testable bit-for-bit
dyadic01 = st.integers(min_value=1, max_value=2**53 - 1).map(lambda k: k / 2.0**53)


# --------------------------------------------------------------------------
# generator phi_s


def test_phi_closed_form_values():
    # phi_{1/2}(x) = 2*(sqrt(x)-1)^2, phi_2(x) = (x-1)^2/2, phi_{-1}(x) = (x+1/x-2)/2
    assert phi(0.5, 4.0) == pytest.approx(2.0, rel=1e-14)
    assert phi(2.0, 3.0) == pytest.approx(2.0, rel=1e-14)
    assert phi(-1.0, 0.5) == pytest.approx(0.25, rel=1e-14)
    assert phi(0.0, math.e) == pytest.approx(math.e - 2.0, rel=1e-14)
    assert phi(1.0, math.e) == pytest.approx(1.0, rel=1e-14)


def test_phi_is_zero_at_one_for_all_s():
    for s in S_GRID:
        assert phi(s, 1.0) == 0.0


def test_phi_at_zero_right_limits():
    assert phi(2.0, 0.0) == pytest.approx(0.5, rel=1e-15)  # 1/s
    assert phi(0.5, 0.0) == pytest.approx(2.0, rel=1e-15)
    assert phi(1.0, 0.0) == 1.0
    assert phi(0.0, 0.0) == math.inf
    assert phi(-1.0, 0.0) == math.inf


def test_phi_rejects_negative_and_nan():
    with pytest.raises(DomainError):
        phi(2.0, -0.5)
    with pytest.raises(DomainError):
        phi(2.0, math.nan)


def test_phi_vectorized_matches_scalar():
    x = np.array([0.0, 0.2, 1.0, 3.7])
    for s in S_GRID:
        vec = phi(s, x)
        assert vec.shape == x.shape
        for xi, vi in zip(x, vec):
            assert phi(s, float(xi)) == vi


def test_phi_nonnegative_on_grid():
    x = np.geomspace(1e-8, 1e4, 300)
    for s in S_GRID:
        vals = phi(s, x)
        assert np.all(vals >= 0.0)


def test_regime_switch_thresholds():
    assert PhiIndex(0.0).regime is Regime.LIMIT_S0
    assert PhiIndex(9e-9).regime is Regime.LIMIT_S0
    assert PhiIndex(2e-8).regime is Regime.GENERIC
    assert PhiIndex(1.0).regime is Regime.LIMIT_S1
    assert PhiIndex(1.0 + 9e-9).regime is Regime.LIMIT_S1
    assert PhiIndex(2.0).regime is Regime.GENERIC
    with pytest.raises(DomainError):
        PhiIndex(math.inf)


def test_phi_continuous_in_s_near_limits():
    # values just outside the branch window agree with the closed forms
    for x in (0.3, math.e, 7.0):
        assert abs(phi(2e-8, x) - phi(0.0, x)) < 1e-6
        assert abs(phi(1.0 + 2e-8, x) - phi(1.0, x)) < 1e-6
    # inside the window the closed form is used verbatim
    assert phi(1e-12, math.e) == phi(0.0, math.e)


# --------------------------------------------------------------------------
# two-point divergence K_s

# independently derived reference values at (u, v) = (0.5, 0.25):
#   s=2   : (u-v)^2 / (2 v (1-v)) = 1/6
#   s=1   : 0.5*ln2 + 0.5*ln(2/3) = 0.5*ln(4/3)
#   s=0   : -(0.25*ln2 + 0.75*ln(2/3))
#   s=-1  : 0.25*phi(2) + 0.75*phi(2/3), phi_{-1}(x) = (x+1/x-2)/2 -> 1/8
#   s=3   : (x^3-3x+2)/6 pieces -> 11/54
KAPPA_HALF_QUARTER = {
    2.0: 1.0 / 6.0,
    1.0: 0.14384103622589046,
    0.0: 0.13081203594113696,
    0.5: 0.13629669484372685,
    -1.0: 0.125,
    3.0: 11.0 / 54.0,
    0.25: 0.13331583222365925,
}


def test_kappa_reference_values():
    for s, expected in KAPPA_HALF_QUARTER.items():
        assert kappa(s, 0.5, 0.25) == pytest.approx(expected, rel=1e-13)
    assert kappa(2.0, 0.75, 0.5) == pytest.approx(0.125, rel=1e-13)
    assert kappa(0.5, 0.1, 0.9) == pytest.approx(1.6, rel=1e-13)


def test_kappa_zero_iff_equal():
    for s in S_GRID:
        assert kappa(s, 0.3, 0.3) == 0.0
        assert kappa(s, 1e-9, 1e-9) == 0.0
        assert kappa(s, 0.3, 0.30001) > 0.0


def test_kappa_domain_errors():
    for bad in (0.0, 1.0, -0.2, 1.7):
        with pytest.raises(DomainError):
            kappa(2.0, bad, 0.5)
        with pytest.raises(DomainError):
            kappa(2.0, 0.5, bad)


def test_kappa_hc_closed_form():
    rng = np.random.default_rng(2718)
    u = rng.uniform(0.01, 0.99, size=200)
    v = rng.uniform(0.01, 0.99, size=200)
    expected = (u - v) ** 2 / (2.0 * v * (1.0 - v))
    np.testing.assert_allclose(kappa(2.0, u, v), expected, rtol=1e-12)


@given(u=dyadic01, v=dyadic01, s=st.sampled_from(S_GRID))
@settings(max_examples=200, deadline=None)
def test_kappa_symmetry_exact_on_dyadics(u, v, s):
    # complements of k/2^53 are exact, so the symmetry must hold bit-for-bit
    assert kappa(s, u, v) == kappa(s, 1.0 - u, 1.0 - v)


@given(
    u=st.floats(min_value=1e-6, max_value=1.0 - 1e-6),
    v=st.floats(min_value=1e-6, max_value=1.0 - 1e-6),
    s=st.sampled_from(S_GRID),
)
@settings(max_examples=200, deadline=None)
def test_kappa_symmetry_approx_generic(u, v, s):
    if abs(u - v) < 1e-3:
        return  # K -> 0 there; relative comparison is meaningless
    a = kappa(s, u, v)
    b = kappa(s, 1.0 - u, 1.0 - v)
    assert b == pytest.approx(a, rel=1e-9)


@given(
    u=st.floats(min_value=0.05, max_value=0.95),
    v1=st.floats(min_value=0.05, max_value=0.95),
    v2=st.floats(min_value=0.05, max_value=0.95),
    lam=st.floats(min_value=0.0, max_value=1.0),
    s=st.sampled_from(S_GRID),
)
@settings(max_examples=200, deadline=None)
def test_kappa_convex_in_v(u, v1, v2, lam, s):
    mid = lam * v1 + (1.0 - lam) * v2
    if not 0.0 < mid < 1.0:
        return
    lhs = kappa(s, u, mid)
    rhs = lam * kappa(s, u, v1) + (1.0 - lam) * kappa(s, u, v2)
    assert lhs <= rhs + 1e-12 * max(1.0, abs(rhs))


def test_kappa_continuous_in_s_at_limit_points():
    for u, v in [(0.3, 0.6), (0.9, 0.2), (0.01, 0.5)]:
        for s0 in (0.0, 1.0):
            base = kappa(s0, u, v)
            assert abs(kappa(s0 + 2e-8, u, v) - base) < 1e-6
            assert abs(kappa(s0 - 2e-8, u, v) - base) < 1e-6


def test_kappa_taylor_agreement_with_s2_as_u_approaches_v():
    # K_s(v+d, v) / K_2(v+d, v) -> 1 as d -> 0, deviation shrinking with d.
    # v=0.5 is avoided: the leading (third-order) deviation term is
    # proportional to 1/v^2 - 1/(1-v)^2 and vanishes there, leaving nothing
    # measurable above roundoff at d=1e-7.
    for s in (-1.0, 0.0, 0.5, 1.0, 3.0):
        for v in (0.1, 0.3, 0.8):
            devs = []
            for d in (1e-3, 1e-5, 1e-7):
                ratio = kappa(s, v + d, v) / kappa(2.0, v + d, v)
                devs.append(abs(ratio - 1.0))
            assert devs[0] > devs[1] > devs[2]
            assert devs[2] < 1e-5


def test_kappa_small_gap_relative_accuracy():
    # the expm1/log1p form keeps full relative accuracy down to tiny jumps
    for d in (1e-10, 1e-13):
        got = kappa(2.0, 0.5 + d, 0.5)
        assert got == pytest.approx(d * d / (2.0 * 0.25), rel=1e-4)


# --------------------------------------------------------------------------
# sup statistic


def test_sup_worked_example_quarter_threequarter():
    sample = SortedPValueSample.from_values([0.25, 0.75])
    stat = sup_statistic(sample, 2.0)
    assert stat.value == pytest.approx(1.0 / 6.0, rel=1e-14)
    assert stat.argmax_index == 1
    # both endpoints tie by symmetry; ties resolve to the left endpoint
    assert stat.argmax_side is EndpointSide.LEFT
    assert 2 * stat.value == pytest.approx(1.0 / 3.0, rel=1e-14)


def test_sup_positive_off_diagonal():
    # shifted grid keeps u != v everywhere, so the statistic is strictly positive
    n = 10
    vals = (np.arange(1, n + 1) - 0.3) / n
    sample = SortedPValueSample(vals)
    for s in S_GRID:
        assert sup_statistic(sample, s).value > 0.0


def test_sup_needs_two_observations():
    single = SortedPValueSample(np.array([0.4]))
    with pytest.raises(DomainError):
        sup_statistic(single, 2.0)


def test_sample_validation():
    with pytest.raises(DomainError):
        SortedPValueSample(np.array([0.5, 0.25]))  # unsorted
    with pytest.raises(DomainError):
        SortedPValueSample(np.array([0.0, 0.5]))
    with pytest.raises(DomainError):
        SortedPValueSample(np.array([0.5, 1.0]))
    with pytest.raises(DomainError):
        SortedPValueSample(np.array([0.2, np.nan]))
    with pytest.raises(DomainError):
        SortedPValueSample(np.empty(0))
    sample = SortedPValueSample.from_values([0.7, 0.2, 0.4])
    assert sample.n == 3
    assert list(sample.values) == [0.2, 0.4, 0.7]
    with pytest.raises(ValueError):
        sample.values[0] = 0.5  # frozen storage


def test_sample_allows_ties():
    sample = SortedPValueSample(np.array([0.3, 0.3, 0.8]))
    for s in S_GRID:
        assert np.isfinite(sup_statistic(sample, s).value)


def test_multi_s_matches_single(rng=np.random.default_rng(515)):
    for n in (2, 5, 40, 300):
        sample = SortedPValueSample.from_values(rng.uniform(size=n))
        batch = sup_statistic_values(sample, S_GRID)
        singles = [sup_statistic(sample, s).value for s in S_GRID]
        np.testing.assert_array_equal(batch, np.asarray(singles))


def _brute_force_sup(values: np.ndarray, s: float, points_per_interval: int = 4097) -> float:
    """Textbook-formula grid maximization, written as an independent oracle.

    Uses K_s = (1 - u^s v^(1-s) - (1-u)^s (1-v)^(1-s)) / (s(1-s)) for generic
    s and the direct log forms at s in {0, 1}; no shared code with the
    endpoint method beyond numpy.
    """
    n = values.size
    best = -np.inf
    for i in range(n - 1):
        u = (i + 1) / n
        grid = np.linspace(values[i], values[i + 1], points_per_interval)
        if s == 0.0:
            k = grid * np.log(grid / u) + (1.0 - grid) * np.log((1.0 - grid) / (1.0 - u))
        elif s == 1.0:
            k = u * np.log(u / grid) + (1.0 - u) * np.log((1.0 - u) / (1.0 - grid))
        else:
            ab = u**s * grid ** (1.0 - s) + (1.0 - u) ** s * (1.0 - grid) ** (1.0 - s)
            k = (1.0 - ab) / (s * (1.0 - s))
        best = max(best, float(np.max(k)))
    return best


def test_sup_matches_brute_force_small_samples():
    rng = np.random.default_rng(90210)
    for _ in range(25):
        n = int(rng.integers(2, 9))
        sample = SortedPValueSample.from_values(rng.uniform(0.001, 0.999, size=n))
        for s in S_GRID:
            exact = sup_statistic(sample, s).value
            brute = _brute_force_sup(sample.values, s)
            assert brute == pytest.approx(exact, rel=1e-6, abs=1e-12)


# --------------------------------------------------------------------------
# weighted empirical-process sup and the higher-criticism identity


def test_z_sup_single_jump_hand_value():
    sample = SortedPValueSample(np.array([0.5]))
    assert z_sup(sample, 0.1, 0.9) == pytest.approx(1.0, rel=1e-15)


def test_z_sup_domain():
    sample = SortedPValueSample(np.array([0.5]))
    with pytest.raises(DomainError):
        z_sup(sample, 0.9, 0.1)
    with pytest.raises(DomainError):
        z_sup(sample, 0.0, 0.9)


def test_z_sup_duplication_scales_by_sqrt2():
    rng = np.random.default_rng(77)
    vals = np.sort(rng.uniform(0.05, 0.95, size=20))
    s1 = SortedPValueSample(vals)
    s2 = SortedPValueSample(np.sort(np.concatenate([vals, vals])))
    z1 = z_sup(s1, 0.01, 0.99)
    z2 = z_sup(s2, 0.01, 0.99)
    assert z2 == pytest.approx(math.sqrt(2.0) * z1, rel=1e-14)


def test_higher_criticism_identity():
    # n*S_n(2) == z_sup(sample, X_(1), X_(n))^2 / 2 on the matched sup range
    rng = np.random.default_rng(424242)
    for _ in range(30):
        n = int(rng.integers(2, 101))
        sample = SortedPValueSample.from_values(rng.uniform(size=n))
        lhs = n * sup_statistic(sample, 2.0).value
        z = z_sup(sample, float(sample.values[0]), float(sample.values[-1]))
        assert lhs == pytest.approx(0.5 * z * z, rel=1e-12)
