import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from equibound import bounds as B
from equibound import SampleBatch, estimate_ordered_stats, estimate_mpe
from equibound._validation import InvalidStatisticsError

LN2, LN3 = math.log(2), math.log(3)


def H(*p):
    return -sum(x * math.log(x) for x in p if x > 0)


# -- Fano family --------------------------------------------------------------


@pytest.mark.parametrize(
    "pe, M, expected", [(0.0, 4, 0.0), (0.5, 2, LN2), (0.5, 5, LN2 + 0.5 * math.log(4))]
)
def test_fano_examples(pe, M, expected):
    assert B.fano_ee_upper(pe, M) == pytest.approx(expected, abs=1e-15)


def test_fano_input_errors():
    for pe in (-0.1, 1.1, math.nan):
        with pytest.raises(ValueError):
            B.fano_ee_upper(pe, 3)
    with pytest.raises(ValueError):
        B.fano_ee_upper(0.2, 1)


def test_fano1_examples():
    assert B.fano1_ee_upper(0.3, 0.3, 2) == pytest.approx(H(0.3, 0.7), abs=1e-15)
    assert B.fano1_ee_upper(0.3, 0.3, 2) == pytest.approx(0.610864, abs=1e-6)
    assert B.fano1_ee_upper(0.0, 0.0, 5) == 0.0
    v = B.fano1_ee_upper(0.4, 0.25, 4)
    assert v == pytest.approx(H(0.6, 0.25, 0.15) + 0.15 * LN2, abs=1e-15)
    assert v == pytest.approx(1.0416, abs=1e-4)
    # H(0.4) + 0.4 ln 3; the commonly quoted 1.1132 is off in the fourth decimal
    assert B.fano_ee_upper(0.4, 4) == pytest.approx(H(0.4, 0.6) + 0.4 * LN3, abs=1e-15)
    assert B.fano_ee_upper(0.4, 4) == pytest.approx(1.1125, abs=1e-4)
    assert v < B.fano_ee_upper(0.4, 4)
    with pytest.raises(ValueError):
        B.fano1_ee_upper(0.2, 0.3, 4)


def test_fano1_m2_needs_dp1_equal_pe():
    # with two hypotheses all error mass sits on p**; anything else is inconsistent
    with pytest.raises(InvalidStatisticsError):
        B.fano1_ee_upper(0.3, 0.2, 2)


def test_fano2_examples():
    assert B.fano2_ee_upper(0.4, 0.25, 0.15, 3) == pytest.approx(H(0.6, 0.25, 0.15), abs=1e-15)
    assert B.fano2_ee_upper(0.4, 0.25, 0.15, 3) == pytest.approx(0.9377, abs=1e-4)
    # with no third-largest mass all error sits on p**, as in Fano1 with pe = dp1
    assert B.fano2_ee_upper(0.3, 0.3, 0.0, 6) == pytest.approx(B.fano1_ee_upper(0.3, 0.3, 6))
    with pytest.raises(ValueError):
        B.fano2_ee_upper(0.5, 0.1, 0.2, 5)
    with pytest.raises(ValueError):
        B.fano2_ee_upper(0.3, 0.2, 0.15, 5)


@pytest.mark.parametrize("pe, dp1, M", [(0.5, 0.2, 5), (0.7, 0.3, 8), (0.2, 0.1, 3)])
def test_fano2_reduces_to_fano1_at_even_spread(pe, dp1, M):
    # Fano1 spreads pe - dp1 evenly over M - 2 cells; Fano2 at that dp2 is the same PMF
    dp2 = (pe - dp1) / (M - 2)
    assert B.fano2_ee_upper(pe, dp1, dp2, M) == pytest.approx(
        B.fano1_ee_upper(pe, dp1, M), abs=1e-14
    )
    if M == 3:
        return  # dp2 is pinned to pe - dp1
    # and that is the maximum over dp2
    grid = np.linspace(0, min(dp1, pe - dp1), 201)
    vals = [B.fano2_ee_upper(pe, dp1, g, M) for g in grid]
    assert max(vals) <= B.fano1_ee_upper(pe, dp1, M) + 1e-12


def _admissible_tuples(n, seed):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        M = int(rng.integers(3, 12))
        # expectations of ordered entries of random PMFs are always admissible
        P = -np.sort(-rng.dirichlet(rng.uniform(0.2, 3, size=M), size=int(rng.integers(1, 6))))
        s = P.mean(axis=0)
        out.append((1 - s[0], s[1], s[2], M))
    return out


def test_fano_chain_on_random_tuples():
    for pe, dp1, dp2, M in _admissible_tuples(1000, 3):
        f, f1, f2 = B.fano_ee_upper(pe, M), B.fano1_ee_upper(pe, dp1, M), B.fano2_ee_upper(
            pe, dp1, dp2, M
        )
        assert f2 <= f1 + 1e-12 and f1 <= f + 1e-12


# -- FM family ----------------------------------------------------------------


def test_fm_examples():
    assert B.fm_ee_lower(0.0) == 0.0
    assert B.fm_ee_lower(0.5) == pytest.approx(LN2)
    assert B.fm_ee_lower(1 - 1 / math.e) == pytest.approx(1.0, abs=1e-15)
    with pytest.warns(RuntimeWarning):
        assert B.fm_ee_lower(1.0) == math.inf


def test_cfm_examples():
    assert B.cfm_phi_star(0.0, 4) == 0.0
    assert B.cfm_phi_star(0.5, 4) == pytest.approx(LN2, abs=1e-15)
    assert B.cfm_phi_star(2 / 3, 4) == pytest.approx(LN3, abs=1e-15)
    for n in range(1, 9):
        assert B.cfm_phi_star((n - 1) / n, 10) == pytest.approx(math.log(n), abs=1e-12)


def test_cfm_clamps_with_warning():
    with pytest.warns(B.ClampWarning):
        v = B.cfm_phi_star(0.8, 4)
    assert v == pytest.approx(math.log(4), abs=1e-12)


def test_cfm_dominates_fm():
    for M in (2, 3, 8, 32):
        grid = np.linspace(0, (M - 1) / M, 10_000)
        diff = [B.cfm_phi_star(u, M) - B.fm_ee_lower(u) for u in grid]
        assert min(diff) >= -1e-12


def test_cfm_is_convex_and_continuous():
    M = 8
    grid = np.linspace(0, (M - 1) / M, 4001)
    vals = np.array([B.cfm_phi_star(u, M) for u in grid])
    assert np.min(np.diff(vals, 2)) >= -1e-12
    for n in range(2, M):
        b = (n - 1) / n
        assert abs(B.cfm_phi_star(b - 1e-13, M) - B.cfm_phi_star(b + 1e-13, M)) < 1e-10


def test_fmbn_examples():
    assert B.fmbn_ee_lower(0.3, []) == pytest.approx(B.fm_ee_lower(0.3), abs=1e-15)
    assert B.fmbn_ee_lower(0.5, [0.1]) == pytest.approx(-math.log(0.4))
    assert B.fmbn_ee_lower(0.5, [0.1]) > LN2
    with pytest.raises(InvalidStatisticsError):
        B.fmbn_ee_lower(0.6, [0.3, 0.2])
    with pytest.raises(InvalidStatisticsError):
        B.fmbn_ee_lower(0.3, [-0.1])


def test_fmbn_full_depth_is_sum_sq(mixed_batch):
    st = estimate_ordered_stats(mixed_batch, mixed_batch.M - 1)
    pe = estimate_mpe(mixed_batch).mean
    v = B.fmbn_ee_lower(pe, [d.mean for d in st.deltas])
    assert v == pytest.approx(-math.log(st.sum_sq.mean), abs=1e-10)


def test_capacity_examples():
    assert B.capacity_mi_upper(0.25, 4)[0] == pytest.approx(0.0, abs=1e-15)
    assert B.capacity_mi_upper(1.0, 4)[0] == pytest.approx(math.log(4))
    mi, snr = B.capacity_mi_upper(0.68, 2)
    assert mi == pytest.approx(math.log(1.36)) and mi == pytest.approx(0.3075, abs=1e-4)
    assert snr == pytest.approx(0.36)
    with pytest.raises(ValueError, match="uniform prior"):
        B.capacity_mi_upper(0.5, 2, uniform=False)
    with pytest.raises(InvalidStatisticsError):
        B.capacity_mi_upper(0.1, 4)


def test_capacity_equals_h_minus_sumsq_form():
    M = 6
    for q in np.linspace(1 / M, 1, 11):
        assert math.log(M) - B.capacity_mi_upper(q, M)[0] == pytest.approx(-math.log(q), abs=1e-12)


def test_delta_examples():
    assert B.delta_ee_lower(0.0, 1.0) == 0.0
    assert B.delta_ee_lower(0.3, 0.7) == pytest.approx(-2 * math.log(0.7))
    assert B.delta_ee_lower(0.5, 0.6) == pytest.approx(LN2 + math.log(5 / 3))
    assert B.delta_ee_lower(0.5, 0.6) == pytest.approx(1.2040, abs=1e-4)
    for pe, term in [(0.2, 0.9), (0.55, 0.61), (0.01, 0.995)]:
        assert B.delta_ee_lower_split(pe, term - (1 - pe)) == pytest.approx(
            B.delta_ee_lower(pe, term), abs=1e-10
        )
    with pytest.raises(InvalidStatisticsError):
        B.delta_ee_lower(0.2, 0.0)


# -- two-posterior bound ------------------------------------------------------


def test_phi_two_examples():
    assert B.phi_two(0.5, 0.5, 4) == pytest.approx(LN2, abs=1e-15)
    # vertex C: PMF {1/3, 1/3, 1/3}
    assert B.phi_two(1 / 3, 1 / 3, 3) == pytest.approx(H(1 / 3, 2 / 3) + 2 / 3 * LN2, abs=1e-15)
    assert B.phi_two(1 / 3, 1 / 3, 3) == pytest.approx(LN3, abs=1e-15)
    assert B.phi_two(0.6, 0.3, 5) == pytest.approx(H(0.6, 0.3, 0.1), abs=1e-15)
    assert B.phi_two(0.6, 0.3, 5) == pytest.approx(0.897946, abs=1e-6)
    assert B.phi_two(1.0, 0.0, 4) == 0.0


def test_phi_two_at_v_zero_uses_finite_m():
    u, M = 0.7, 5
    expected = -u * math.log(u) - (1 - u) * math.log((1 - u) / (M - 1))
    assert B.phi_two(u, 0.0, M) == pytest.approx(expected, abs=1e-14)


def test_phi_two_rejects_outside_region():
    for u, v in [(0.4, 0.5), (0.7, 0.5), (1.2, 0.0), (0.5, -0.1)]:
        with pytest.raises(ValueError):
            B.phi_two(u, v, 4)


def test_phi_two_array_matches_scalar():
    rng = np.random.default_rng(2)
    P = -np.sort(-rng.dirichlet(np.ones(6), size=2000))
    vals, proj = B.phi_two_array(P[:, 0], P[:, 1], 6)
    ref = [B.phi_two(u, v, 6) for u, v in P[:, :2]]
    np.testing.assert_allclose(vals, ref, rtol=0, atol=1e-13)
    assert not proj.any()


def test_phi_two_lower_bounds_entropy():
    rng = np.random.default_rng(4)
    for M in (2, 3, 5, 9):
        P = -np.sort(-rng.dirichlet(np.full(M, 0.7), size=3000))
        vals, _ = B.phi_two_array(P[:, 0], P[:, 1], M)
        ent = -np.sum(np.where(P > 0, P * np.log(np.where(P > 0, P, 1)), 0), axis=1)
        assert np.all(vals <= ent + 1e-12)


def test_phi_two_tight_on_minimising_pmf():
    b = SampleBatch.from_posteriors(np.tile([0.6, 0.3, 0.1], (4, 1)))
    s = b.sorted_posteriors
    vals, _ = B.phi_two_array(s[:, 0], s[:, 1], 3)
    assert vals.mean() == pytest.approx(H(0.6, 0.3, 0.1), abs=1e-15)


def _branch_value(u, v, n):
    # h(u, n v) + n v ln n written out: PMF {u, v (n times), 1 - u - n v}
    return -B._xlogx(u) - n * B._xlogx(v) - B._xlogx(max(1 - u - n * v, 0.0))


def branch_mismatch(M=12, points=400):
    """Largest gap between neighbouring branches on every boundary v = (1-u)/n."""
    worst = 0.0
    for n in range(2, M):
        for u in np.linspace(1 / M, 1 - 1e-6, points):
            v = (1 - u) / n
            if v > min(u, 1 - u) or v < (1 - u) / (M - 1):
                continue
            worst = max(worst, abs(_branch_value(u, v, n) - _branch_value(u, v, n - 1)))
            worst = max(worst, abs(B.phi_two(u, v * (1 + 1e-13), M) - B.phi_two(u, v * (1 - 1e-13), M)))
    return worst


def test_phi_two_branch_continuity():
    assert branch_mismatch() < 1e-10


def test_project_uv():
    assert B.project_uv(0.6, 0.3, 4) == (0.6, 0.3, False)
    u, v, p = B.project_uv(0.6, 0.05, 4)
    assert p and v == pytest.approx(0.4 / 3)
    assert B.project_uv(0.1, 0.05, 4)[:2] == (0.25, 0.25)


# -- convex minorant ----------------------------------------------------------


def test_convex_phi_vertices():
    assert B.convex_phi(1.0, 0.0, 5) == 0.0
    assert B.convex_phi(0.5, 0.5, 5) == pytest.approx(LN2, abs=1e-15)
    assert B.convex_phi(0.75, 0.25, 5) == pytest.approx(0.5 * LN2, abs=1e-15)
    for k in range(2, 9):
        assert B.phi_vertex(k) == pytest.approx(math.log(k), abs=1e-14)
        assert B.convex_phi(1 / k, 1 / k, 8) == pytest.approx(math.log(k), abs=1e-12)


def _triangle_grid(M, n=60):
    pts = []
    for u in np.linspace(1 / M, 1, n):
        lo = (1 - u) / (M - 1)
        hi = min(u, 1 - u)
        if hi < lo:
            continue
        for v in np.linspace(lo, hi, n):
            pts.append((u, v))
    return pts


@pytest.mark.parametrize("M", [2, 3, 4, 8, 32])
def test_convex_phi_is_minorant(M):
    for u, v in _triangle_grid(M):
        assert B.convex_phi(u, v, M) <= B.phi_two(u, v, M) + 1e-12


@pytest.mark.parametrize("M", [3, 8, 32])
def test_convex_phi_beats_cfm(M):
    for u, v in _triangle_grid(M):
        assert B.convex_phi(u, v, M) >= B.cfm_phi_star(1 - u, M) - 1e-10


def test_convex_phi_diagonal_convex():
    M = 16
    grid = np.linspace(1 / M, 0.5, 1000)
    vals = np.array([B.convex_phi(t, t, M) for t in grid])
    assert np.min(np.diff(vals, 2)) >= -1e-12


# -- MPE upper bounds ---------------------------------------------------------


def test_mpe_upper_examples():
    assert B.mpe_upper_fm(0.0) == 0.0
    assert B.mpe_upper_fm(math.log(4)) == pytest.approx(0.75)
    assert B.mpe_upper_fm(LN2) == pytest.approx(0.5)
    assert B.mpe_upper_lambda(0.8, 0.8, 2) == pytest.approx(B.mpe_upper_fm(0.8))
    assert B.mpe_upper_lambda(0.8, 0.3, 1e12) == pytest.approx(B.mpe_upper_fm(0.8), abs=1e-10)
    assert B.mpe_upper_lambda(0.8, 0.3, math.inf) == B.mpe_upper_fm(0.8)
    v = B.mpe_upper_lambda(LN2, 0.5, 2)
    assert v == pytest.approx(1 - math.exp(-(LN2 / 2 + 0.25)), abs=1e-15)
    assert 0.4492 < v < 0.4494 < 0.5  # 0.44930..., below the FM value
    assert B.mpe_upper_integral(math.log(5)) == pytest.approx(0.8)
    assert B.mpe_upper_integral(0.0) == 0.0
    assert B.mpe_upper_bn(-0.8) == pytest.approx(B.mpe_upper_fm(0.8))
    assert B.mpe_upper_bn(-0.30466) == pytest.approx(0.2626, abs=1e-4)
    with pytest.raises(ValueError):
        B.mpe_upper_lambda(0.5, 0.2, 1.0)
    with pytest.raises(InvalidStatisticsError):
        B.mpe_upper_lambda(0.5, 0.7, 2.0)


# -- purity -------------------------------------------------------------------


@settings(max_examples=100, deadline=None)
@given(st.floats(0.0, 0.7), st.floats(0.0, 1.0))
def test_bounds_are_pure(pe, frac):
    dp1 = frac * pe
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        a = (B.fano_ee_upper(pe, 4), B.fano1_ee_upper(pe, dp1, 4), B.cfm_phi_star(pe, 4))
        b = (B.fano_ee_upper(pe, 4), B.fano1_ee_upper(pe, dp1, 4), B.cfm_phi_star(pe, 4))
    assert a == b
