"""Closed-form bounds on equivocation and minimum probability of error.

All values are in nats. These functions are pure: they take exact (or Monte
Carlo estimated) scalar statistics and return the bound. Error propagation
and report assembly live in :mod:`equibound.report`.

Two-posterior geometry: points are ``(u, v) = (p*, p**)``. For a finite
number of hypotheses M the admissible set is the triangle with vertices
A = (1, 0), B = (1/2, 1/2) and V_M = (1/M, 1/M); inputs that fall below the
edge A-V_M (only possible through Monte Carlo noise) are projected onto it.
"""

import math
import warnings

import numpy as np

from ._validation import (
    REGION_TOL,
    InvalidStatisticsError,
    check_positive_int,
    check_probability,
)


class ClampWarning(UserWarning):
    """An input was slightly outside its admissible range and was moved onto it."""


def _xlogx(p):
    return p * math.log(p) if p > 0 else 0.0


def binary_entropy(p):
    return -_xlogx(p) - _xlogx(1.0 - p)


def ternary_entropy(p, q):
    """Entropy of the PMF {p, q, 1 - p - q}."""
    return -_xlogx(p) - _xlogx(q) - _xlogx(max(1.0 - p - q, 0.0))


def _check_M(M, minimum=2):
    return check_positive_int(M, "M", minimum=minimum)


# -- Fano family (upper bounds on equivocation) -------------------------------


def fano_ee_upper(pe, M):
    """Fano: H(pe) + pe ln(M - 1)."""
    M = _check_M(M)
    pe = check_probability(pe, "pe")
    return binary_entropy(pe) + pe * math.log(M - 1)


def _spread_term(mass, cells, name):
    # -mass * ln(mass / cells): entropy of ``mass`` spread evenly over ``cells``
    if mass <= REGION_TOL:
        return 0.0
    if cells < 1:
        raise InvalidStatisticsError(
            f"{name}: residual mass {mass:g} but no hypotheses left to hold it"
        )
    return -_xlogx(mass) + mass * math.log(cells)


def fano1_ee_upper(pe, dp1, M):
    """Fano bound refined by the mean second-largest posterior ``dp1``."""
    M = _check_M(M)
    pe = check_probability(pe, "pe")
    dp1 = check_probability(dp1, "dp1")
    if dp1 > pe + REGION_TOL:
        raise ValueError(f"dp1 ({dp1:g}) cannot exceed pe ({pe:g})")
    dp1 = min(dp1, pe)
    return -_xlogx(1.0 - pe) - _xlogx(dp1) + _spread_term(pe - dp1, M - 2, "fano1")


def fano2_ee_upper(pe, dp1, dp2, M):
    """Fano bound refined by the mean second- and third-largest posteriors."""
    M = _check_M(M)
    pe = check_probability(pe, "pe")
    dp1 = check_probability(dp1, "dp1")
    dp2 = check_probability(dp2, "dp2")
    if dp2 > dp1 + REGION_TOL or dp1 + dp2 > pe + REGION_TOL:
        raise ValueError(
            f"need dp2 <= dp1 and dp1 + dp2 <= pe, got pe={pe:g} dp1={dp1:g} dp2={dp2:g}"
        )
    rest = max(pe - dp1 - dp2, 0.0)
    return (
        -_xlogx(1.0 - pe)
        - _xlogx(dp1)
        - _xlogx(dp2)
        + _spread_term(rest, M - 3, "fano2")
    )


# -- Feder-Merhav family (lower bounds on equivocation) -----------------------


def fm_ee_lower(pe):
    """-ln(1 - pe); +inf when pe = 1."""
    pe = check_probability(pe, "pe")
    if pe == 1.0:
        warnings.warn("pe = 1 gives an infinite FM bound", RuntimeWarning, stacklevel=2)
        return math.inf
    return -math.log1p(-pe)


def cfm_phi_star(u, M):
    """Piecewise-linear convex FM bound as a function of the MPE ``u``.

    Segment n (n = 1 .. M-1) covers (n-1)/n <= u <= n/(n+1) with slope
    n(n+1) ln((n+1)/n) and value ln n at its left end.
    """
    M = _check_M(M)
    u = check_probability(u, "u")
    top = (M - 1) / M
    if u > top:
        if u > top + REGION_TOL:
            warnings.warn(
                f"MPE {u:g} exceeds (M-1)/M = {top:g}; clamped", ClampWarning, stacklevel=2
            )
        u = top
    # segment index: largest n with (n-1)/n <= u, i.e. n = floor(1/(1-u))
    n = min(int(math.floor(1.0 / (1.0 - u))), M - 1) if u < 1 else M - 1
    n = max(n, 1)
    if u < (n - 1) / n:  # floor rounding at a breakpoint
        n -= 1
    a = n * (n + 1) * math.log((n + 1) / n)
    return a * (u - (n - 1) / n) + math.log(n)


def fmbn_ee_lower(pe, deltas):
    """-ln(1 - pe - sum(deltas)); an empty ``deltas`` gives the plain FM bound."""
    pe = check_probability(pe, "pe")
    deltas = [float(d) for d in deltas]
    if any(d < -REGION_TOL for d in deltas):
        raise InvalidStatisticsError("delta terms must be non-negative")
    arg = 1.0 - pe - sum(deltas)
    if not arg > 0:
        raise InvalidStatisticsError(
            f"1 - pe - sum(deltas) = {arg:g} is not positive; inconsistent statistics"
        )
    return -math.log(arg)


def capacity_mi_upper(sum_sq, M, uniform=True):
    """MI upper bound ln(1 + M E[sum dp^2]) for a uniform prior.

    ``sum_sq`` is E[sum_m p(m|X)^2]. Returns ``(bound, effective_snr)``.
    """
    M = _check_M(M)
    if not uniform:
        raise ValueError(
            "the capacity form needs a uniform prior; use fmbn_ee_lower at full depth "
            "(equivalently -ln E[sum p^2]) for a general prior"
        )
    sum_sq = float(sum_sq)
    if sum_sq < 1.0 / M - REGION_TOL or sum_sq > 1.0 + REGION_TOL:
        raise InvalidStatisticsError(f"E[sum p^2] = {sum_sq:g} outside [1/M, 1]")
    excess = max(sum_sq - 1.0 / M, 0.0)
    snr = excess / (1.0 / M)  # sum_m p_m^2 = 1/M for a uniform prior
    return math.log1p(M * excess), snr


def delta_ee_lower(pe, integral_term):
    """-ln(1 - pe) - ln(integral_term), with integral_term = E[sum p^2 / p*]."""
    pe = check_probability(pe, "pe")
    integral_term = float(integral_term)
    if not integral_term > 0:
        raise InvalidStatisticsError(f"integral term must be positive, got {integral_term:g}")
    if pe >= 1:
        raise InvalidStatisticsError("pe = 1 leaves no correct-decision mass")
    return -math.log1p(-pe) - math.log(integral_term)


def delta_ee_lower_split(pe, cross_term):
    """Same bound written with the off-diagonal part split from 1 - pe."""
    pe = check_probability(pe, "pe")
    return delta_ee_lower(pe, 1.0 - pe + float(cross_term))


# -- two-posterior refinement -------------------------------------------------


def project_uv(u, v, M):
    """Move (u, v) into the admissible triangle for M hypotheses.

    Returns ``(u, v, projected)``. Points outside the outer triangle
    0 <= v <= min(u, 1 - u) by more than the tolerance are rejected.
    """
    M = _check_M(M)
    u = float(u)
    v = float(v)
    if not (math.isfinite(u) and math.isfinite(v)):
        raise ValueError("(u, v) must be finite")
    if u < -REGION_TOL or u > 1 + REGION_TOL or v < -REGION_TOL or v > min(u, 1 - u) + REGION_TOL:
        raise ValueError(f"({u:g}, {v:g}) lies outside the allowed region 0 <= v <= min(u, 1-u)")
    cu = min(max(u, 0.0), 1.0)
    cv = min(max(v, 0.0), min(cu, 1.0 - cu))
    if cu < 1.0 / M:
        cu, cv = 1.0 / M, 1.0 / M
    cv = max(cv, (1.0 - cu) / (M - 1))
    projected = abs(cu - u) > REGION_TOL or abs(cv - v) > REGION_TOL
    return cu, cv, projected


def _branch(u, v):
    """Branch n of the two-posterior bound: (1-u)/(n+1) <= v <= (1-u)/n."""
    r = (1.0 - u) / v
    n = max(int(math.floor(r)), 1)
    # guard against floor() landing one off at an exact boundary
    if v > (1.0 - u) / n:
        n -= 1
    elif v < (1.0 - u) / (n + 1):
        n += 1
    return max(n, 1)


def phi_two(u, v, M):
    """Minimum entropy of a PMF whose two largest entries are u >= v.

    On branch n the minimiser is {u, v (n times), 1 - u - n v}, giving
    h(u, n v) + n v ln n.
    """
    u, v, _ = project_uv(u, v, M)
    if u >= 1.0:
        return 0.0
    n = _branch(u, v)
    return ternary_entropy(u, n * v) + n * v * math.log(n)


def phi_two_array(u, v, M):
    """Vectorised :func:`phi_two`; returns ``(values, projected_mask)``.

    Out-of-region points raise just as in the scalar version.
    """
    M = _check_M(M)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    bad = (u < -REGION_TOL) | (u > 1 + REGION_TOL) | (v < -REGION_TOL)
    bad |= v > np.minimum(u, 1 - u) + REGION_TOL
    bad |= ~(np.isfinite(u) & np.isfinite(v))
    if np.any(bad):
        i = np.flatnonzero(bad.ravel())[0]
        raise ValueError(
            f"({u.ravel()[i]:g}, {v.ravel()[i]:g}) lies outside the allowed region"
        )
    cu = np.clip(u, 0.0, 1.0)
    cv = np.clip(v, 0.0, np.minimum(cu, 1.0 - cu))
    low = cu < 1.0 / M
    cu = np.where(low, 1.0 / M, cu)
    cv = np.where(low, 1.0 / M, cv)
    cv = np.maximum(cv, (1.0 - cu) / (M - 1))
    proj = (np.abs(cu - u) > REGION_TOL) | (np.abs(cv - v) > REGION_TOL)

    rest = 1.0 - cu
    with np.errstate(divide="ignore", invalid="ignore"):
        n = np.floor(np.where(cv > 0, rest / cv, 1.0))
    n = np.maximum(n, 1.0)
    n = np.where(cv > rest / n, n - 1, n)
    n = np.where(cv < rest / (n + 1), n + 1, n)
    n = np.maximum(n, 1.0)
    r = np.maximum(rest - n * cv, 0.0)

    def xlogx(p):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0)), 0.0)

    vals = -xlogx(cu) - n * xlogx(cv) - xlogx(r)
    vals = np.where(cu >= 1.0, 0.0, vals)
    return vals, proj


def phi_vertex(k):
    """Two-posterior bound at the diagonal point (1/k, 1/k), k >= 2."""
    n = k - 1
    return binary_entropy(1.0 / k) + (n / k) * math.log(n)


def convex_phi(u, v, M):
    """Piecewise-linear convex minorant of :func:`phi_two` over the (u, v) triangle.

    The triangle is fanned from A = (1, 0) over the diagonal points
    V_k = (1/k, 1/k), k = 2 .. M; on triangle A V_k V_{k+1} the value is the
    barycentric interpolant of phi(A) = 0, phi(V_k), phi(V_{k+1}).
    """
    M = _check_M(M)
    u, v, _ = project_uv(u, v, M)
    if v <= 0.0:  # only the vertex A survives projection with v = 0
        return 0.0
    r = (1.0 - u) / v  # V_k sits on the ray from A with r = k - 1
    k = min(int(math.floor(r)) + 1, M - 1)
    k = max(k, 2)
    p1 = np.array([1.0 / k, 1.0 / k])
    p2 = np.array([1.0 / (k + 1), 1.0 / (k + 1)])
    a = np.array([1.0, 0.0])
    T = np.column_stack([p1 - a, p2 - a])
    t1, t2 = np.linalg.solve(T, np.array([u, v]) - a)
    return float(t1 * phi_vertex(k) + t2 * phi_vertex(k + 1))


# -- upper bounds on the MPE --------------------------------------------------


def mpe_upper_fm(ee):
    ee = float(ee)
    if ee < -REGION_TOL:
        raise ValueError(f"equivocation must be >= 0, got {ee:g}")
    return -math.expm1(-max(ee, 0.0))


def mpe_upper_lambda(ee, gee_lambda, lam=2.0):
    """1 - exp(-[(1 - 1/lam) H + H_lam / lam]) for a split point lam > 1."""
    lam = float(lam)
    if not lam > 1:
        raise ValueError(f"lambda must be > 1, got {lam!r}")
    ee = float(ee)
    gee_lambda = float(gee_lambda)
    if gee_lambda > ee + REGION_TOL:
        raise InvalidStatisticsError("the order-lambda GEE cannot exceed the equivocation")
    if math.isinf(lam):
        return mpe_upper_fm(ee)
    return -math.expm1(-((1.0 - 1.0 / lam) * ee + gee_lambda / lam))


def mpe_upper_integral(gee_integral):
    return -math.expm1(-float(gee_integral))


def mpe_upper_bn(bn):
    return -math.expm1(float(bn))
