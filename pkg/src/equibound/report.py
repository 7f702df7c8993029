"""Assemble every bound for one batch into a comparable, canonically ordered report.

Each bound is a smooth function of a few Monte Carlo means. Its standard
error comes from the delta method: the numerical gradient of the bound
applied to the sample covariance of the per-draw columns it consumes.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import bounds as B
from ._validation import InvalidStatisticsError
from .core import entropy
from .mc import (
    MCEstimate,
    delta_integral_samples,
    draw_bn,
    draw_deltas,
    draw_gee,
    estimate_ordered_stats,
    prior_entropy,
)

LN2 = math.log(2.0)

EE_LOWER = "EE-lower"
EE_UPPER = "EE-upper"
MPE_UPPER = "MPE-upper"
EXACT = "exact"

KIND_TO_MI = {EE_LOWER: "MI-upper", EE_UPPER: "MI-lower"}

# flag vocabulary for report rows
CLAMPED = "clamped"
PROJECTED = "projected"
UNRELIABLE = "unreliable"
FAILED = "failed"
NOT_APPLICABLE = "not-applicable"
UNDEFINED = "undefined"
FLAGS = (CLAMPED, PROJECTED, UNRELIABLE, FAILED, NOT_APPLICABLE, UNDEFINED)

# share of draws that may be projected onto the (p*, p**) region before flagging
PROJECTION_FLAG_FRACTION = 1e-4

EXACT_ROWS = ("EE", "MI", "MPE")
BOUND_ROWS = (
    ("FMB", EE_LOWER),
    ("CFMB", EE_LOWER),
    ("FMB1", EE_LOWER),
    ("FMB2", EE_LOWER),
    ("FMp*p**", EE_LOWER),
    ("CFMp*p**", EE_LOWER),
    ("CapacityBound", EE_LOWER),
    ("DeltaBound", EE_LOWER),
    ("Fano", EE_UPPER),
    ("Fano1", EE_UPPER),
    ("Fano2", EE_UPPER),
    ("MPE-FM", MPE_UPPER),
    ("MPE-λ", MPE_UPPER),
    ("MPE-Integral", MPE_UPPER),
    ("MPE-Bn", MPE_UPPER),
)


@dataclass(frozen=True)
class ReportConfig:
    depth: int = None
    lam: float = 2.0
    bn_order: float = 2.0


@dataclass(frozen=True)
class BoundReport:
    """One row: a bound (or exact estimate) with its propagated error bar.

    ``value`` is in nats for entropy-valued rows and a probability for
    MPE rows.
    """

    name: str
    kind: str
    value: float
    std_error: float
    h_prior: float
    flags: tuple = ()
    inputs: dict = field(default_factory=dict, compare=False)

    @property
    def is_entropy(self):
        return self.kind in (EE_LOWER, EE_UPPER) or self.name in ("EE", "MI")

    @property
    def mi_kind(self):
        return KIND_TO_MI.get(self.kind)

    @property
    def mi_value(self):
        """MI bound implied by an equivocation bound, H(Theta) - value, in nats."""
        if self.kind in KIND_TO_MI or self.name == "EE":
            return self.h_prior - self.value
        if self.name == "MI":
            return self.value
        return None

    @property
    def fmi(self):
        mi = self.mi_value
        if mi is None:
            return None
        if self.h_prior <= 0:
            return math.nan
        return mi / self.h_prior

    def in_units(self, units):
        """``(value, std_error, unit_label)`` for ``units`` in {"bits", "nats"}."""
        if units not in ("bits", "nats"):
            raise ValueError(f"units must be 'bits' or 'nats', got {units!r}")
        if not self.is_entropy:
            return self.value, self.std_error, "probability"
        if units == "bits":
            return self.value / LN2, self.std_error / LN2, "bits"
        return self.value, self.std_error, "nats"


@dataclass(frozen=True)
class Report:
    rows: tuple
    h_prior: float
    M: int
    count: int
    seed: int
    stats: object = field(compare=False, default=None)
    config: ReportConfig = ReportConfig()

    def __getitem__(self, name):
        for row in self.rows:
            if row.name == name:
                return row
        raise KeyError(name)

    @property
    def names(self):
        return [r.name for r in self.rows]

    def of_kind(self, kind, usable=True):
        return [
            r for r in self.rows if r.kind == kind and not (usable and not math.isfinite(r.value))
        ]


def _gradient(func, mu, scale):
    grad = np.zeros_like(mu)
    for i in range(mu.size):
        h = 1e-6 * max(scale[i], 1e-3)
        e = np.zeros_like(mu)
        e[i] = h
        for lo, hi, div in ((mu - e, mu + e, 2 * h), (mu, mu + e, h), (mu - e, mu, h)):
            try:
                grad[i] = (func(*hi) - func(*lo)) / div
                break
            except (ValueError, ZeroDivisionError):
                continue
        else:
            grad[i] = math.nan
    return grad


def propagate(func, columns):
    """Delta-method estimate ``(func(means), std_error)`` from per-draw columns."""
    X = np.vstack([np.asarray(c, dtype=float) for c in columns])
    n = X.shape[1]
    mu = X.mean(axis=1)
    value = func(*mu)
    if n < 2:
        return value, 0.0
    cov = np.atleast_2d(np.cov(X, ddof=1)) / n
    scale = np.maximum(np.abs(mu), X.std(axis=1))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        g = _gradient(func, mu, scale)
    var = float(g @ cov @ g)
    return value, math.sqrt(max(var, 0.0))


def _row(name, kind, h, compute, inputs=None, flags=()):
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", B.ClampWarning)
            value, se = compute()
        if not math.isfinite(value):
            raise InvalidStatisticsError(f"{name} is not finite")
    except (InvalidStatisticsError, ValueError) as exc:
        flag = NOT_APPLICABLE if "uniform prior" in str(exc) else FAILED
        return BoundReport(
            name, kind, math.nan, math.nan, h, tuple(flags) + (flag,), {"error": str(exc)}
        )
    return BoundReport(name, kind, float(value), float(se), h, tuple(flags), inputs or {})


def assemble_report(model, batch, config=None):
    """Evaluate every bound on one batch.

    ``model`` may be ``None`` (e.g. replayed posteriors); the prior is then
    taken from the batch. Bounds that cannot be formed are returned as
    failed rows rather than raising.
    """
    config = config or ReportConfig()
    prior = model.prior if model is not None else batch.prior
    M = prior.M
    h = prior_entropy(prior)
    P = batch.posteriors
    s = batch.sorted_posteriors
    n = batch.count
    pstar = s[:, 0]
    pe_col = 1.0 - pstar
    p2 = s[:, 1]
    p3 = s[:, 2] if M > 2 else np.zeros(n)
    H = entropy(P, axis=1)
    stats = estimate_ordered_stats(batch, config.depth)
    d = draw_deltas(s, 2)
    rows = []

    ee = MCEstimate.from_samples(H)
    mpe = MCEstimate.from_samples(pe_col)
    rows.append(BoundReport("EE", EXACT, ee.mean, ee.std_error, h))
    rows.append(BoundReport("MI", EXACT, h - ee.mean, ee.std_error, h))
    rows.append(BoundReport("MPE", EXACT, mpe.mean, mpe.std_error, h))

    def mean_se(col):
        est = MCEstimate.from_samples(col)
        return est.mean, est.std_error

    rows.append(_row("FMB", EE_LOWER, h, lambda: propagate(B.fm_ee_lower, [pe_col]),
                     {"pe": mpe.mean}))
    cfmb_flags = (CLAMPED,) if mpe.mean > (M - 1) / M + 1e-9 else ()
    rows.append(_row("CFMB", EE_LOWER, h,
                     lambda: propagate(lambda pe: B.cfm_phi_star(pe, M), [pe_col]),
                     {"pe": mpe.mean}, cfmb_flags))
    rows.append(_row("FMB1", EE_LOWER, h,
                     lambda: propagate(lambda y: -math.log(y), [pstar - d[:, 0]]),
                     {"pe": mpe.mean, "delta1": float(d[:, 0].mean())}))
    rows.append(_row("FMB2", EE_LOWER, h,
                     lambda: propagate(lambda y: -math.log(y), [pstar - d[:, 0] - d[:, 1]]),
                     {"pe": mpe.mean, "delta1": float(d[:, 0].mean()),
                      "delta2": float(d[:, 1].mean())}))

    phi_vals, proj = B.phi_two_array(pstar, p2, M)
    phi_flags = (PROJECTED,) if proj.mean() > PROJECTION_FLAG_FRACTION else ()
    rows.append(_row("FMp*p**", EE_LOWER, h, lambda: mean_se(phi_vals),
                     {"projected_fraction": float(proj.mean())}, phi_flags))
    u_mean, v_mean = float(pstar.mean()), float(p2.mean())
    cphi_flags = (PROJECTED,) if B.project_uv(u_mean, v_mean, M)[2] else ()
    rows.append(_row("CFMp*p**", EE_LOWER, h,
                     lambda: propagate(lambda u, v: B.convex_phi(u, v, M), [pstar, p2]),
                     {"u": u_mean, "v": v_mean}, cphi_flags))

    sum_sq = np.sum(P**2, axis=1)

    def capacity():
        mi_up, se = propagate(lambda q: B.capacity_mi_upper(q, M, prior.is_uniform)[0], [sum_sq])
        return h - mi_up, se

    rows.append(_row("CapacityBound", EE_LOWER, h, capacity,
                     {"sum_sq": float(sum_sq.mean()),
                      "effective_snr": float(M * sum_sq.mean() - 1.0)}))

    integrand, keep = delta_integral_samples(batch)
    excluded = int(np.count_nonzero(~keep))
    delta_flags = (UNRELIABLE,) if excluded > 1e-3 * n else ()

    def delta():
        value = B.delta_ee_lower(mpe.mean, integrand[keep].mean())
        _, se = propagate(B.delta_ee_lower, [pe_col[keep], integrand[keep]])
        return value, se

    rows.append(_row("DeltaBound", EE_LOWER, h, delta,
                     {"pe": mpe.mean, "integral": float(integrand[keep].mean()),
                      "excluded": excluded}, delta_flags))

    rows.append(_row("Fano", EE_UPPER, h,
                     lambda: propagate(lambda pe: B.fano_ee_upper(pe, M), [pe_col]),
                     {"pe": mpe.mean}))
    # With no spare cells (M = 2 for Fano1, M <= 3 for Fano2) the last statistic is
    # pinned by the others; differentiate along the constraint instead of across it.
    if M == 2:
        fano1 = (lambda pe: B.fano1_ee_upper(pe, pe, M), [pe_col])
    else:
        fano1 = (lambda pe, a: B.fano1_ee_upper(pe, a, M), [pe_col, p2])
    if M == 2:
        fano2 = (lambda pe: B.fano2_ee_upper(pe, pe, 0.0, M), [pe_col])
    elif M == 3:
        fano2 = (lambda pe, a: B.fano2_ee_upper(pe, a, max(pe - a, 0.0), M), [pe_col, p2])
    else:
        fano2 = (lambda pe, a, b: B.fano2_ee_upper(pe, a, b, M), [pe_col, p2, p3])
    rows.append(_row("Fano1", EE_UPPER, h, lambda: propagate(*fano1),
                     {"pe": mpe.mean, "dp1": v_mean}))
    rows.append(_row("Fano2", EE_UPPER, h, lambda: propagate(*fano2),
                     {"pe": mpe.mean, "dp1": v_mean, "dp2": float(p3.mean())}))

    rows.append(_row("MPE-FM", MPE_UPPER, h, lambda: propagate(B.mpe_upper_fm, [H]),
                     {"ee": ee.mean}))
    lam = float(config.lam)
    H_lam = draw_gee(P, lam)
    rows.append(_row("MPE-λ", MPE_UPPER, h,
                     lambda: propagate(lambda a, b: B.mpe_upper_lambda(a, b, lam), [H, H_lam]),
                     {"ee": ee.mean, "gee": float(H_lam.mean()), "lambda": lam}))
    rows.append(_row("MPE-Integral", MPE_UPPER, h,
                     lambda: propagate(B.mpe_upper_integral, [-np.log(pstar)]),
                     {"gee_integral": float(-np.log(pstar).mean())}))
    bn_col = draw_bn(P, float(config.bn_order))
    rows.append(_row("MPE-Bn", MPE_UPPER, h, lambda: propagate(B.mpe_upper_bn, [bn_col]),
                     {"bn": float(bn_col.mean()), "n": float(config.bn_order)}))

    return Report(tuple(rows), h, M, n, batch.seed, stats, config)
