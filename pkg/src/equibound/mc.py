"""Seeded Monte Carlo estimation of posterior expectations.

Every draw ``i`` takes its uniforms from a Philox stream keyed by the seed at
counter offset ``i * blocks_per_draw``. Chunks can therefore be generated in
any order or on any number of threads and still reproduce the sequential
batch bit for bit.
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.random import Philox

from ._validation import check_positive_int, check_posterior_matrix, frozen
from .core import (
    HypothesisModel,
    PosteriorVector,
    Prior,
    entropy,
    normalize_log_weights,
    tilt,
    xlogx,
)

CHUNK_SIZE = 2048
THREADS_ENV = "EQUIBOUND_THREADS"
MAX_SEED = 2**64 - 1

# Delta-integrand draws whose log-magnitude exceeds this are dropped.
DELTA_LOG_LIMIT = 700.0
DELTA_UNRELIABLE_FRACTION = 1e-3

GEE_QUADRATURE_NODES = 64
GEE_QUADRATURE_TMIN = 1e-10


def default_workers():
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be a positive integer, got {env!r}")
        if n < 1:
            raise ValueError(f"{THREADS_ENV} must be a positive integer, got {env!r}")
        return n
    return os.cpu_count() or 1


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    std_error: float
    count: int
    excluded: int = 0
    flags: tuple = ()

    @classmethod
    def from_samples(cls, values, **kwargs):
        values = np.asarray(values, dtype=float)
        n = values.size
        if n == 0:
            raise ValueError("cannot form an estimate from zero samples")
        se = float(values.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        return cls(float(values.mean()), se, n, **kwargs)

    def __float__(self):
        return self.mean


@dataclass(frozen=True)
class OrderedStats:
    """Expectations of the descending-ordered posterior and derived sequences.

    ``deltas[i-1]`` is E[(1 - p_(1) - ... - p_(i)) (p_(i) - p_(i+1))].
    """

    u: MCEstimate
    v: MCEstimate
    w: MCEstimate
    deltas: tuple
    sum_sq: MCEstimate
    b_infinity: MCEstimate
    depth: int


@dataclass(frozen=True, eq=False)
class SampleBatch:
    """Joint (theta, x) draws with their posteriors.

    ``log_likelihood`` and ``log_evidence`` are in nats. ``outputs`` may be
    ``None`` for replayed posteriors, which have no channel behind them.
    """

    prior: Prior
    true_index: np.ndarray
    outputs: np.ndarray
    log_likelihood: np.ndarray
    log_evidence: np.ndarray
    posteriors: np.ndarray
    seed: int = None
    model: HypothesisModel = field(default=None, repr=False)

    @property
    def count(self):
        return self.posteriors.shape[0]

    @property
    def M(self):
        return self.posteriors.shape[1]

    @cached_property
    def sorted_posteriors(self):
        """Per-draw posteriors sorted descending, shape (count, M)."""
        s = -np.sort(-self.posteriors, axis=1)
        s.setflags(write=False)
        return s

    @cached_property
    def map_index(self):
        return np.argmax(self.posteriors, axis=1)

    def posterior(self, i):
        return PosteriorVector(self.posteriors[i], log_evidence=self.log_evidence[i])

    def identical_to(self, other):
        return all(
            np.array_equal(getattr(self, k), getattr(other, k))
            for k in ("true_index", "log_likelihood", "log_evidence", "posteriors")
        ) and (
            (self.outputs is None and other.outputs is None)
            or np.array_equal(self.outputs, other.outputs)
        )

    @classmethod
    def from_posteriors(cls, posteriors, prior=None):
        """Wrap a fixed list of posterior PMFs as a batch (posterior replay).

        The stored log-likelihoods are ``ln p(m|x) - ln p_m``, i.e. the
        likelihoods that reproduce these posteriors with unit evidence.
        """
        P = check_posterior_matrix(posteriors)
        prior = Prior.uniform(P.shape[1]) if prior is None else prior
        if prior.M != P.shape[1]:
            raise ValueError("prior length does not match the posterior width")
        if np.any((prior.p == 0) & np.any(P > 0, axis=0)):
            raise ValueError("posterior mass on a hypothesis with zero prior")
        with np.errstate(divide="ignore", invalid="ignore"):
            ll = np.where(P > 0, np.log(P) - prior.log_p, -np.inf)
        return cls(
            prior=prior,
            true_index=frozen(np.full(P.shape[0], -1), dtype=np.intp),
            outputs=None,
            log_likelihood=frozen(ll),
            log_evidence=frozen(np.zeros(P.shape[0])),
            posteriors=frozen(P),
        )


def _blocks_per_draw(channel):
    return -(-(1 + channel.uniforms_per_draw) // 4)


def draw_uniforms(seed, start, count, per_draw, blocks):
    """Uniforms in (0, 1) for draws ``start .. start+count-1``, shape (count, per_draw)."""
    raw = Philox(key=seed, counter=start * blocks).random_raw(count * blocks * 4)
    raw = raw.reshape(count, blocks * 4)[:, :per_draw]
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def _sample_chunk(model, seed, start, stop, blocks):
    channel = model.channel
    u = draw_uniforms(seed, start, stop - start, 1 + channel.uniforms_per_draw, blocks)
    cdf = np.cumsum(model.prior.p)
    cdf /= cdf[-1]
    m = np.searchsorted(cdf, u[:, 0], side="right")
    m = np.minimum(m, np.flatnonzero(model.prior.p > 0)[-1])
    x = np.asarray(channel.sample(m, u[:, 1:]), dtype=float).reshape(stop - start, -1)
    ll = channel.log_density_matrix(x)
    P, log_ev = normalize_log_weights(model.prior.log_p + ll)
    return m, x, ll, log_ev, P


def sample_joint(model, count, seed, workers=None, chunk_size=CHUNK_SIZE):
    """Draw ``count`` joint samples of (theta, x) and their posteriors.

    The result depends only on ``(model, count, seed)``; ``workers`` and the
    thread scheduling never change it.
    """
    count = check_positive_int(count, "count")
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise TypeError("seed must be an integer")
    seed = int(seed)
    if not 0 <= seed <= MAX_SEED:
        raise ValueError("seed must be a non-negative 64-bit integer")
    workers = default_workers() if workers is None else check_positive_int(workers, "workers")
    blocks = _blocks_per_draw(model.channel)

    bounds = [(s, min(s + chunk_size, count)) for s in range(0, count, chunk_size)]
    job = lambda b: _sample_chunk(model, seed, b[0], b[1], blocks)  # noqa: E731
    if workers == 1 or len(bounds) == 1:
        parts = [job(b) for b in bounds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, bounds))

    m, x, ll, log_ev, P = (np.concatenate(col) for col in zip(*parts))
    return SampleBatch(
        prior=model.prior,
        true_index=frozen(m, dtype=np.intp),
        outputs=frozen(x),
        log_likelihood=frozen(ll),
        log_evidence=frozen(log_ev),
        posteriors=frozen(P),
        seed=seed,
        model=model,
    )


# -- per-draw quantities ------------------------------------------------------


def draw_deltas(sorted_p, depth):
    """Per-draw delta terms, shape (count, depth); zero-padded beyond M - 1."""
    count, M = sorted_p.shape
    padded = np.zeros((count, depth + 1))
    k = min(M, depth + 1)
    padded[:, :k] = sorted_p[:, :k]
    residual = 1.0 - np.cumsum(padded[:, :depth], axis=1)
    return residual * (padded[:, :depth] - padded[:, 1 : depth + 1])


def draw_gee(P, n):
    return entropy(tilt(P, n), axis=1)


def draw_bn(P, n):
    """Per-draw sum_m p_n(m|x) ln p(m|x); terms with zero tilted weight drop out."""
    if np.isinf(n) or n >= 1e6:
        return np.log(P.max(axis=1))
    Q = tilt(P, n)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(Q > 0, Q * np.log(P), 0.0)
    return terms.sum(axis=1)


def draw_gee_integral_quadrature(P, nodes=GEE_QUADRATURE_NODES):
    """Per-draw integral of H_n / n^2 over n in [1, inf) by quadrature.

    With t = 1/n the integral is over t in (0, 1]. Near-tied leading entries
    make H_{1/t} switch sharply at t ~ ln(p*/p**), so the fixed Gauss-Legendre
    rule is laid out in ln t over [ln GEE_QUADRATURE_TMIN, 0], where that switch
    has unit width. The sliver below the cut is added as a rectangle.
    """
    x, w = np.polynomial.legendre.leggauss(nodes)
    lo = math.log(GEE_QUADRATURE_TMIN)
    u = 0.5 * (x + 1.0) * -lo + lo
    w = 0.5 * -lo * w
    total = GEE_QUADRATURE_TMIN * draw_gee(P, 1.0 / GEE_QUADRATURE_TMIN)
    for ui, wi in zip(u, w):
        t = math.exp(ui)
        total = total + wi * t * draw_gee(P, 1.0 / t)
    return total


def draw_delta_integrand(batch):
    """Per-draw log of the diagonal and off-diagonal Delta-integrand parts.

    For a draw x with MAP index m the importance-sampled integrand is
    sum_m' (p_m'^2 / p_m) P(x|m')^2 / P(x|m) / P(x). Returns
    ``(log_diag, log_cross)`` with the m' = m part split off.
    """
    log_joint = batch.prior.log_p + batch.log_likelihood
    m = batch.map_index
    rows = np.arange(batch.count)
    log_map = log_joint[rows, m]
    log_terms = 2 * log_joint - log_map[:, None] - batch.log_evidence[:, None]
    log_diag = log_terms[rows, m]
    off = log_terms.copy()
    off[rows, m] = -np.inf
    top = off.max(axis=1)
    safe = np.where(np.isfinite(top), top, 0.0)
    with np.errstate(divide="ignore"):
        log_cross = safe + np.log(np.exp(off - safe[:, None]).sum(axis=1))
    return log_diag, log_cross


# -- estimators ---------------------------------------------------------------


def prior_entropy(prior):
    """H(Theta) in nats, computed exactly from the prior."""
    return prior.entropy()


def estimate_equivocation(batch):
    return MCEstimate.from_samples(entropy(batch.posteriors, axis=1))


def estimate_mi(batch):
    ee = estimate_equivocation(batch)
    return MCEstimate(prior_entropy(batch.prior) - ee.mean, ee.std_error, ee.count)


def estimate_fmi(batch):
    """Fractional MI, MI / H(Theta); undefined (NaN, flagged) for a degenerate prior."""
    h = prior_entropy(batch.prior)
    mi = estimate_mi(batch)
    if h <= 0:
        return MCEstimate(math.nan, math.nan, mi.count, flags=("undefined",))
    return MCEstimate(mi.mean / h, mi.std_error / h, mi.count)


def estimate_mpe(batch):
    return MCEstimate.from_samples(1.0 - batch.sorted_posteriors[:, 0])


def _check_order(n):
    n = float(n)
    if not n >= 1:
        raise ValueError(f"order n must be >= 1, got {n!r}")
    return n


def estimate_ordered_stats(batch, depth=None):
    M = batch.M
    if depth is None:
        depth = min(M - 1, 8)
    depth = check_positive_int(depth, "depth")
    if depth > M - 1:
        raise ValueError(f"depth must be in [1, {M - 1}], got {depth}")
    s = batch.sorted_posteriors
    third = s[:, 2] if M > 2 else np.zeros(batch.count)
    d = draw_deltas(s, depth)
    return OrderedStats(
        u=MCEstimate.from_samples(s[:, 0]),
        v=MCEstimate.from_samples(s[:, 1]),
        w=MCEstimate.from_samples(third),
        deltas=tuple(MCEstimate.from_samples(d[:, i]) for i in range(depth)),
        sum_sq=MCEstimate.from_samples(np.sum(batch.posteriors**2, axis=1)),
        b_infinity=MCEstimate.from_samples(np.log(s[:, 0])),
        depth=depth,
    )


def estimate_gee(batch, n):
    """Generalized equivocation of order n: mean entropy of the tilted posterior."""
    return MCEstimate.from_samples(draw_gee(batch.posteriors, _check_order(n)))


def estimate_gee_integral(batch, method="closed"):
    """E_x of the integral over n in [1, inf) of H_n(Theta | X=x) / n^2.

    ``method="closed"`` uses the antiderivative, which gives -ln max_m p(m|x)
    per draw; ``method="quadrature"`` integrates numerically as a cross-check.
    """
    if method == "closed":
        vals = -np.log(batch.sorted_posteriors[:, 0])
    elif method == "quadrature":
        vals = draw_gee_integral_quadrature(batch.posteriors)
    else:
        raise ValueError(f"unknown method {method!r}")
    return MCEstimate.from_samples(vals)


def delta_integral_samples(batch, part="full"):
    """Per-draw Delta-integrand values and the mask of draws kept.

    ``part`` selects the full integrand, its diagonal (m' = m) part, or the
    off-diagonal cross part.
    """
    log_diag, log_cross = draw_delta_integrand(batch)
    if part == "full":
        log_val = np.logaddexp(log_diag, log_cross)
    elif part == "diagonal":
        log_val = log_diag
    elif part == "cross":
        log_val = log_cross
    else:
        raise ValueError(f"unknown part {part!r}")
    # log_cross = -inf (no cross mass) is a legitimate zero, not an outlier
    keep = (np.abs(log_val) <= DELTA_LOG_LIMIT) | (log_val == -np.inf)
    keep &= ~np.isnan(log_val)
    return np.exp(log_val), keep


def estimate_delta_integral(batch, part="full"):
    vals, keep = delta_integral_samples(batch, part)
    excluded = int(np.count_nonzero(~keep))
    if excluded == batch.count:
        raise ValueError("every draw was excluded from the Delta integral")
    flags = ("unreliable",) if excluded > DELTA_UNRELIABLE_FRACTION * batch.count else ()
    return MCEstimate.from_samples(vals[keep], excluded=excluded, flags=flags)


def estimate_bn(batch, n):
    """B_n = E[sum_m p_n(m|X) ln p(m|X)] in nats; ``n = inf`` gives E[ln max_m p]."""
    n = _check_order(n)
    return MCEstimate.from_samples(draw_bn(batch.posteriors, n))


def conditional_entropy_samples(batch):
    return entropy(batch.posteriors, axis=1)


def sum_sq_samples(batch):
    return np.sum(batch.posteriors**2, axis=1)


__all__ = [
    "MCEstimate",
    "OrderedStats",
    "SampleBatch",
    "sample_joint",
    "prior_entropy",
    "estimate_equivocation",
    "estimate_mi",
    "estimate_fmi",
    "estimate_mpe",
    "estimate_ordered_stats",
    "estimate_gee",
    "estimate_gee_integral",
    "estimate_delta_integral",
    "estimate_bn",
    "xlogx",
]
