"""Hypothesis sets, priors, channels and per-output posterior computations.

Everything here works in nats. A channel enters only through two hooks: a
log-density evaluator and a sampler that maps uniform variates to outputs,
so that sampling can be driven by a counter-based stream.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp, ndtri

from ._validation import (
    POSTERIOR_SUM_TOL,
    DegenerateInputError,
    check_pmf,
    check_positive_int,
    frozen,
)

# Tilting orders at or beyond this are evaluated as the exact n -> inf limit.
ONE_HOT_ORDER = 1e6


def xlogx(p):
    """Elementwise ``p * ln p`` with the convention ``0 ln 0 = 0``."""
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = p * np.log(p)
    return np.where(p > 0, out, 0.0)


def entropy(p, axis=-1):
    """Shannon entropy in nats along ``axis``."""
    return -np.sum(xlogx(p), axis=axis)


@dataclass(frozen=True)
class HypothesisSet:
    labels: tuple

    def __post_init__(self):
        labels = tuple(self.labels)
        if len(labels) < 2:
            raise ValueError("a hypothesis set needs at least 2 labels")
        if len(set(labels)) != len(labels):
            raise ValueError("hypothesis labels must be distinct")
        object.__setattr__(self, "labels", labels)

    @property
    def M(self):
        return len(self.labels)

    @classmethod
    def range(cls, M):
        return cls(tuple(range(check_positive_int(M, "M", minimum=2))))


@dataclass(frozen=True, eq=False)
class Prior:
    p: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p", frozen(check_pmf(self.p)))

    @classmethod
    def uniform(cls, M):
        M = check_positive_int(M, "M", minimum=2)
        return cls(np.full(M, 1.0 / M))

    @property
    def M(self):
        return self.p.size

    @property
    def is_uniform(self):
        return bool(np.all(self.p == self.p[0]))

    @property
    def log_p(self):
        with np.errstate(divide="ignore"):
            return np.log(self.p)

    def entropy(self):
        return float(entropy(self.p))

    def __eq__(self, other):
        return isinstance(other, Prior) and np.array_equal(self.p, other.p)

    def __hash__(self):
        return hash(self.p.tobytes())


class ChannelDensity(ABC):
    """Conditional output density P(x | theta_m).

    Subclasses provide a log-density and a sampler driven by uniforms.
    Normalisation of custom densities is the caller's responsibility.
    """

    n_hypotheses: int
    n_dims: int

    @property
    @abstractmethod
    def uniforms_per_draw(self):
        """Number of U(0,1) variates :meth:`sample` consumes per output."""

    @abstractmethod
    def log_density(self, m, x):
        """ln P(x | theta_m) for a single hypothesis index and output vector."""

    @abstractmethod
    def sample(self, m, uniforms):
        """Map hypothesis indices (n,) and uniforms (n, k) to outputs (n, n_dims)."""

    def log_density_matrix(self, X):
        """Log-likelihoods of every hypothesis for each row of ``X``, shape (n, M)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.array(
            [[self.log_density(m, x) for m in range(self.n_hypotheses)] for x in X]
        )

    def _check_x(self, X):
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.n_dims:
            raise ValueError(
                f"output dimension mismatch: expected {self.n_dims}, got {X.shape[-1]}"
            )
        return X


@dataclass(frozen=True, eq=False)
class GaussianChannel(ChannelDensity):
    """Isotropic Gaussian channel ``X | theta_m ~ N(means[m], variance * I)``."""

    means: np.ndarray
    variance: float

    def __post_init__(self):
        means = np.asarray(self.means, dtype=float)
        if means.ndim == 1:
            means = means[:, None]
        if means.ndim != 2 or means.shape[0] < 2:
            raise ValueError("means must be an (M, N) array with M >= 2")
        if not np.all(np.isfinite(means)):
            raise ValueError("means must be finite")
        variance = float(self.variance)
        if not (variance > 0 and np.isfinite(variance)):
            raise ValueError(f"variance must be positive, got {self.variance!r}")
        object.__setattr__(self, "means", frozen(means))
        object.__setattr__(self, "variance", variance)

    @property
    def n_hypotheses(self):
        return self.means.shape[0]

    @property
    def n_dims(self):
        return self.means.shape[1]

    @property
    def uniforms_per_draw(self):
        return self.n_dims

    @property
    def _log_norm(self):
        return -0.5 * self.n_dims * np.log(2 * np.pi * self.variance)

    def log_density(self, m, x):
        x = self._check_x(x)
        if x.ndim != 1:
            raise ValueError("log_density takes a single output vector")
        if not 0 <= m < self.n_hypotheses:
            raise IndexError(f"hypothesis index {m} out of range")
        d = x - self.means[m]
        return float(self._log_norm - d @ d / (2 * self.variance))

    def log_density_matrix(self, X):
        X = self._check_x(np.atleast_2d(X))
        # explicit differences rather than the |x|^2 - 2x.mu expansion: exact and BLAS-free
        sq = np.sum((X[:, None, :] - self.means[None, :, :]) ** 2, axis=-1)
        return self._log_norm - sq / (2 * self.variance)

    def sample(self, m, uniforms):
        return self.means[m] + np.sqrt(self.variance) * ndtri(uniforms)

    def __eq__(self, other):
        return (
            isinstance(other, GaussianChannel)
            and self.variance == other.variance
            and np.array_equal(self.means, other.means)
        )

    def __hash__(self):
        return hash((self.means.tobytes(), self.variance))


@dataclass(frozen=True)
class HypothesisModel:
    """Prior over M hypotheses together with the channel they drive."""

    prior: Prior
    channel: ChannelDensity
    hypotheses: HypothesisSet = None

    def __post_init__(self):
        if self.prior.M != self.channel.n_hypotheses:
            raise ValueError(
                f"prior has {self.prior.M} entries but channel has "
                f"{self.channel.n_hypotheses} hypotheses"
            )
        if self.hypotheses is None:
            object.__setattr__(self, "hypotheses", HypothesisSet.range(self.prior.M))
        elif self.hypotheses.M != self.prior.M:
            raise ValueError("hypothesis set size does not match the prior")

    @property
    def M(self):
        return self.prior.M


@dataclass(frozen=True, eq=False)
class PosteriorVector:
    values: np.ndarray
    order: np.ndarray = field(default=None)
    log_evidence: float = 0.0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size < 1:
            raise ValueError("posterior values must be a non-empty vector")
        if np.any(values < 0) or abs(values.sum() - 1.0) > POSTERIOR_SUM_TOL:
            raise ValueError("posterior values must be non-negative and sum to 1")
        order = self.order
        if order is None:
            order = descending_order(values)
        else:
            order = np.asarray(order, dtype=np.intp)
            if not np.array_equal(np.sort(order), np.arange(values.size)):
                raise ValueError("order must be a permutation of the indices")
        object.__setattr__(self, "values", frozen(values))
        object.__setattr__(self, "order", frozen(order, dtype=np.intp))
        object.__setattr__(self, "log_evidence", float(self.log_evidence))

    @property
    def M(self):
        return self.values.size

    @property
    def sorted(self):
        """Values in descending order (p*, p**, p***, ...)."""
        return self.values[self.order]

    def __eq__(self, other):
        return (
            isinstance(other, PosteriorVector)
            and np.array_equal(self.values, other.values)
            and np.array_equal(self.order, other.order)
            and self.log_evidence == other.log_evidence
        )


def descending_order(values, axis=-1):
    # stable sort on the negated values keeps the lowest index first among ties
    return np.argsort(-np.asarray(values), axis=axis, kind="stable")


def log_likelihood(channel, m, x):
    """ln P(x | theta_m) in nats."""
    return channel.log_density(m, np.asarray(x, dtype=float))


def normalize_log_weights(log_weights):
    """Posterior rows and log-evidence from unnormalised log-weights, shape (n, M).

    Max-shifted exponentiation: no intermediate overflows, and only the
    relative weights are ever exponentiated.
    """
    log_weights = np.atleast_2d(np.asarray(log_weights, dtype=float))
    top = np.max(log_weights, axis=1, keepdims=True)
    if np.any(~np.isfinite(top)):
        bad = np.flatnonzero(~np.isfinite(top[:, 0]))
        raise DegenerateInputError(
            f"no finite log-weight for {bad.size} output(s), first at row {bad[0]}"
        )
    w = np.exp(log_weights - top)
    total = w.sum(axis=1, keepdims=True)
    P = w / total
    log_evidence = (top + np.log(total))[:, 0]
    return P, log_evidence


def posterior(prior, channel, x):
    """Bayes posterior p(theta_m | x) for a single output vector."""
    x = np.asarray(x, dtype=float)
    ll = np.array([channel.log_density(m, x) for m in range(channel.n_hypotheses)])
    P, log_ev = normalize_log_weights(prior.log_p + ll)
    return PosteriorVector(P[0], log_evidence=log_ev[0])


def tilt(P, n):
    """Tilted posteriors ``p^n / sum p^n`` row-wise for a posterior matrix.

    For ``n >= ONE_HOT_ORDER`` the exact limit is returned: uniform mass over
    the entries attaining the row maximum (one-hot when the maximum is unique).
    """
    n = float(n)
    if not n >= 1:
        raise ValueError(f"tilting order must be >= 1, got {n!r}")
    P = np.atleast_2d(np.asarray(P, dtype=float))
    if n == 1:
        return P.copy()
    if n >= ONE_HOT_ORDER:
        hit = (P == P.max(axis=1, keepdims=True)).astype(float)
        return hit / hit.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore"):
        logp = n * np.log(P)
    return np.exp(logp - logsumexp(logp, axis=1, keepdims=True))


def tilted_posterior(post, n):
    """Tilted posterior of order ``n``; the ranking permutation is carried over."""
    values = tilt(post.values, n)[0]
    return PosteriorVector(values, order=post.order, log_evidence=post.log_evidence)


def map_decision(post):
    """MAP hypothesis index; the lowest index wins ties."""
    return int(np.argmax(post.values))
