"""Deterministic quadrature reference values for scalar Gaussian channels.

Used to cross-check the Monte Carlo estimators. Posteriors here are built
directly from ``scipy.stats.norm`` rather than through :mod:`equibound.core`,
so the two routes share no code beyond numpy.

The integrands (max, second max, ...) have kinks wherever two weighted
densities cross, so the real line is cut at every pairwise crossing and each
piece is integrated with composite Gauss-Legendre.
"""

import itertools
import math
import time
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp
from scipy.stats import norm

TAIL_SIGMAS = 12.0
PANEL_SIGMAS = 0.5
NODES_PER_PANEL = 16


def _crossings(prior, means, sd):
    out = []
    for a, b in itertools.combinations(range(len(means)), 2):
        if prior[a] == 0 or prior[b] == 0 or means[a] == means[b]:
            continue
        # p_a N(x; mu_a) = p_b N(x; mu_b) is linear in x for equal variances
        x = 0.5 * (means[a] + means[b]) + sd**2 * np.log(prior[b] / prior[a]) / (
            means[a] - means[b]
        )
        out.append(x)
    return out


def quadrature_nodes(prior, means, variance):
    """Nodes and weights covering the output line, with breaks at every crossing."""
    prior = np.asarray(prior, dtype=float)
    means = np.asarray(means, dtype=float).ravel()
    sd = float(np.sqrt(variance))
    lo = means.min() - TAIL_SIGMAS * sd
    hi = means.max() + TAIL_SIGMAS * sd
    cuts = {lo, hi}
    cuts.update(x for x in _crossings(prior, means, sd) if lo < x < hi)
    cuts = np.array(sorted(cuts))
    g, gw = np.polynomial.legendre.leggauss(NODES_PER_PANEL)
    xs, ws = [], []
    for a, b in zip(cuts[:-1], cuts[1:]):
        panels = max(int(np.ceil((b - a) / (PANEL_SIGMAS * sd))), 1)
        edges = np.linspace(a, b, panels + 1)
        for pa, pb in zip(edges[:-1], edges[1:]):
            half = 0.5 * (pb - pa)
            xs.append(pa + half * (g + 1))
            ws.append(half * gw)
    return np.concatenate(xs), np.concatenate(ws)


def posterior_grid(prior, means, variance):
    """Posteriors and evidence at the quadrature nodes.

    Returns ``(x, weights, posteriors, evidence)``; ``weights * evidence``
    integrates against the output law P(x).
    """
    prior = np.asarray(prior, dtype=float)
    means = np.asarray(means, dtype=float).ravel()
    x, w = quadrature_nodes(prior, means, variance)
    with np.errstate(divide="ignore"):
        log_joint = np.log(prior)[None, :] + norm.logpdf(
            x[:, None], means[None, :], np.sqrt(variance)
        )
    log_ev = logsumexp(log_joint, axis=1)
    post = np.exp(log_joint - log_ev[:, None])
    return x, w, post, np.exp(log_ev)


def expect(prior, means, variance, func):
    """E_X[func(posterior row)] for a vectorised ``func`` mapping (n, M) -> (n,)."""
    _, w, post, ev = posterior_grid(prior, means, variance)
    return float(np.sum(w * ev * func(post)))


def scalar_gaussian_oracle(prior, means, variance):
    """Reference values (nats / probabilities) for a scalar Gaussian channel."""
    prior = np.asarray(prior, dtype=float)
    _, w, post, ev = posterior_grid(prior, means, variance)
    dens = w * ev
    s = -np.sort(-post, axis=1)
    M = post.shape[1]
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(post > 0, post * np.log(post), 0.0)
        h_prior = -np.sum(np.where(prior > 0, prior * np.log(prior), 0.0))
    ee = float(np.sum(dens * -plogp.sum(axis=1)))
    return {
        "mass": float(dens.sum()),
        "ee": ee,
        "mi": float(h_prior - ee),
        "mpe": float(np.sum(dens * (1 - s[:, 0]))),
        "u": float(np.sum(dens * s[:, 0])),
        "v": float(np.sum(dens * s[:, 1])),
        "w": float(np.sum(dens * s[:, 2])) if M > 2 else 0.0,
        "sum_sq": float(np.sum(dens * np.sum(post**2, axis=1))),
        "nodes": int(w.size),
    }


def random_scalar_model(rng, max_M=8):
    """A random N = 1 Gaussian test model: (prior, means, variance).

    Half the models get a uniform prior, the rest a Dirichlet(1) prior.
    """
    M = int(rng.integers(2, max_M + 1))
    variance = float(rng.uniform(0.25, 4.0))
    means = np.sort(rng.uniform(-3.0, 3.0, size=M)) * np.sqrt(variance)
    if rng.random() < 0.5:
        prior = np.full(M, 1.0 / M)
    else:
        prior = rng.dirichlet(np.ones(M))
        prior = np.maximum(prior, 1e-3)
        prior /= prior.sum()
    return prior, means, variance


ORACLE_KEYS = ("ee", "mi", "mpe", "u", "v", "sum_sq")


@dataclass(frozen=True)
class FleetResult:
    """Per-model z-scores of Monte Carlo estimates against quadrature."""

    z: np.ndarray  # (models, len(ORACLE_KEYS))
    models: list
    seconds: float

    @property
    def passed(self):
        return np.all(self.z <= 3.0, axis=1)

    @property
    def pass_count(self):
        return int(self.passed.sum())


def compare_fleet(models=100, samples=100_000, seed=20141022, workers=None, callback=None,
                  with_reports=False):
    """Run the MC estimators on a fleet of random scalar models.

    Model parameters come from ``default_rng(seed)``; model ``i`` is sampled
    with batch seed ``1000 + i``. ``callback(i, z, batch)`` is called after each model.
    With ``with_reports`` each entry of ``models`` also carries the full bound
    report for its batch (batches themselves are not kept).
    """
    # imported here: the quadrature above stays independent of the MC path
    from .core import GaussianChannel, HypothesisModel, Prior
    from .mc import estimate_equivocation, estimate_mi, estimate_mpe, estimate_ordered_stats
    from .mc import sample_joint
    from .report import assemble_report

    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    t_extra = 0.0
    rows, specs = [], []
    for i in range(models):
        prior, means, variance = random_scalar_model(rng)
        model = HypothesisModel(Prior(prior), GaussianChannel(means[:, None], variance))
        batch = sample_joint(model, samples, 1000 + i, workers=workers)
        ref = scalar_gaussian_oracle(prior, means, variance)
        st = estimate_ordered_stats(batch)
        est = {
            "ee": estimate_equivocation(batch),
            "mi": estimate_mi(batch),
            "mpe": estimate_mpe(batch),
            "u": st.u,
            "v": st.v,
            "sum_sq": st.sum_sq,
        }
        z = []
        for k in ORACLE_KEYS:
            diff = abs(est[k].mean - ref[k])
            se = est[k].std_error
            z.append(diff / se if se > 0 else (0.0 if diff < 1e-12 else math.inf))
        rows.append(z)
        spec = {"prior": prior, "means": means, "variance": variance, "oracle": ref,
                "model": model}
        if with_reports:
            spec["report"] = assemble_report(model, batch)
        specs.append(spec)
        if callback is not None:
            t_cb = time.perf_counter()
            callback(i, z, batch)
            t_extra += time.perf_counter() - t_cb
    # wall time of sampling, estimation and quadrature; callback time is excluded
    return FleetResult(np.array(rows), specs, time.perf_counter() - t0 - t_extra)
