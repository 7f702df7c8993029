"""scikit-learn style wrappers.

``GaussianPosterior`` is the MAP classifier of a known Gaussian channel, and
``BoundsEstimator`` fits the whole bound catalog to a matrix of posteriors
(for instance ``predict_proba`` output of any calibrated classifier).
"""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ._validation import check_posterior_matrix
from .core import GaussianChannel, Prior, normalize_log_weights
from .mc import SampleBatch, estimate_ordered_stats
from .report import ReportConfig, assemble_report


class GaussianPosterior(ClassifierMixin, BaseEstimator):
    """Exact Bayes posterior for hypotheses with Gaussian outputs.

    Parameters
    ----------
    means : array-like of shape (M, N)
        Output mean under each hypothesis.
    variance : float
        Shared isotropic noise variance.
    prior : array-like of shape (M,), optional
        Prior PMF; uniform if omitted.

    ``fit`` only validates the parameters; there is nothing to learn. The
    ``y`` argument is accepted for pipeline compatibility and ignored apart
    from a label-range check.
    """

    def __init__(self, means=None, variance=1.0, prior=None):
        self.means = means
        self.variance = variance
        self.prior = prior

    def fit(self, X=None, y=None):
        means = np.asarray(self.means, dtype=float)
        if means.ndim == 1:
            means = means[:, None]
        self.channel_ = GaussianChannel(means, self.variance)
        M = means.shape[0]
        self.prior_ = Prior.uniform(M) if self.prior is None else Prior(np.asarray(self.prior))
        if self.prior_.M != M:
            raise ValueError("prior length must match the number of means")
        self.classes_ = np.arange(M)
        self.n_features_in_ = means.shape[1]
        if y is not None:
            y = np.asarray(y)
            if y.size and (y.min() < 0 or y.max() >= M):
                raise ValueError("labels must lie in 0 .. M-1")
        return self

    def predict_log_proba(self, X):
        check_is_fitted(self, "channel_")
        X = check_array(X, ensure_2d=False)
        if X.ndim == 1:
            X = X[:, None]
        log_joint = self.prior_.log_p + self.channel_.log_density_matrix(X)
        _, log_ev = normalize_log_weights(log_joint)
        return log_joint - log_ev[:, None]

    def predict_proba(self, X):
        return np.exp(self.predict_log_proba(X))

    def predict(self, X):
        """MAP labels; argmax keeps the lowest index among ties."""
        P = self.predict_proba(X)
        return self.classes_[np.argmax(P, axis=1)]


class BoundsEstimator(BaseEstimator):
    """Bound report fitted to a matrix of per-observation posteriors.

    Parameters
    ----------
    prior : array-like of shape (M,), optional
        Prior the posteriors were formed under; uniform if omitted.
    depth : int, optional
        Ordered-statistics depth; defaults to min(M - 1, 8).
    lam : float
        Order of the Rényi-type MPE bound.
    bn_order : float
        Order n of the MPE-Bn bound.

    Attributes
    ----------
    report_ : Report
        Every bound with its error bar.
    stats_ : OrderedStats
        Means of the ordered posterior statistics.
    """

    def __init__(self, prior=None, depth=None, lam=2.0, bn_order=2.0):
        self.prior = prior
        self.depth = depth
        self.lam = lam
        self.bn_order = bn_order

    def fit(self, P, y=None):
        P = check_posterior_matrix(P)
        prior = None if self.prior is None else Prior(np.asarray(self.prior))
        batch = SampleBatch.from_posteriors(P, prior)
        config = ReportConfig(depth=self.depth, lam=self.lam, bn_order=self.bn_order)
        self.stats_ = estimate_ordered_stats(batch, self.depth)
        self.report_ = assemble_report(None, batch, config)
        self.n_features_in_ = P.shape[1]
        return self

    def bound(self, name):
        """``(value, std_error)`` in nats (or probability) for one row."""
        check_is_fitted(self, "report_")
        row = self.report_[name]
        return row.value, row.std_error

    def summary(self, units="bits"):
        """``{name: (value, std_error)}`` in ``units``."""
        check_is_fitted(self, "report_")
        return {r.name: r.in_units(units)[:2] for r in self.report_.rows}
