"""Scikit-learn style front doors for the mixture and the range scaler.

These wrappers exist so the algorithm composes with the wider ecosystem
(pipelines, clone, grid search); the functional API in
:mod:`convclust.dpgmm` and :mod:`convclust.points` remains the primary
contract surface.
"""

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import dpgmm
from .points import PointMatrix, ScaleRecord, VECTOR

__all__ = ["DirichletProcessGMM", "RangeScaler"]


class DirichletProcessGMM(ClusterMixin, BaseEstimator):
    """Dirichlet process mixture of diagonal Gaussians, variationally fitted.

    Parameters
    ----------
    alpha : float, default=0.2
        Concentration of the Dirichlet process prior; larger values let
        more clusters form.
    max_components : int, default=50
        Truncation level of the stick-breaking representation.
    tol : float, default=1e-4
        Relative ELBO change that counts as converged.
    max_iter : int, default=500
        Iteration cap for coordinate ascent.
    seed : int, default=0
        Seed for the data-row initialization; fits are deterministic.
    scale_range : tuple or None, default=(0, 10)
        If set, affinely map the training data onto this range before
        fitting (the documented pipeline default). ``None`` uses the data
        as given. Prediction inputs are mapped with the same rule.
    mean_prior, mean_precision_prior, precision_shape_prior, precision_rate_prior :
        Normal-Gamma hyperparameters; see :class:`convclust.dpgmm.Priors`.
    threads : int, default=1
        Parallel chunks for the responsibility pass; 1 is bit-deterministic.

    Attributes
    ----------
    model_ : DpgmmModel
        Fitted variational parameters, components ordered by mass.
    labels_ : ndarray of shape (n_samples,)
        Training-set cluster ids.
    weights_ : ndarray of shape (max_components,)
        Expected mixture weights.
    elbo_trace_ : list of float
    converged_ : bool
    n_effective_components_ : int
        Components with expected weight above 0.01.
    """

    def __init__(
        self,
        alpha=0.2,
        max_components=50,
        tol=1e-4,
        max_iter=500,
        seed=0,
        scale_range=(0, 10),
        mean_prior=None,
        mean_precision_prior=1.0,
        precision_shape_prior=1.0,
        precision_rate_prior=None,
        threads=1,
    ):
        self.alpha = alpha
        self.max_components = max_components
        self.tol = tol
        self.max_iter = max_iter
        self.seed = seed
        self.scale_range = scale_range
        self.mean_prior = mean_prior
        self.mean_precision_prior = mean_precision_prior
        self.precision_shape_prior = precision_shape_prior
        self.precision_rate_prior = precision_rate_prior
        self.threads = threads

    def _config(self):
        return dpgmm.DpgmmConfig(
            alpha=self.alpha,
            truncation=self.max_components,
            tol=self.tol,
            max_iter=self.max_iter,
            seed=self.seed,
            priors=dpgmm.Priors(
                mean=self.mean_prior,
                mean_precision=self.mean_precision_prior,
                precision_shape=self.precision_shape_prior,
                precision_rate=self.precision_rate_prior,
            ),
        )

    def _wrap(self, X):
        X = check_array(X, dtype=np.float64, ensure_min_samples=1)
        if self.scale_range is None:
            return X  # caller-managed scaling; no provenance to record
        from .points import scale_to_range

        lo, hi = self.scale_range
        pm = PointMatrix(values=X, mode=VECTOR, origin_shape=tuple(X.shape))
        return scale_to_range(pm, lo=lo, hi=hi)

    def fit(self, X, y=None):
        """Fit the truncated mixture to rows of X."""
        pm = self._wrap(X)
        result = dpgmm.fit(pm, self._config(), threads=self.threads)
        self.model_ = result.model
        self.elbo_trace_ = result.elbo_trace
        self.converged_ = result.converged
        self.n_effective_components_ = result.effective_components
        self.weights_ = dpgmm.expected_weights(result.model)
        self.labels_ = dpgmm.predict(result.model, pm)
        self.n_features_in_ = result.model.dim
        return self

    def predict(self, X):
        """Hard cluster ids for rows of X (id 0 = most populous cluster)."""
        check_is_fitted(self, "model_")
        return dpgmm.predict(self.model_, self._wrap(X))

    def predict_proba(self, X):
        """Responsibility matrix (n_samples, max_components)."""
        check_is_fitted(self, "model_")
        return dpgmm.update_responsibilities(self.model_, self._wrap(X), threads=self.threads)


class RangeScaler(TransformerMixin, BaseEstimator):
    """Affine min-max scaler onto [lo, hi] with a global (scalar) range.

    Unlike per-feature scalers this preserves relative channel magnitudes:
    one affine map, learned from all entries of the fit data, is applied
    to every entry.
    """

    def __init__(self, lo=0.0, hi=10.0):
        self.lo = lo
        self.hi = hi

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        if not self.hi > self.lo:
            raise ValueError(f"invalid range: hi={self.hi} must exceed lo={self.lo}")
        self.src_min_ = float(X.min())
        self.src_max_ = float(X.max())
        self.scale_record_ = ScaleRecord(
            src_min=self.src_min_,
            src_max=self.src_max_,
            lo=float(self.lo),
            hi=float(self.hi),
            degenerate=self.src_min_ == self.src_max_,
        )
        return self

    def transform(self, X):
        check_is_fitted(self, "scale_record_")
        X = check_array(X, dtype=np.float64)
        if self.scale_record_.degenerate:
            return np.full_like(X, self.lo)
        span = self.src_max_ - self.src_min_
        return self.lo + (X - self.src_min_) / span * (self.hi - self.lo)
