"""scikit-learn style wrappers around the least-squares core.

The functional API (``fit_lpm``, ``fit_twin_fe``, ``decompose_all``) is the
reference implementation; these classes add ``fit``/``predict``/``transform``
and ``get_params`` so the estimators compose with sklearn tooling.
"""

from __future__ import annotations

import warnings

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .decompose import bootstrap_decomposition, decompose_all
from .errors import ConfigurationError, DataError, EstimationError
from .estimate import ModelSpec, _ols, cluster_vcov, within_demean
from .ingest import BirthTable
from .pipeline import estimate_fits, match_by_society
from .validation import check_birth_table, check_positive_int, check_xy


def _names(X, n):
    if isinstance(X, pd.DataFrame):
        return [str(c) for c in X.columns]
    return [f"x{j}" for j in range(n)]


class LinearProbabilityModel(RegressorMixin, BaseEstimator):
    """OLS with an intercept and cluster-robust covariance.

    Parameters
    ----------
    fit_intercept : bool, default True

    Attributes
    ----------
    coef_ : ndarray of shape (n_features,)
    intercept_ : float
    vcov_ : ndarray
        Covariance of ``[intercept_, *coef_]`` (or of ``coef_`` alone
        without an intercept), clustered on ``groups``.
    n_clusters_ : int
    """

    def __init__(self, fit_intercept: bool = True):
        self.fit_intercept = fit_intercept

    def fit(self, X, y, groups=None):
        names = _names(X, np.shape(X)[1] if np.ndim(X) == 2 else 1)
        X, y, groups = check_xy(X, y, groups)
        self.feature_names_ = names
        self.n_features_in_ = X.shape[1]
        D = np.column_stack([np.ones(len(y)), X]) if self.fit_intercept else X
        cols = (["intercept"] if self.fit_intercept else []) + names
        coef, resid, bread = _ols(D, y, cols)
        self.vcov_ = cluster_vcov(D, resid, groups, bread=bread)
        self.intercept_ = float(coef[0]) if self.fit_intercept else 0.0
        self.coef_ = coef[1:] if self.fit_intercept else coef
        self.residuals_ = resid
        self.n_clusters_ = len(np.unique(groups))
        return self

    @property
    def bse_(self) -> np.ndarray:
        """Standard errors aligned with ``coef_``."""
        check_is_fitted(self, "vcov_")
        se = np.sqrt(np.diag(self.vcov_))
        return se[1:] if self.fit_intercept else se

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X, _, _ = check_xy(X, np.zeros(np.shape(X)[0]))
        if X.shape[1] != self.n_features_in_:
            raise DataError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return self.intercept_ + X @ self.coef_


class WithinEstimator(RegressorMixin, BaseEstimator):
    """Fixed-effect (within) regression: demean by group, then OLS.

    Columns with no within-group variation are dropped with a warning.
    Covariance is clustered on ``clusters`` when given to ``fit``, else on
    ``groups``; the finite-sample factor counts only the slope columns.

    Attributes
    ----------
    coef_ : ndarray
        Slopes for the kept columns.
    kept_ : ndarray of bool
        Mask of input columns that survived demeaning.
    group_effects_ : dict
        Group id -> fitted intercept, used by ``predict``.
    """

    def __init__(self, tol: float = 1e-12):
        self.tol = tol

    def transform(self, X, groups=None):
        """Demean the columns of ``X`` within ``groups``."""
        if groups is None:
            raise DataError("groups are required to demean")
        X, _, groups = check_xy(X, np.zeros(np.shape(X)[0]), groups)
        return within_demean(X, groups)

    def fit(self, X, y, groups=None, clusters=None):
        if groups is None:
            raise DataError("groups are required for a within estimator")
        names = _names(X, np.shape(X)[1])
        X, y, groups = check_xy(X, y, groups)
        Xd = within_demean(X, groups)
        yd = within_demean(y, groups)
        kept = np.max(np.abs(Xd), axis=0) > self.tol
        if not kept.any():
            raise EstimationError("no column varies within groups")
        dropped = [n for n, k in zip(names, kept) if not k]
        if dropped:
            warnings.warn(f"dropping group-constant column(s): {dropped}", stacklevel=2)
        Xk = Xd[:, kept]
        coef, resid, bread = _ols(Xk, yd, [n for n, k in zip(names, kept) if k])
        cl = groups if clusters is None else np.asarray(clusters)
        self.vcov_ = cluster_vcov(Xk, resid, cl, bread=bread)
        self.coef_ = coef
        self.kept_ = kept
        self.feature_names_ = [n for n, k in zip(names, kept) if k]
        self.n_features_in_ = X.shape[1]
        effects = pd.Series(y - X[:, kept] @ coef).groupby(groups).mean()
        self.group_effects_ = effects.to_dict()
        self.n_clusters_ = len(np.unique(cl))
        return self

    @property
    def bse_(self) -> np.ndarray:
        check_is_fitted(self, "vcov_")
        return np.sqrt(np.diag(self.vcov_))

    def predict(self, X, groups=None):
        check_is_fitted(self, "coef_")
        if groups is None:
            raise DataError("groups are required to predict with group effects")
        X, _, groups = check_xy(X, np.zeros(np.shape(X)[0]), groups)
        unseen = sorted({g for g in groups.tolist() if g not in self.group_effects_}, key=str)
        if unseen:
            raise DataError(f"no fitted effect for group(s) {unseen[:5]}")
        alpha = np.array([self.group_effects_[g] for g in groups.tolist()])
        return alpha + X[:, self.kept_] @ self.coef_


class TwinGapDecomposer(BaseEstimator):
    """Full pipeline on birth records: match twins, fit, decompose.

    Parameters
    ----------
    windows : str or list, optional
        Mortality windows; all four by default.
    controls : {"full", "none"}
        Control set of the cross-sectional regression.
    missing : {"listwise_drop", "missing_indicator"}
    n_bootstrap : int
        Mother-level bootstrap replicates for standard errors (0 = none).
    seed : int
    workers : int

    Attributes
    ----------
    fits_ : dict
        ``(society, window, mode) -> RegressionFit``.
    decomposition_ : DecompositionTable
    diagnostics_ : dict
        Twin-matching diagnostics per society.
    """

    def __init__(self, windows=None, controls="full", missing="listwise_drop", n_bootstrap=0, seed=0, workers=1):
        self.windows = windows
        self.controls = controls
        self.missing = missing
        self.n_bootstrap = n_bootstrap
        self.seed = seed
        self.workers = workers

    def fit(self, X, y=None):
        """Fit on one table holding both societies, or on an ``(ND, D)`` pair of tables."""
        if isinstance(X, (tuple, list)):
            table = BirthTable.concat([check_birth_table(t) for t in X])
        else:
            table = check_birth_table(X)
        if set(table.societies()) != {"ND", "D"}:
            raise DataError(f"need births from both ND and D societies, found {table.societies()}")
        check_positive_int("n_bootstrap", self.n_bootstrap, minimum=0)
        workers = check_positive_int("workers", self.workers)
        spec = ModelSpec(controls=self.controls, missing=self.missing)
        matched = match_by_society(table)
        self.fits_ = estimate_fits(table, self.windows, spec, workers=workers, matched=matched)
        self.diagnostics_ = {soc: m[2] for soc, m in matched.items()}
        if self.n_bootstrap:
            self.decomposition_ = bootstrap_decomposition(
                matched["ND"][0], matched["D"][0], self.windows, self.n_bootstrap, self.seed,
                spec=spec, workers=workers,
            )
        else:
            self.decomposition_ = decompose_all(self.fits_, self.windows)
        return self

    def transform(self, X=None) -> pd.DataFrame:
        """The fitted decomposition as a frame (one row per window)."""
        check_is_fitted(self, "decomposition_")
        if X is not None:
            raise ConfigurationError("transform takes no data; refit to decompose new births")
        return self.decomposition_.to_frame()
