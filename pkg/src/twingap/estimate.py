"""Least-squares engine: design matrices, QR-based OLS, cluster-robust covariance.

Three estimators share it:

* :func:`fit_lpm` - cross-sectional linear probability model of the outcome
  on a male dummy and optional controls;
* :func:`fit_twin_fe` - mean within-pair male-minus-female outcome over
  mixed-sex twin pairs;
* :func:`fit_family_fe` / :func:`fit_fixed_effects` - within estimator after
  demeaning by mother (or by any grouping).

All standard errors are clustered by mother with the small-sample factor
``G/(G-1) * (N-1)/(N-K)``.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
import pandas as pd
from scipy import linalg

from .domain import ASSETS, EDUCATION_LEVELS, MARITAL_STATUSES
from .errors import ConfigurationError, EstimationError, RankDeficiencyError
from .ingest import Sample

CONTROL_SETS = ("none", "full")
MISSING_POLICIES = ("listwise_drop", "missing_indicator")
REFERENCE_CATEGORIES = {
    "mother_edu": "none",
    "father_edu": "none",
    "mother_marital": "married",
}
_CATEGORY_LEVELS = {
    "mother_edu": EDUCATION_LEVELS,
    "father_edu": EDUCATION_LEVELS,
    "mother_marital": MARITAL_STATUSES,
}
_NUMERIC_CONTROLS = ("mother_age", "household_size") + ASSETS + ("birth_year", "survey_year")


@dataclass(frozen=True)
class ModelSpec:
    """Regressors of a cross-sectional fit.

    ``controls="full"`` adds child's birth year, mother's age, education and
    marital status, father's education, household size, asset dummies, a
    linear survey-year term and country dummies. Reference categories are
    ``none`` for education, ``married`` for marital status and the first
    country code in sort order.
    """

    controls: str = "none"
    missing: str = "listwise_drop"
    include_male_dummy: bool = True

    def __post_init__(self):
        if self.controls not in CONTROL_SETS:
            raise ConfigurationError(f"controls must be one of {CONTROL_SETS}, got {self.controls!r}")
        if self.missing not in MISSING_POLICIES:
            raise ConfigurationError(f"missing must be one of {MISSING_POLICIES}, got {self.missing!r}")
        if not self.include_male_dummy:
            raise ConfigurationError("the male dummy is required")


@dataclass
class Design:
    """Design matrix with outcome, cluster ids and column names.

    Unpacks as ``X, y, clusters, names``; ``rows`` are the sample positions
    retained after missing-covariate handling.
    """

    X: np.ndarray
    y: np.ndarray
    clusters: np.ndarray
    names: list
    rows: np.ndarray
    dropped_constant: list = field(default_factory=list)
    n_dropped_missing: int = 0

    def __iter__(self):
        return iter((self.X, self.y, self.clusters, self.names))


def build_design(sample: Sample, spec: ModelSpec = ModelSpec()) -> Design:
    """Encode ``sample`` as ``[intercept, male, controls...]``.

    Categorical controls are one-hot encoded against their reference level;
    zero-variance columns other than the intercept are dropped with a
    warning. Under ``missing="listwise_drop"`` rows with any missing control
    are removed; under ``"missing_indicator"`` they are kept with a missing
    dummy (numeric values set to 0). Regressions without controls never drop rows.
    """
    if sample.empty:
        raise EstimationError(f"empty sample for window {sample.window.kind}, mode {sample.mode}")
    n = len(sample)
    cols = {"intercept": np.ones(n), "male": sample.male.astype(float)}
    keep = np.ones(n, dtype=bool)
    if spec.controls == "full":
        f = sample.table.frame.iloc[sample.rows]
        for var in ("mother_edu", "father_edu", "mother_marital"):
            miss = f[var].isna().to_numpy()
            values = f[var].to_numpy(dtype=object, na_value=None)
            levels = [lv for lv in _CATEGORY_LEVELS[var] if lv != REFERENCE_CATEGORIES[var]]
            levels += sorted({v for v in values if v is not None} - set(_CATEGORY_LEVELS[var]))
            for lv in levels:
                cols[f"{var}[{lv}]"] = (values == lv).astype(float)
            keep = _handle_missing(cols, var, miss, keep, spec)
        for var in _NUMERIC_CONTROLS:
            values = f[var].to_numpy(dtype=float, na_value=np.nan)
            miss = np.isnan(values)
            cols[var] = np.where(miss, 0.0, values)
            keep = _handle_missing(cols, var, miss, keep, spec)
        country = f["country"].to_numpy(dtype=object)
        for c in sorted(set(country))[1:]:
            cols[f"country[{c}]"] = (country == c).astype(float)

    names = list(cols)
    X = np.column_stack([cols[k] for k in names])[keep]
    y = sample.outcome[keep].astype(float)
    if len(y) == 0:
        raise EstimationError("every row was dropped for missing covariates")

    dropped = []
    if len(y) > 1:
        const = np.ptp(X, axis=0) == 0
        const[0] = False
        if const[1]:
            raise EstimationError("the male dummy has no variation in this sample")
        dropped = [nm for nm, c in zip(names, const) if c]
        if dropped:
            warnings.warn(f"dropping constant column(s): {', '.join(dropped)}", stacklevel=2)
            X = X[:, ~const]
            names = [nm for nm, c in zip(names, const) if not c]
    return Design(
        X=X,
        y=y,
        clusters=sample.clusters[keep],
        names=names,
        rows=np.flatnonzero(keep),
        dropped_constant=dropped,
        n_dropped_missing=int(n - keep.sum()),
    )


def _handle_missing(cols, var, miss, keep, spec):
    if not miss.any():
        return keep
    if spec.missing == "listwise_drop":
        return keep & ~miss
    cols[f"{var}[missing]"] = miss.astype(float)
    return keep


class OLSResult(NamedTuple):
    coef: np.ndarray
    resid: np.ndarray


def _qr_checked(X, names=None):
    """Pivoted QR of the column-scaled design; raises on rank deficiency."""
    n, k = X.shape
    if n < k:
        raise RankDeficiencyError(f"{n} observations for {k} columns", names or [])
    # max-abs scaling cannot underflow, unlike column norms
    scale = np.max(np.abs(X), axis=0)
    if np.any(scale == 0):
        zero = [names[j] if names else j for j in np.flatnonzero(scale == 0)]
        raise RankDeficiencyError(f"all-zero column(s): {zero}", zero)
    Q, R, piv = linalg.qr(X / scale, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    tol = max(n, k) * np.finfo(float).eps * diag[0]
    rank = int(np.sum(diag > tol))
    if rank < k:
        bad = [names[j] if names else int(j) for j in piv[rank:]]
        raise RankDeficiencyError(f"design is rank deficient; collinear column(s): {bad}", bad)
    return Q, R, piv, scale


def fit_ols(X, y, names=None) -> OLSResult:
    """Least squares by column-pivoted Householder QR.

    Parameters
    ----------
    X : ndarray, shape (n, k)
    y : ndarray, shape (n,)
    names : list of str, optional
        Column names used in the rank-deficiency message.

    Raises
    ------
    RankDeficiencyError
        If ``X`` does not have full column rank.
    """
    coef, resid, _ = _ols(X, y, names)
    return OLSResult(coef, resid)


def _ols(X, y, names=None):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise EstimationError(f"incompatible shapes {X.shape} and {y.shape}")
    Q, R, piv, scale = _qr_checked(X, names)
    beta_p = linalg.solve_triangular(R, Q.T @ y)
    coef = np.empty(X.shape[1])
    coef[piv] = beta_p
    coef /= scale
    return coef, y - X @ coef, _bread_from_qr(R, piv, scale)


def _bread(X):
    """``(X'X)^{-1}`` from the QR factor, without forming the normal equations."""
    _, R, piv, scale = _qr_checked(X)
    return _bread_from_qr(R, piv, scale)


def _bread_from_qr(R, piv, scale):
    Rinv = linalg.solve_triangular(R, np.eye(R.shape[0]))
    A = np.empty_like(Rinv)
    A[piv] = Rinv
    # variances past the float range are inf, which is the right answer there
    with np.errstate(over="ignore"):
        A /= scale[:, None]
        return A @ A.T


def cluster_scores(X, resid, clusters) -> np.ndarray:
    """Per-cluster score sums ``X_g' u_g`` in ascending cluster order (fixed summation order)."""
    clusters = np.asarray(clusters)
    order = np.argsort(clusters, kind="stable")
    sc = clusters[order]
    starts = np.flatnonzero(np.r_[True, sc[1:] != sc[:-1]])
    return np.add.reduceat(X[order] * resid[order, None], starts, axis=0)


def cluster_vcov(X, resid, clusters, *, bread=None) -> np.ndarray:
    """Cluster-robust sandwich ``B^{-1} M B^{-1}`` with ``B = X'X`` and ``M = sum_g s_g s_g'``.

    Scaled by ``G/(G-1) * (N-1)/(N-K)``. With one observation per cluster
    this is the HC1 estimator. ``bread`` may pass a precomputed ``(X'X)^{-1}``.
    """
    X = np.asarray(X, dtype=float)
    resid = np.asarray(resid, dtype=float)
    n, k = X.shape
    if len(resid) != n or len(clusters) != n:
        raise EstimationError("design, residuals and clusters differ in length")
    scores = cluster_scores(X, resid, clusters)
    g = scores.shape[0]
    if g < 2:
        raise EstimationError(f"cluster-robust covariance needs at least 2 clusters, got {g}")
    if n <= k:
        raise EstimationError(f"{n} observations leave no residual degrees of freedom for {k} columns")
    if bread is None:
        bread = _bread(X)
    meat = scores.T @ scores
    factor = g / (g - 1) * (n - 1) / (n - k)
    V = factor * bread @ meat @ bread
    return (V + V.T) / 2


@dataclass
class RegressionFit:
    """Point estimates with mother-clustered covariance.

    ``theta`` is the coefficient on the male dummy. Residuals are kept in
    memory only; JSON carries coefficients, standard errors and counts.
    """

    names: list
    coef: np.ndarray
    vcov: np.ndarray
    n_obs: int
    n_clusters: int
    window: str = ""
    mode: str = ""
    society: str = ""
    estimator: str = "lpm"
    controls: str = "none"
    residuals: Optional[np.ndarray] = field(default=None, repr=False, compare=False)
    n_dropped_missing: int = 0

    @property
    def coefficients(self) -> dict:
        return dict(zip(self.names, map(float, self.coef)))

    @property
    def se(self) -> dict:
        return dict(zip(self.names, map(float, np.sqrt(np.clip(np.diag(self.vcov), 0, None)))))

    @property
    def theta(self) -> float:
        return self.coefficients["male"]

    @property
    def theta_se(self) -> float:
        return self.se["male"]

    @property
    def key(self) -> tuple:
        return (self.society, self.window, self.mode)

    def to_dict(self) -> dict:
        return {
            "coefficients": self.coefficients,
            "se": self.se,
            "n_obs": int(self.n_obs),
            "n_clusters": int(self.n_clusters),
            "window": self.window,
            "mode": self.mode,
            "society": self.society,
            "estimator": self.estimator,
            "controls": self.controls,
            "n_dropped_missing": int(self.n_dropped_missing),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "RegressionFit":
        try:
            names = list(d["coefficients"])
            se = np.array([d["se"][n] for n in names], dtype=float)
            return cls(
                names=names,
                coef=np.array([d["coefficients"][n] for n in names], dtype=float),
                vcov=np.diag(se**2),
                n_obs=int(d["n_obs"]),
                n_clusters=int(d["n_clusters"]),
                window=d.get("window", ""),
                mode=d.get("mode", ""),
                society=d.get("society", ""),
                estimator=d.get("estimator", "lpm"),
                controls=d.get("controls", "none"),
                n_dropped_missing=int(d.get("n_dropped_missing", 0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise EstimationError(f"malformed fit record: {exc}") from None

    @classmethod
    def from_json(cls, text: str) -> "RegressionFit":
        return cls.from_dict(json.loads(text))


def _n_clusters(clusters) -> int:
    return len(np.unique(clusters))


def fit_lpm(sample: Sample, spec: ModelSpec = ModelSpec()) -> RegressionFit:
    """Cross-sectional LPM: outcome on intercept, male dummy and ``spec`` controls."""
    design = build_design(sample, spec)
    X, y, clusters, names = design
    coef, resid, bread = _ols(X, y, names)
    return RegressionFit(
        names=names,
        coef=coef,
        vcov=cluster_vcov(X, resid, clusters, bread=bread),
        n_obs=len(y),
        n_clusters=_n_clusters(clusters),
        window=sample.window.kind,
        mode=sample.mode,
        society=sample.society,
        estimator="lpm",
        controls=spec.controls,
        residuals=resid,
        n_dropped_missing=design.n_dropped_missing,
    )


def fit_twin_fe(sample: Sample) -> RegressionFit:
    """Twin fixed-effect gap: mean over mixed-sex pairs of ``outcome_male - outcome_female``.

    The standard error is the cluster-robust variance of the pair
    differences with mothers as clusters. This equals the male coefficient
    of an LPM with one indicator per twin pair fitted on all twins.
    """
    if sample.mode != "mf_pairs":
        raise ConfigurationError(f"fit_twin_fe needs an mf_pairs sample, got {sample.mode!r}")
    if sample.empty:
        raise EstimationError(f"no complete mixed-sex pairs for window {sample.window.kind}")
    male = sample.male.reshape(-1, 2)
    if not (male[:, 0].all() and not male[:, 1].any()):
        raise EstimationError("mf_pairs sample is not ordered as (male, female) pairs")
    y = sample.outcome.astype(float).reshape(-1, 2)
    diff = y[:, 0] - y[:, 1]
    clusters = sample.clusters[::2]
    ones = np.ones((len(diff), 1))
    theta = float(diff.mean())
    resid = diff - theta
    if _n_clusters(clusters) >= 2 and len(diff) > 1:
        vcov = cluster_vcov(ones, resid, clusters)
    else:
        vcov = np.full((1, 1), np.nan)
    return RegressionFit(
        names=["male"],
        coef=np.array([theta]),
        vcov=vcov,
        n_obs=len(sample),
        n_clusters=_n_clusters(clusters),
        window=sample.window.kind,
        mode=sample.mode,
        society=sample.society,
        estimator="twin_fe",
        controls="none",
        residuals=resid,
    )


def within_demean(values, groups) -> np.ndarray:
    """Subtract group means from each column of ``values``."""
    values = np.asarray(values, dtype=float)
    codes, inv = np.unique(np.asarray(groups), return_inverse=True)
    counts = np.bincount(inv, minlength=len(codes)).astype(float)
    two_d = values.ndim == 2
    v = values if two_d else values[:, None]
    means = np.stack([np.bincount(inv, weights=v[:, j], minlength=len(codes)) for j in range(v.shape[1])], 1)
    out = v - (means / counts[:, None])[inv]
    return out if two_d else out[:, 0]


def fit_fixed_effects(sample: Sample, absorb: str = "mother") -> RegressionFit:
    """Within estimator of the male gap with group effects absorbed.

    ``absorb="mother"`` gives the sibling (family) fixed-effect estimate;
    ``absorb="pair"`` gives the twin-pair fixed-effect estimate and requires
    a twin sample. Standard errors are clustered by mother with ``K = 1``.
    """
    if absorb == "mother":
        groups = sample.clusters
    elif absorb == "pair":
        groups = sample.pair_ids
        if np.any(groups < 0):
            raise ConfigurationError("absorb='pair' needs a sample of matched twins")
    else:
        raise ConfigurationError(f"absorb must be 'mother' or 'pair', got {absorb!r}")
    if sample.empty:
        raise EstimationError(f"empty sample for window {sample.window.kind}")
    male_dm = within_demean(sample.male.astype(float), groups)
    if not np.any(np.abs(male_dm) > 1e-12):
        raise EstimationError(f"no within-{absorb} variation in sex")
    y_dm = within_demean(sample.outcome.astype(float), groups)
    X = male_dm[:, None]
    coef, resid, bread = _ols(X, y_dm, ["male"])
    clusters = sample.clusters
    return RegressionFit(
        names=["male"],
        coef=coef,
        vcov=cluster_vcov(X, resid, clusters, bread=bread),
        n_obs=len(sample),
        n_clusters=_n_clusters(clusters),
        window=sample.window.kind,
        mode=sample.mode,
        society=sample.society,
        estimator=f"{absorb}_fe",
        controls="none",
        residuals=resid,
    )


def fit_family_fe(sample: Sample) -> RegressionFit:
    """Sibling fixed-effect gap: within-mother demeaned LPM.

    Removes mother-constant unobservables but not delivery-specific prenatal
    factors, so it is biased for the biology effect whenever those vary
    across a mother's deliveries.
    """
    return fit_fixed_effects(sample, absorb="mother")


def fits_frame(fits) -> pd.DataFrame:
    """One row per fit: key, estimator, controls, theta, se, n_obs, n_clusters."""
    rows = [
        {
            "society": f.society,
            "window": f.window,
            "mode": f.mode,
            "estimator": f.estimator,
            "controls": f.controls,
            "theta": f.theta,
            "se": f.theta_se,
            "n_obs": f.n_obs,
            "n_clusters": f.n_clusters,
        }
        for f in fits
    ]
    return pd.DataFrame(rows)
