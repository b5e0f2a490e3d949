"""Split the male-female mortality gap into prenatal, biology and preference components.

For each window, with ``theta`` the cross-sectional LPM gap and ``tfe`` the
twin fixed-effect gap in the non-discriminatory (ND) and discriminatory (D)
society::

    prenatal_ND = theta_ND - tfe_ND     biology_ND = tfe_ND    preference_ND = 0
    prenatal_D  = theta_D  - tfe_D      biology_D  = tfe_ND    preference_D  = tfe_D - tfe_ND

A negative ``preference_D`` means the discriminatory society raises girls'
mortality relative to boys'.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pandas as pd

from .domain import WINDOW_ORDER, get_window, parse_windows
from .errors import ConfigurationError, DataError, EstimationError, MissingFitError
from .estimate import ModelSpec, RegressionFit
from .ingest import BirthTable
from .pipeline import estimate_fits

INPUTS = ("theta_nd", "theta_tfe_nd", "theta_d", "theta_tfe_d")
OUTPUTS = ("theta1_nd", "theta2_nd", "theta3_nd", "theta1_d", "theta2_d", "theta3_d")
EFFECT_LABELS = {
    "theta1": "Prenatal environment",
    "theta2": "Child biology",
    "theta3": "Parental preferences",
}
MAX_DISCARD_SHARE = 0.2


@dataclass(frozen=True)
class PeriodDecomposition:
    """Inputs and components for one mortality window."""

    window: str
    theta_nd: float
    theta_tfe_nd: float
    theta_d: float
    theta_tfe_d: float
    theta1_nd: float
    theta2_nd: float
    theta3_nd: float
    theta1_d: float
    theta2_d: float
    theta3_d: float
    se: Optional[dict] = None

    def inputs(self) -> dict:
        return {k: getattr(self, k) for k in INPUTS}

    def outputs(self) -> dict:
        return {k: getattr(self, k) for k in OUTPUTS}

    def to_dict(self) -> dict:
        d = {"window": self.window, **self.inputs(), **self.outputs()}
        if self.se is not None:
            d["se"] = dict(self.se)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PeriodDecomposition":
        return cls(**{k: d[k] for k in ("window",) + INPUTS + OUTPUTS}, se=d.get("se"))


def decompose_period(theta_nd, theta_tfe_nd, theta_d, theta_tfe_d, window) -> PeriodDecomposition:
    """Apply the six-equation decomposition to one window's four estimates.

    >>> p = decompose_period(0.045, 0.027, 0.027, -0.010, "I")
    >>> round(p.theta1_d, 3), round(p.theta3_d, 3)
    (0.037, -0.037)
    """
    w = get_window(window).kind
    vals = [theta_nd, theta_tfe_nd, theta_d, theta_tfe_d]
    for name, v in zip(INPUTS, vals):
        try:
            ok = math.isfinite(v)
        except TypeError:
            ok = False
        if not ok:
            raise DataError(f"{w}: {name} must be a finite number, got {v!r}")
    theta_nd, theta_tfe_nd, theta_d, theta_tfe_d = map(float, vals)
    return PeriodDecomposition(
        window=w,
        theta_nd=theta_nd,
        theta_tfe_nd=theta_tfe_nd,
        theta_d=theta_d,
        theta_tfe_d=theta_tfe_d,
        theta1_nd=theta_nd - theta_tfe_nd,
        theta2_nd=theta_tfe_nd,
        theta3_nd=0.0,
        theta1_d=theta_d - theta_tfe_d,
        theta2_d=theta_tfe_nd,
        theta3_d=theta_tfe_d - theta_tfe_nd,
    )


@dataclass(frozen=True)
class DecompositionTable:
    """Decompositions in canonical window order, with provenance."""

    periods: dict
    provenance: dict = field(default_factory=dict)
    n_replicates: int = 0
    n_discarded: int = 0

    def __getitem__(self, window) -> PeriodDecomposition:
        return self.periods[get_window(window).kind]

    def __iter__(self):
        return iter(self.periods.values())

    def __len__(self):
        return len(self.periods)

    @property
    def windows(self) -> tuple:
        return tuple(self.periods)

    @property
    def has_se(self) -> bool:
        return any(p.se is not None for p in self.periods.values())

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for p in self.periods.values():
            row = {"window": p.window, **p.inputs(), **p.outputs()}
            if self.has_se:
                row.update({f"se_{k}": (p.se or {}).get(k, np.nan) for k in OUTPUTS})
            rows.append(row)
        cols = ["window", *INPUTS, *OUTPUTS] + ([f"se_{k}" for k in OUTPUTS] if self.has_se else [])
        return pd.DataFrame(rows, columns=cols)

    def to_dict(self) -> dict:
        return {
            "kind": "decomposition",
            "periods": [p.to_dict() for p in self.periods.values()],
            "provenance": self.provenance,
            "n_replicates": self.n_replicates,
            "n_discarded": self.n_discarded,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DecompositionTable":
        periods = [PeriodDecomposition.from_dict(p) for p in d["periods"]]
        return cls(
            periods={p.window: p for p in periods},
            provenance=d.get("provenance", {}),
            n_replicates=d.get("n_replicates", 0),
            n_discarded=d.get("n_discarded", 0),
        )


def _ordered(periods: dict) -> dict:
    return {w: periods[w] for w in WINDOW_ORDER if w in periods}


def decompose_coefficients(coeffs: dict) -> DecompositionTable:
    """Decompose directly from point estimates.

    ``coeffs`` maps a window to ``{theta_nd, theta_tfe_nd, theta_d,
    theta_tfe_d}``, the layout of the direct-entry JSON file.
    """
    if not isinstance(coeffs, dict) or not coeffs:
        raise DataError("coefficients must be a non-empty mapping of window -> estimates")
    periods = {}
    for key, vals in coeffs.items():
        w = get_window(key).kind
        if w in periods:
            raise DataError(f"window {w} given twice")
        if not isinstance(vals, dict):
            raise DataError(f"{w}: expected an object with {', '.join(INPUTS)}")
        missing = [k for k in INPUTS if k not in vals]
        extra = sorted(set(vals) - set(INPUTS))
        if missing or extra:
            raise DataError(f"{w}: missing {missing} / unexpected {extra} keys")
        periods[w] = decompose_period(*(vals[k] for k in INPUTS), w)
    return DecompositionTable(_ordered(periods), provenance={"source": "direct coefficients"})


def load_coefficients(path) -> DecompositionTable:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from None
    return decompose_coefficients(data)


def _theta(fit) -> float:
    return fit.theta if isinstance(fit, RegressionFit) else float(fit)


def _describe(fit) -> dict:
    if isinstance(fit, RegressionFit):
        return {"estimator": fit.estimator, "controls": fit.controls, "n_obs": fit.n_obs}
    return {"estimator": "given"}


def decompose_all(fits: dict, windows=None) -> DecompositionTable:
    """Decompose every window from fitted models.

    Parameters
    ----------
    fits : dict
        Keyed by ``(society, window, mode)``. ``mode="all_twins"`` is the
        cross-sectional LPM (the controls-included fit), ``mode="mf_pairs"``
        the twin fixed-effect fit. Values are RegressionFit or plain numbers.
    windows : iterable, optional
        Defaults to every window appearing in ``fits``.

    Raises
    ------
    MissingFitError
        Naming the first absent ``(society, window, mode)`` cell.
    """
    if windows is None:
        present = {k[1] for k in fits}
        if not present:
            raise MissingFitError("no fits supplied")
        windows = parse_windows(present)
    else:
        windows = parse_windows(windows)
    periods, provenance = {}, {}
    for w in windows:
        cells = [("ND", w, "all_twins"), ("ND", w, "mf_pairs"), ("D", w, "all_twins"), ("D", w, "mf_pairs")]
        for c in cells:
            if c not in fits:
                raise MissingFitError(f"missing fit for society={c[0]}, window={c[1]}, mode={c[2]}")
        periods[w] = decompose_period(*(_theta(fits[c]) for c in cells), w)
        provenance[w] = {"/".join(c): _describe(fits[c]) for c in cells}
    return DecompositionTable(periods, provenance={"source": "fits", "cells": provenance})


# -- cluster bootstrap ----------------------------------------------------------


def _replicate_rng(seed, index):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(index,))))


def resample_mothers(table: BirthTable, rng: np.random.Generator, tag: str = "") -> BirthTable:
    """Draw mothers with replacement; each draw becomes a distinct mother (and cluster)."""
    codes = table.mother_codes
    g = table.n_mothers
    order = np.argsort(codes, kind="stable")
    counts = np.bincount(codes, minlength=g)
    starts = np.cumsum(counts) - counts
    drawn = rng.integers(0, g, size=g)
    k = counts[drawn]
    pos = np.repeat(np.arange(g), k)
    within = np.arange(k.sum()) - np.repeat(np.cumsum(k) - k, k)
    rows = order[np.repeat(starts[drawn], k) + within]
    frame = table.frame.take(rows).reset_index(drop=True)
    pos_s = pd.Series(pos).astype("string")
    frame["mother_id"] = tag + "b" + pos_s
    frame["child_id"] = frame["child_id"] + "#" + pos_s
    return BirthTable(frame, validate=False)


def bootstrap_decomposition(
    table_nd: BirthTable,
    table_d: BirthTable,
    windows=None,
    B: int = 0,
    seed: int = 0,
    *,
    spec: ModelSpec = ModelSpec(controls="full"),
    workers: int = 1,
) -> DecompositionTable:
    """Point decomposition plus mother-level cluster-bootstrap standard errors.

    Mothers are resampled with replacement independently in each society and
    the whole pipeline (matching, samples, fits, decomposition) is rerun per
    replicate. Replicate ``r`` draws from a stream keyed by ``(seed, r)``, so
    results do not depend on ``workers``. Replicates in which a required fit
    cannot be computed are discarded; more than 20% discarded is an error.
    """
    if B < 0:
        raise ConfigurationError(f"B must be >= 0, got {B}")
    windows = parse_windows(windows)
    table_nd, table_d = _single_society(table_nd, "ND"), _single_society(table_d, "D")

    def run(tables):
        fits = {}
        for t in tables:
            fits.update(estimate_fits(t, windows, spec))
        return decompose_all(fits, windows)

    point = run((table_nd, table_d))
    if B == 0:
        return point

    def replicate(r):
        rng = _replicate_rng(seed, r)
        try:
            rep = run((resample_mothers(table_nd, rng, "ND"), resample_mothers(table_d, rng, "D")))
        except EstimationError:
            return None
        return np.array([[getattr(rep[w], k) for k in OUTPUTS] for w in windows])

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(replicate, range(B)))
    else:
        results = [replicate(r) for r in range(B)]
    kept = [r for r in results if r is not None]
    n_discarded = B - len(kept)
    if n_discarded > MAX_DISCARD_SHARE * B:
        raise EstimationError(f"{n_discarded} of {B} bootstrap replicates had an empty required cell")
    if len(kept) < 2:
        raise EstimationError("fewer than two usable bootstrap replicates")
    sd = np.std(np.stack(kept), axis=0, ddof=1)
    periods = {}
    for i, w in enumerate(windows):
        p = point[w]
        periods[w] = PeriodDecomposition(**{**p.to_dict(), "se": dict(zip(OUTPUTS, map(float, sd[i])))})
    prov = dict(point.provenance, bootstrap={"B": B, "seed": seed, "unit": "mother", "by": "society"})
    return DecompositionTable(periods, prov, n_replicates=len(kept), n_discarded=n_discarded)


def _single_society(table: BirthTable, society: str) -> BirthTable:
    present = table.societies()
    if present != (society,):
        raise DataError(f"expected a table of society {society} only, found {present}")
    return table
