"""Synthetic birth histories with planted prenatal, biology and discrimination effects.

Each delivery carries a binary prenatal factor ``p``. It tilts the sex of
the children (``P(male | p) = 0.5 + sex_shift * (2p - 1)``) and adds
``prenatal_mortality_effect`` to their death hazard. Twins share the
delivery's ``p``. Survival is sequential over the NN, PNN and CH windows
with additive hazards::

    h_w = base_hazard[w] + biology_effect[w] * male + prenatal_mortality_effect[w] * p
          + discrimination_effect[w] * female * [society == "D"]

Random streams are counter-based (Philox) and keyed by
``(seed, society, chunk)``, so output does not depend on worker count.
"""

from __future__ import annotations

import itertools
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import pandas as pd

from .domain import ASSETS, EDUCATION_LEVELS, MARITAL_STATUSES, SOCIETIES, WINDOW_ORDER
from .errors import ConfigurationError
from .ingest import COLUMNS, BirthTable

HAZARD_WINDOWS = ("NN", "PNN", "CH")
# month ranges [lo, hi) for death ages drawn inside each fatal window
_DEATH_MONTHS = {"NN": (0, 1), "PNN": (1, 12), "CH": (12, 60)}
CHUNK_MOTHERS = 4096


def _zeros():
    return {w: 0.0 for w in HAZARD_WINDOWS}


@dataclass(frozen=True)
class SynthConfig:
    """Parameters of the data-generating process.

    Per-window dictionaries are keyed by ``"NN"``, ``"PNN"`` and ``"CH"``.
    ``deliveries_per_mother`` is an integer or a mapping from count to
    probability. ``prenatal_redraw`` is ``"delivery"`` (a fresh ``p`` for each
    delivery) or ``"mother"`` (one ``p`` per mother).
    """

    n_mothers: dict = field(default_factory=lambda: {"ND": 1000, "D": 1000})
    twin_rate: float = 0.0155
    higher_order_rate: float = 0.0
    deliveries_per_mother: object = 3
    prenatal_prevalence: float = 0.5
    sex_shift: float = 0.0
    prenatal_redraw: str = "delivery"
    base_hazard: dict = field(default_factory=lambda: {"NN": 0.03, "PNN": 0.02, "CH": 0.02})
    biology_effect: dict = field(default_factory=_zeros)
    prenatal_mortality_effect: dict = field(default_factory=_zeros)
    discrimination_effect: dict = field(default_factory=_zeros)
    countries: dict = field(default_factory=lambda: {"ND": ["AA", "BB", "CC"], "D": ["IN"]})
    mother_age_mean: float = 35.0
    mother_age_sd: float = 8.0
    mother_edu_probs: dict = field(
        default_factory=lambda: {"none": 0.55, "primary": 0.33, "secondary+": 0.12}
    )
    father_edu_probs: dict = field(
        default_factory=lambda: {"none": 0.58, "primary": 0.30, "secondary+": 0.12}
    )
    marital_probs: dict = field(
        default_factory=lambda: {
            "married": 0.80,
            "single": 0.02,
            "widowed": 0.05,
            "partner": 0.08,
            "not_living_with_partner": 0.03,
            "divorced": 0.02,
        }
    )
    household_size_mean: float = 8.0
    asset_probs: dict = field(
        default_factory=lambda: {"electricity": 0.2, "radio": 0.55, "tv": 0.13, "car": 0.04}
    )
    covariate_missing_rate: float = 0.0
    electricity_prenatal_shift: float = 0.0
    first_birth_years: tuple = (1985, 2000)
    seed: int = 0

    def __post_init__(self):
        validate_config(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SynthConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigurationError(f"unknown config field(s): {', '.join(unknown)}")
        data = dict(data)
        if "first_birth_years" in data:
            data["first_birth_years"] = tuple(data["first_birth_years"])
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigurationError(str(exc)) from None

    @classmethod
    def from_json(cls, path) -> "SynthConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(data, dict):
            raise ConfigurationError(f"{path}: config must be a JSON object")
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["first_birth_years"] = list(self.first_birth_years)
        return d

    def replace(self, **changes) -> "SynthConfig":
        return SynthConfig.from_dict({**self.to_dict(), **changes})

    def hazard(self, window: str, male, prenatal, society: str):
        d = self.discrimination_effect[window] if society == "D" else 0.0
        return (
            self.base_hazard[window]
            + self.biology_effect[window] * male
            + self.prenatal_mortality_effect[window] * prenatal
            + d * (1 - male)
        )

    def p_male(self, prenatal):
        return 0.5 + self.sex_shift * (2 * prenatal - 1)


def _check_prob(name, value):
    if not isinstance(value, (int, float)) or not 0.0 <= float(value) <= 1.0:
        raise ConfigurationError(f"{name} must be a probability in [0, 1], got {value!r}")


def _check_distribution(name, probs, allowed=None):
    if not isinstance(probs, dict) or not probs:
        raise ConfigurationError(f"{name} must be a non-empty mapping")
    if allowed is not None:
        bad = sorted(set(probs) - set(allowed))
        if bad:
            raise ConfigurationError(f"{name}: unknown categories {bad}")
    for k, v in probs.items():
        _check_prob(f"{name}[{k}]", v)
    if abs(sum(probs.values()) - 1.0) > 1e-9:
        raise ConfigurationError(f"{name}: probabilities sum to {sum(probs.values())}, not 1")


def validate_config(cfg: SynthConfig):
    """Raise ConfigurationError unless every derived probability lies in [0, 1]."""
    if not isinstance(cfg.n_mothers, dict) or not set(cfg.n_mothers) <= set(SOCIETIES):
        raise ConfigurationError("n_mothers must map society (ND/D) to a count")
    for soc, n in cfg.n_mothers.items():
        if not isinstance(n, int) or n < 0:
            raise ConfigurationError(f"n_mothers[{soc}] must be a non-negative integer")
        if n and not cfg.countries.get(soc):
            raise ConfigurationError(f"countries[{soc}] must list at least one country code")
    _check_prob("twin_rate", cfg.twin_rate)
    _check_prob("higher_order_rate", cfg.higher_order_rate)
    if cfg.twin_rate + cfg.higher_order_rate > 1:
        raise ConfigurationError("twin_rate + higher_order_rate exceeds 1")
    _check_prob("prenatal_prevalence", cfg.prenatal_prevalence)
    _check_prob("covariate_missing_rate", cfg.covariate_missing_rate)
    if not 0.0 <= cfg.sex_shift <= 0.5:
        raise ConfigurationError(f"sex_shift must be in [0, 0.5], got {cfg.sex_shift}")
    if cfg.prenatal_redraw not in ("delivery", "mother"):
        raise ConfigurationError("prenatal_redraw must be 'delivery' or 'mother'")
    dpm = cfg.deliveries_per_mother
    if isinstance(dpm, dict):
        _check_distribution("deliveries_per_mother", dpm)
        if any(int(k) < 1 for k in dpm):
            raise ConfigurationError("deliveries_per_mother counts must be >= 1")
    elif not isinstance(dpm, int) or dpm < 1:
        raise ConfigurationError("deliveries_per_mother must be a positive integer or a distribution")
    for name in ("base_hazard", "biology_effect", "prenatal_mortality_effect", "discrimination_effect"):
        d = getattr(cfg, name)
        if not isinstance(d, dict) or set(d) != set(HAZARD_WINDOWS):
            raise ConfigurationError(f"{name} must have exactly the keys NN, PNN, CH")
    for w in HAZARD_WINDOWS:
        for male, p, soc in itertools.product((0, 1), (0, 1), SOCIETIES):
            h = cfg.hazard(w, male, p, soc)
            if not 0.0 <= h <= 1.0:
                raise ConfigurationError(
                    f"hazard for window {w} (male={male}, prenatal={p}, society={soc}) is {h:.6g}, "
                    "outside [0, 1]"
                )
    _check_distribution("mother_edu_probs", cfg.mother_edu_probs, EDUCATION_LEVELS)
    _check_distribution("father_edu_probs", cfg.father_edu_probs, EDUCATION_LEVELS)
    _check_distribution("marital_probs", cfg.marital_probs, MARITAL_STATUSES)
    if set(cfg.asset_probs) != set(ASSETS):
        raise ConfigurationError(f"asset_probs must have keys {', '.join(ASSETS)}")
    for k, v in cfg.asset_probs.items():
        _check_prob(f"asset_probs[{k}]", v)
    _check_prob("electricity + electricity_prenatal_shift",
                cfg.asset_probs["electricity"] + cfg.electricity_prenatal_shift)
    if cfg.household_size_mean < 1:
        raise ConfigurationError("household_size_mean must be >= 1")
    lo, hi = cfg.first_birth_years
    if lo > hi:
        raise ConfigurationError("first_birth_years must be (low, high)")
    if not isinstance(cfg.seed, int) or not 0 <= cfg.seed < 2**64:
        raise ConfigurationError("seed must be an integer in [0, 2**64)")


# -- generation ------------------------------------------------------------------


def _rng(seed, soc_index, chunk_index):
    ss = np.random.SeedSequence(seed, spawn_key=(soc_index, chunk_index))
    return np.random.Generator(np.random.Philox(ss))


def _categorical(rng, probs: dict, n):
    cats = list(probs)
    return np.asarray(cats, dtype=object)[rng.choice(len(cats), size=n, p=list(probs.values()))]


def _generate_chunk(cfg: SynthConfig, society: str, soc_index: int, chunk: int, first: int, n: int):
    rng = _rng(cfg.seed, soc_index, chunk)
    mothers = np.arange(first, first + n)

    dpm = cfg.deliveries_per_mother
    if isinstance(dpm, dict):
        counts = np.array([int(k) for k in dpm])
        k = counts[rng.choice(len(counts), size=n, p=list(dpm.values()))]
    else:
        k = np.full(n, dpm, dtype=np.int64)
    n_del = int(k.sum())
    del_mother = np.repeat(np.arange(n), k)
    starts = np.cumsum(k) - k
    del_order = np.arange(n_del) - np.repeat(starts, k)

    # timing: deliveries at least 15 months apart; survey >= 60 months after the last
    lo, hi = cfg.first_birth_years
    t0 = rng.integers(lo * 12, hi * 12 + 12, size=n)
    gaps = np.where(del_order > 0, 15 + rng.integers(0, 37, size=n_del), 0)
    cs = np.cumsum(gaps)
    birth_idx = t0[del_mother] + cs - np.repeat(cs[starts], k)
    last_birth = birth_idx[starts + k - 1]
    survey_idx = last_birth + 60 + rng.integers(0, 25, size=n)

    u = rng.random(n_del)
    mult = np.where(u < cfg.twin_rate, 2, np.where(u < cfg.twin_rate + cfg.higher_order_rate, 3, 1))
    p_mother = (rng.random(n) < cfg.prenatal_prevalence).astype(np.int8)
    p_del = (rng.random(n_del) < cfg.prenatal_prevalence).astype(np.int8)
    if cfg.prenatal_redraw == "mother":
        p_del = p_mother[del_mother]

    child_del = np.repeat(np.arange(n_del), mult)
    n_child = len(child_del)
    child_mother = del_mother[child_del]
    p = p_del[child_del]
    male = (rng.random(n_child) < cfg.p_male(p)).astype(np.int8)

    u3 = rng.random((n_child, 3))
    death_draw = {
        w: rng.integers(lo_m, hi_m, size=n_child) for w, (lo_m, hi_m) in _DEATH_MONTHS.items()
    }
    death = np.full(n_child, -1, dtype=np.int64)
    alive = np.ones(n_child, dtype=bool)
    for j, w in enumerate(HAZARD_WINDOWS):
        dies = alive & (u3[:, j] < cfg.hazard(w, male, p, society))
        death[dies] = death_draw[w][dies]
        alive &= ~dies

    # mother-level covariates (mortality-neutral unless a shift is configured)
    countries = list(cfg.countries[society])
    country = np.asarray(countries, dtype=object)[rng.integers(0, len(countries), size=n)]
    mother_age = np.clip(np.rint(rng.normal(cfg.mother_age_mean, cfg.mother_age_sd, size=n)), 15, 80)
    mother_edu = _categorical(rng, cfg.mother_edu_probs, n)
    father_edu = _categorical(rng, cfg.father_edu_probs, n)
    marital = _categorical(rng, cfg.marital_probs, n)
    hh = 1 + rng.poisson(cfg.household_size_mean - 1, size=n)
    p_first = p_del[starts]
    assets = {}
    for a in ASSETS:
        prob = cfg.asset_probs[a] + (cfg.electricity_prenatal_shift * p_first if a == "electricity" else 0)
        assets[a] = (rng.random(n) < prob).astype(np.int64)
    missing = {
        c: rng.random(n) < cfg.covariate_missing_rate
        for c in ("mother_age", "mother_edu", "mother_marital", "father_edu", "household_size") + ASSETS
    }

    mother_ids = np.array([f"{society}{m:07d}" for m in mothers], dtype=object)
    per_mother = np.bincount(child_mother, minlength=n)
    child_num = np.arange(n_child) - np.repeat(np.cumsum(per_mother) - per_mother, per_mother)
    child_birth = birth_idx[child_del]

    def mcol(values, name, dtype):
        s = pd.Series(values[child_mother], dtype=dtype)
        return s.mask(missing[name][child_mother]) if name in missing else s

    mid = pd.Series(mother_ids[child_mother], dtype="string")
    frame = pd.DataFrame(
        {
            "child_id": mid + "-" + pd.Series(child_num + 1).astype("string"),
            "mother_id": mid,
            "country": pd.Series(country[child_mother], dtype="string"),
            "society": pd.Series(np.full(n_child, society, dtype=object), dtype="string"),
            "sex": pd.Series(np.where(male == 1, "M", "F"), dtype="string"),
            "birth_year": child_birth // 12,
            "birth_month": child_birth % 12 + 1,
            "multiplicity": mult[child_del].astype(np.int64),
            "death_age_months": pd.array(np.where(death >= 0, death, np.nan), dtype="Float64").astype("Int64"),
            "age_at_survey_months": pd.array(survey_idx[child_mother] - child_birth, dtype="Int64"),
            "survey_year": survey_idx[child_mother] // 12,
            "mother_age": mcol(mother_age.astype(np.int64), "mother_age", "Int64"),
            "mother_edu": mcol(mother_edu, "mother_edu", "string"),
            "mother_marital": mcol(marital, "mother_marital", "string"),
            "father_edu": mcol(father_edu, "father_edu", "string"),
            "household_size": mcol(hh.astype(np.int64), "household_size", "Int64"),
            **{a: mcol(assets[a], a, "Int64") for a in ASSETS},
        },
        columns=list(COLUMNS),
    )
    audit = pd.DataFrame(
        {
            "child_id": frame["child_id"],
            "delivery_id": mid + "/" + pd.Series(del_order[child_del] + 1).astype("string"),
            "prenatal": p.astype(np.int8),
        }
    )
    return frame, audit


def generate(config: SynthConfig, *, audit: bool = False, workers: int = 1):
    """Simulate a birth table for every society in ``config.n_mothers``.

    Parameters
    ----------
    config : SynthConfig
    audit : bool
        Also return a frame with each child's delivery id and prenatal factor.
    workers : int
        Threads used across chunks of mothers; the output is identical for any value.

    Returns
    -------
    BirthTable, or ``(BirthTable, pandas.DataFrame)`` when ``audit`` is true.
    """
    jobs = []
    for soc_index, society in enumerate(SOCIETIES):
        n = config.n_mothers.get(society, 0)
        for chunk, first in enumerate(range(0, n, CHUNK_MOTHERS)):
            jobs.append((society, soc_index, chunk, first, min(CHUNK_MOTHERS, n - first)))
    run = lambda job: _generate_chunk(config, *job)  # noqa: E731
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(run, jobs))
    else:
        parts = [run(job) for job in jobs]
    if parts:
        frame = pd.concat([f for f, _ in parts], ignore_index=True)
        audit_frame = pd.concat([a for _, a in parts], ignore_index=True)
    else:
        frame = pd.DataFrame({c: pd.Series([], dtype=object) for c in COLUMNS})
        audit_frame = pd.DataFrame({"child_id": [], "delivery_id": [], "prenatal": []})
    table = BirthTable(frame, validate=False)
    return (table, audit_frame) if audit else table


# -- analytical estimands ----------------------------------------------------------


@dataclass(frozen=True)
class PlantedEffects:
    """Population estimands implied by a config, per ``(society, window)``.

    Each cell holds ``theta`` (cross-sectional male-female gap),
    ``theta_tfe`` (within mixed-sex twin pair gap) and the three components.
    """

    cells: dict

    def get(self, society: str, window: str, name: str = "theta") -> float:
        return self.cells[(society, window)][name]

    def to_frame(self) -> pd.DataFrame:
        rows = [{"society": s, "window": w, **v} for (s, w), v in self.cells.items()]
        return pd.DataFrame(rows)


# death window -> (eligible, died) per analysis window; synthetic children are never censored
_STATUS = {
    "I": {"NN": (True, 1), "PNN": (True, 1), "CH": (True, 0), None: (True, 0)},
    "NN": {"NN": (True, 1), "PNN": (True, 0), "CH": (True, 0), None: (True, 0)},
    "PNN": {"NN": (False, 0), "PNN": (True, 1), "CH": (True, 0), None: (True, 0)},
    "CH": {"NN": (False, 0), "PNN": (False, 0), "CH": (True, 1), None: (True, 0)},
}


def _paths(cfg: SynthConfig, male: int, p: int, society: str):
    """Probability of each fatal window (None = survived to 60 months)."""
    out, surv = {}, 1.0
    for w in HAZARD_WINDOWS:
        h = cfg.hazard(w, male, p, society)
        out[w] = surv * h
        surv *= 1 - h
    out[None] = surv
    return out


def _enumerate_cell(cfg: SynthConfig, society: str, window: str):
    status = _STATUS[window]
    prior = {1: cfg.prenatal_prevalence, 0: 1 - cfg.prenatal_prevalence}

    # cross-sectional: one child, lattice over (p, sex, fatal window)
    num = {1: 0.0, 0: 0.0}
    den = {1: 0.0, 0: 0.0}
    for p, male in itertools.product((0, 1), (0, 1)):
        q = cfg.p_male(p)
        w_sex = prior[p] * (q if male else 1 - q)
        for fatal, prob in _paths(cfg, male, p, society).items():
            eligible, died = status[fatal]
            if eligible:
                den[male] += w_sex * prob
                num[male] += w_sex * prob * died
    theta = num[1] / den[1] - num[0] / den[0]

    # twin fixed effect: mixed-sex pairs sharing p, both members eligible
    diff = weight = 0.0
    for p in (0, 1):
        q = cfg.p_male(p)
        w_pair = prior[p] * 2 * q * (1 - q)
        pm, pf = _paths(cfg, 1, p, society), _paths(cfg, 0, p, society)
        for (fm, prm), (ff, prf) in itertools.product(pm.items(), pf.items()):
            (em, dm), (ef, df) = status[fm], status[ff]
            if em and ef:
                weight += w_pair * prm * prf
                diff += w_pair * prm * prf * (dm - df)
    theta_tfe = diff / weight if weight > 0 else float("nan")
    return theta, theta_tfe


def planted_thetas(config: SynthConfig) -> PlantedEffects:
    """Exact population estimands by enumeration over ``(p, sex, survival path)``.

    ``theta1 = theta - theta_tfe`` in each society, ``theta2`` is the
    non-discriminatory within-pair gap and ``theta3`` is the excess within-pair
    gap in the discriminatory society (zero in ND).
    """
    cells = {}
    raw = {(s, w): _enumerate_cell(config, s, w) for s in SOCIETIES for w in WINDOW_ORDER}
    for w in WINDOW_ORDER:
        tfe_nd = raw[("ND", w)][1]
        for s in SOCIETIES:
            theta, tfe = raw[(s, w)]
            cells[(s, w)] = {
                "theta": theta,
                "theta_tfe": tfe,
                "theta1": theta - tfe,
                "theta2": tfe_nd,
                "theta3": tfe - tfe_nd if s == "D" else 0.0,
            }
    return PlantedEffects(cells)


def neonatal_closed_form(config: SynthConfig, society: str = "ND") -> dict:
    """Closed-form NN components via Bayes' rule on the prenatal factor.

    ``theta1 = e * (E[p | male] - E[p | female])`` with
    ``E[p | male] = pi (1/2 + delta) / P(male)``.
    """
    pi, delta = config.prenatal_prevalence, config.sex_shift
    p_male = pi * (0.5 + delta) + (1 - pi) * (0.5 - delta)
    e_m = pi * (0.5 + delta) / p_male if p_male > 0 else 0.0
    e_f = pi * (0.5 - delta) / (1 - p_male) if p_male < 1 else 0.0
    return {
        "theta1": config.prenatal_mortality_effect["NN"] * (e_m - e_f),
        "theta2": config.biology_effect["NN"],
        "theta3": -config.discrimination_effect["NN"] if society == "D" else 0.0,
    }


# -- deterministic tables with prescribed cell counts -------------------------------


def shaped_table(
    society: str = "ND",
    *,
    mf_pairs: int = 0,
    mm_pairs: int = 0,
    ff_pairs: int = 0,
    singletons_male: int = 0,
    singletons_female: int = 0,
    deaths: dict | None = None,
    death_age: int = 0,
    country: str = "XX",
    covariates: dict | None = None,
    id_prefix: str | None = None,
) -> BirthTable:
    """A table with exact group sizes and death counts, for reproducing published margins.

    ``deaths`` maps ``mf_male``, ``mf_female``, ``mm``, ``ff``,
    ``singleton_male`` and ``singleton_female`` to the number of children in
    that cell who die at ``death_age`` months; everyone else survives to 60
    months. Every pair and singleton has its own mother.
    """
    deaths = {k: 0 for k in ("mf_male", "mf_female", "mm", "ff", "singleton_male", "singleton_female")} | (
        deaths or {}
    )
    limits = {
        "mf_male": mf_pairs,
        "mf_female": mf_pairs,
        "mm": 2 * mm_pairs,
        "ff": 2 * ff_pairs,
        "singleton_male": singletons_male,
        "singleton_female": singletons_female,
    }
    for k, v in deaths.items():
        if k not in limits:
            raise ConfigurationError(f"unknown death cell {k!r}")
        if not 0 <= v <= limits[k]:
            raise ConfigurationError(f"deaths[{k}]={v} outside [0, {limits[k]}]")

    def died(n, k, reverse=False):
        d = np.zeros(n, dtype=bool)
        if k:
            if reverse:
                d[n - k:] = True
            else:
                d[:k] = True
        return d

    male_parts, dead_parts, mother_parts, mult_parts = [], [], [], []
    mother = 0

    def add(male, dead, n_mothers, per_mother, mult):
        nonlocal mother
        male_parts.append(male)
        dead_parts.append(dead)
        mother_parts.append(np.repeat(np.arange(mother, mother + n_mothers), per_mother))
        mult_parts.append(np.full(len(male), mult))
        mother += n_mothers

    add(np.tile([True, False], mf_pairs),
        np.stack([died(mf_pairs, deaths["mf_male"]), died(mf_pairs, deaths["mf_female"], True)], 1).ravel(),
        mf_pairs, 2, 2)
    add(np.ones(2 * mm_pairs, bool), died(2 * mm_pairs, deaths["mm"]), mm_pairs, 2, 2)
    add(np.zeros(2 * ff_pairs, bool), died(2 * ff_pairs, deaths["ff"]), ff_pairs, 2, 2)
    add(np.ones(singletons_male, bool), died(singletons_male, deaths["singleton_male"]), singletons_male, 1, 1)
    add(np.zeros(singletons_female, bool), died(singletons_female, deaths["singleton_female"]),
        singletons_female, 1, 1)

    male = np.concatenate(male_parts)
    dead = np.concatenate(dead_parts)
    mothers = np.concatenate(mother_parts)
    n = len(male)
    prefix = id_prefix if id_prefix is not None else society
    mid = prefix + "m" + pd.Series(mothers).astype("string")
    cov = {
        "mother_age": 30,
        "mother_edu": "none",
        "mother_marital": "married",
        "father_edu": "none",
        "household_size": 6,
        "electricity": 0,
        "radio": 1,
        "tv": 0,
        "car": 0,
    } | (covariates or {})
    frame = pd.DataFrame(
        {
            "child_id": prefix + "c" + pd.Series(np.arange(n)).astype("string"),
            "mother_id": mid,
            "country": country,
            "society": society,
            "sex": np.where(male, "M", "F"),
            "birth_year": 2000,
            "birth_month": 1,
            "multiplicity": np.concatenate(mult_parts),
            "death_age_months": pd.array(np.where(dead, death_age, np.nan), dtype="Float64").astype("Int64"),
            "age_at_survey_months": 60,
            "survey_year": 2005,
            **{k: np.full(n, v, dtype=object if isinstance(v, str) else np.int64) for k, v in cov.items()},
        },
        columns=list(COLUMNS),
    )
    return BirthTable(frame, validate=False)
