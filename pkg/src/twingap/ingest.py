"""Birth-history tables: CSV I/O, twin matching and estimation samples."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import pandas as pd

from .domain import (
    ASSETS,
    EDUCATION_LEVELS,
    PAIR_TYPES,
    SOCIETIES,
    BirthRecord,
    MortalityWindow,
    TwinPair,
    get_window,
    window_outcomes,
)
from .errors import ConfigurationError, DataError, SchemaError

COLUMNS = (
    "child_id",
    "mother_id",
    "country",
    "society",
    "sex",
    "birth_year",
    "birth_month",
    "multiplicity",
    "death_age_months",
    "age_at_survey_months",
    "survey_year",
    "mother_age",
    "mother_edu",
    "mother_marital",
    "father_edu",
    "household_size",
    "electricity",
    "radio",
    "tv",
    "car",
)
STRING_COLUMNS = ("child_id", "mother_id", "country", "society", "sex")
OPTIONAL_STRING_COLUMNS = ("mother_edu", "mother_marital", "father_edu")
REQUIRED_INT_COLUMNS = ("birth_year", "birth_month", "multiplicity", "survey_year")
OPTIONAL_INT_COLUMNS = (
    "death_age_months",
    "age_at_survey_months",
    "mother_age",
    "household_size",
) + ASSETS

MODES = ("all_twins", "mf_pairs", "singletons", "all")

# inclusive bounds checked on parse; None = unbounded
_INT_BOUNDS = {
    "birth_month": (1, 12),
    "multiplicity": (1, None),
    "death_age_months": (0, None),
    "age_at_survey_months": (0, None),
    "mother_age": (0, None),
    "household_size": (1, None),
    **{a: (0, 1) for a in ASSETS},
}
_ALLOWED_STRINGS = {
    "sex": ("M", "F"),
    "society": SOCIETIES,
    "mother_edu": EDUCATION_LEVELS,
    "father_edu": EDUCATION_LEVELS,
}
_MAX_REPORTED_ERRORS = 20


def normalize_frame(frame: pd.DataFrame) -> pd.DataFrame:
    """Return ``frame`` restricted to the canonical columns with canonical dtypes."""
    missing = [c for c in COLUMNS if c not in frame.columns]
    if missing:
        raise SchemaError(f"missing column(s): {', '.join(missing)}")
    out = {}
    for col in COLUMNS:
        s = frame[col]
        if col in STRING_COLUMNS or col in OPTIONAL_STRING_COLUMNS:
            out[col] = s.astype("string")
        elif col in REQUIRED_INT_COLUMNS:
            if s.isna().any():
                raise DataError(f"column {col} has missing values")
            out[col] = s.astype("int64")
        else:
            out[col] = s.astype("Int64")
    return pd.DataFrame(out).reset_index(drop=True)


class BirthTable:
    """Immutable, column-oriented collection of :class:`BirthRecord`.

    The backing frame uses the CSV encodings (``sex`` is ``"M"``/``"F"``) and
    must not be mutated; derived arrays are cached on first use.
    """

    def __init__(self, frame: pd.DataFrame, *, validate: bool = True):
        frame = normalize_frame(frame)
        if validate:
            _validate_frame(frame)
        self._frame = frame

    @property
    def frame(self) -> pd.DataFrame:
        return self._frame

    def __len__(self):
        return len(self._frame)

    def __iter__(self):
        for i in range(len(self)):
            yield self.record(i)

    def __eq__(self, other):
        if not isinstance(other, BirthTable):
            return NotImplemented
        return self._frame.equals(other._frame)

    __hash__ = None

    def __repr__(self):
        counts = self._frame["society"].value_counts().sort_index().to_dict()
        return f"BirthTable(n={len(self)}, societies={counts})"

    def record(self, i: int) -> BirthRecord:
        row = self._frame.iloc[i]

        def opt(name):
            v = row[name]
            return None if pd.isna(v) else (int(v) if name in OPTIONAL_INT_COLUMNS else str(v))

        return BirthRecord(
            child_id=str(row["child_id"]),
            mother_id=str(row["mother_id"]),
            country_code=str(row["country"]),
            society=str(row["society"]),
            sex="male" if row["sex"] == "M" else "female",
            birth_year=int(row["birth_year"]),
            birth_month=int(row["birth_month"]),
            multiplicity=int(row["multiplicity"]),
            survey_year=int(row["survey_year"]),
            death_age_months=opt("death_age_months"),
            age_at_survey_months=opt("age_at_survey_months"),
            mother_age_years=opt("mother_age"),
            mother_education=opt("mother_edu"),
            mother_marital=opt("mother_marital"),
            father_education=opt("father_edu"),
            household_size=opt("household_size"),
            electricity=opt("electricity"),
            radio=opt("radio"),
            tv=opt("tv"),
            car=opt("car"),
        )

    # -- cached numeric views -------------------------------------------------

    @cached_property
    def male(self) -> np.ndarray:
        return (self._frame["sex"] == "M").to_numpy(dtype=bool)

    @cached_property
    def society(self) -> np.ndarray:
        return self._frame["society"].to_numpy(dtype=object)

    @cached_property
    def mother_codes(self) -> np.ndarray:
        """Integer mother codes in sorted mother_id order (row-order independent)."""
        codes, _ = pd.factorize(self._frame["mother_id"], sort=True)
        return codes.astype(np.int64)

    @cached_property
    def n_mothers(self) -> int:
        return int(self.mother_codes.max()) + 1 if len(self) else 0

    @cached_property
    def multiplicity(self) -> np.ndarray:
        return self._frame["multiplicity"].to_numpy(dtype=np.int64)

    @cached_property
    def birth_key(self) -> np.ndarray:
        """Months since year 0 of the birth month; equal keys mean same month and year."""
        f = self._frame
        return f["birth_year"].to_numpy(np.int64) * 12 + f["birth_month"].to_numpy(np.int64) - 1

    @cached_property
    def death_age(self) -> np.ndarray:
        return self._frame["death_age_months"].to_numpy(dtype=float, na_value=np.nan)

    @cached_property
    def age_at_survey(self) -> np.ndarray:
        return self._frame["age_at_survey_months"].to_numpy(dtype=float, na_value=np.nan)

    @cached_property
    def _outcome_cache(self) -> dict:
        return {}

    def outcomes(self, window):
        """``(eligible, outcome)`` arrays over all rows for ``window``."""
        w = get_window(window)
        if w.kind not in self._outcome_cache:
            self._outcome_cache[w.kind] = window_outcomes(self.death_age, self.age_at_survey, w)
        return self._outcome_cache[w.kind]

    @cached_property
    def mother_index(self) -> dict:
        """Mapping mother_id -> array of row positions."""
        return {
            str(k): np.asarray(v)
            for k, v in self._frame.groupby("mother_id", sort=True).indices.items()
        }

    def societies(self) -> tuple:
        present = set(self._frame["society"].unique())
        return tuple(s for s in SOCIETIES if s in present)

    def subset(self, rows=None, *, society=None) -> "BirthTable":
        """Rows selected by position/boolean mask and/or society label."""
        frame = self._frame
        if rows is not None:
            frame = frame.iloc[np.asarray(rows)] if np.asarray(rows).dtype != bool else frame[rows]
        if society is not None:
            frame = frame[frame["society"] == society]
        return BirthTable(frame, validate=False)

    @classmethod
    def concat(cls, tables) -> "BirthTable":
        tables = list(tables)
        if not tables:
            raise DataError("no tables to concatenate")
        return cls(pd.concat([t.frame for t in tables], ignore_index=True))


def _validate_frame(frame: pd.DataFrame):
    dup = frame["child_id"].duplicated(keep=False)
    if dup.any():
        ids = sorted(set(frame.loc[dup, "child_id"].astype(str)))
        raise DataError(f"duplicate child_id: {', '.join(ids[:10])}")
    for col, allowed in _ALLOWED_STRINGS.items():
        s = frame[col].dropna()
        bad = ~s.isin(allowed)
        if bad.any():
            raise DataError(f"column {col}: invalid value {s[bad].iloc[0]!r}")
    for col, (lo, hi) in _INT_BOUNDS.items():
        s = frame[col].dropna()
        if (lo is not None and (s < lo).any()) or (hi is not None and (s > hi).any()):
            raise DataError(f"column {col}: value out of range")
    death, age = frame["death_age_months"], frame["age_at_survey_months"]
    both = death.isna() & age.isna()
    if both.any():
        cid = frame.loc[both, "child_id"].iloc[0]
        raise DataError(f"child {cid}: death_age_months and age_at_survey_months both missing")
    over = (death > age).fillna(False)
    if over.any():
        cid = frame.loc[over, "child_id"].iloc[0]
        raise DataError(f"child {cid}: death_age_months exceeds age_at_survey_months")


# -- CSV I/O -------------------------------------------------------------------


def read_header(path) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        try:
            return next(csv.reader(fh))
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None


def parse_births(path, *, chunksize: int = 250_000) -> BirthTable:
    """Read a canonical births CSV.

    The file is read in chunks; every malformed mandatory field is reported
    with its line number (the header is line 1).

    Raises
    ------
    SchemaError
        A canonical column is missing from the header.
    DataError
        Unparseable values, duplicate ``child_id`` or ``death_age_months >
        age_at_survey_months``.
    """
    path = Path(path)
    header = [h.strip() for h in read_header(path)]
    missing = [c for c in COLUMNS if c not in header]
    if missing:
        raise SchemaError(f"{path}: missing column(s): {', '.join(missing)}")

    errors = []
    n_errors = 0
    parts = []
    reader = pd.read_csv(
        path,
        dtype=str,
        keep_default_na=False,
        usecols=list(COLUMNS),
        chunksize=chunksize,
        encoding="utf-8",
    )
    offset = 2
    for chunk in reader:
        chunk = chunk.apply(lambda s: s.str.strip())
        part, errs, count = _convert_chunk(chunk, offset)
        n_errors += count
        errors.extend(errs[: max(0, _MAX_REPORTED_ERRORS - len(errors))])
        parts.append(part)
        offset += len(chunk)
    if n_errors:
        more = f" (+{n_errors - len(errors)} more)" if n_errors > len(errors) else ""
        raise DataError(f"{path}: {n_errors} invalid field(s): " + "; ".join(errors) + more)
    if parts:
        frame = pd.concat(parts, ignore_index=True)
    else:
        frame = pd.DataFrame({c: pd.Series([], dtype=object) for c in COLUMNS})

    dup = frame["child_id"].duplicated(keep=False)
    if dup.any():
        first = frame.loc[dup, "child_id"].iloc[0]
        lines = (np.flatnonzero((frame["child_id"] == first).to_numpy()) + 2).tolist()
        raise DataError(f"{path}: duplicate child_id {first!r} (lines {', '.join(map(str, lines))})")
    return BirthTable(frame)


def _convert_chunk(chunk: pd.DataFrame, offset: int):
    errors = []
    count = 0
    lines = np.arange(offset, offset + len(chunk))
    out = {}

    def flag(mask, col, values):
        nonlocal count
        count += int(mask.sum())
        for i in np.flatnonzero(mask)[:_MAX_REPORTED_ERRORS]:
            errors.append(f"line {lines[i]}: {col}={values.iloc[i]!r}")

    for col in STRING_COLUMNS + OPTIONAL_STRING_COLUMNS:
        s = chunk[col]
        empty = (s == "").to_numpy()
        bad = np.zeros(len(s), dtype=bool)
        if col in STRING_COLUMNS:
            bad |= empty
        if col in _ALLOWED_STRINGS:
            bad |= (~empty) & ~s.isin(_ALLOWED_STRINGS[col]).to_numpy()
        flag(bad, col, s)
        out[col] = s.mask(empty)
    for col in REQUIRED_INT_COLUMNS + OPTIONAL_INT_COLUMNS:
        s = chunk[col]
        empty = (s == "").to_numpy()
        num = pd.to_numeric(s.mask(empty), errors="coerce").to_numpy(dtype=float)
        with np.errstate(invalid="ignore"):
            bad = (~empty) & (np.isnan(num) | (num != np.round(num)))
            lo, hi = _INT_BOUNDS.get(col, (None, None))
            if lo is not None:
                bad |= (~empty) & (num < lo)
            if hi is not None:
                bad |= (~empty) & (num > hi)
        if col in REQUIRED_INT_COLUMNS:
            bad |= empty
        flag(bad, col, s)
        out[col] = pd.Series(np.where(bad | empty, np.nan, num), index=chunk.index).round().astype("Int64")

    death, age = out["death_age_months"], out["age_at_survey_months"]
    both = (death.isna() & age.isna()).to_numpy()
    count += int(both.sum())
    for i in np.flatnonzero(both)[:_MAX_REPORTED_ERRORS]:
        errors.append(f"line {lines[i]}: death_age_months and age_at_survey_months both empty")
    over = (death > age).to_numpy(dtype=bool, na_value=False)
    count += int(over.sum())
    for i in np.flatnonzero(over)[:_MAX_REPORTED_ERRORS]:
        errors.append(f"line {lines[i]}: death_age_months > age_at_survey_months")
    frame = pd.DataFrame(out, index=chunk.index)
    if count:
        return frame, errors, count
    for col in REQUIRED_INT_COLUMNS:
        frame[col] = frame[col].astype("int64")
    return frame, errors, count


def write_births(table: BirthTable, path) -> None:
    """Write ``table`` as canonical CSV (empty field = missing)."""
    table.frame.to_csv(path, index=False, na_rep="", lineterminator="\n")


# -- twin matching -------------------------------------------------------------


@dataclass(frozen=True)
class MatchDiagnostics:
    """Outcome of twin matching; counts are individuals unless stated."""

    pairs_by_type: dict
    declared_multiples: int
    matched_individuals: int
    unmatched_individuals: int
    dropped_individuals: int
    dropped_groups: int

    @property
    def n_pairs(self) -> int:
        return sum(self.pairs_by_type.values())

    def to_dict(self) -> dict:
        return {
            "pairs_by_type": dict(self.pairs_by_type),
            "declared_multiples": self.declared_multiples,
            "matched_individuals": self.matched_individuals,
            "unmatched_individuals": self.unmatched_individuals,
            "dropped_individuals": self.dropped_individuals,
            "dropped_groups": self.dropped_groups,
        }


@dataclass(frozen=True, eq=False)
class TwinPairSet:
    """Matched twin pairs, stored as row positions into ``table``.

    ``rows_a`` holds the member with the smaller ``child_id``.
    """

    table: BirthTable
    rows_a: np.ndarray
    rows_b: np.ndarray
    types: np.ndarray

    def __len__(self):
        return len(self.rows_a)

    def __iter__(self):
        return iter(self.pairs())

    @property
    def pair_ids(self) -> np.ndarray:
        return np.arange(len(self), dtype=np.int64)

    def count(self, pair_type: str) -> int:
        return int(np.sum(self.types == pair_type))

    def pairs(self) -> list:
        f = self.table.frame
        cid = f["child_id"].to_numpy(dtype=object)
        mid = f["mother_id"].to_numpy(dtype=object)
        male = self.table.male
        sex = np.where(male, "male", "female")
        return [
            TwinPair(int(k), str(mid[a]), str(cid[a]), str(cid[b]), str(sex[a]), str(sex[b]))
            for k, (a, b) in enumerate(zip(self.rows_a, self.rows_b))
        ]

    def as_set(self) -> frozenset:
        """Pairs as ``(frozenset(child_ids), pair_type)``; insensitive to labels and order."""
        cid = self.table.frame["child_id"].to_numpy(dtype=object)
        return frozenset(
            (frozenset((str(cid[a]), str(cid[b]))), str(t))
            for a, b, t in zip(self.rows_a, self.rows_b, self.types)
        )

    @cached_property
    def pair_of_row(self) -> np.ndarray:
        """Pair id for each table row, -1 for rows not in a matched pair."""
        out = np.full(len(self.table), -1, dtype=np.int64)
        out[self.rows_a] = self.pair_ids
        out[self.rows_b] = self.pair_ids
        return out

    def member_rows(self) -> np.ndarray:
        return np.sort(np.concatenate([self.rows_a, self.rows_b]))


def match_twins(table: BirthTable):
    """Pair declared twins by mother and month/year of birth.

    Records declared as twins (multiplicity 2) are grouped by ``(mother_id,
    birth_year, birth_month)``. Groups of exactly two become pairs, singleton
    groups stay unmatched, larger groups are dropped together with every
    record declared as a triplet or higher.

    Returns
    -------
    pairs : TwinPairSet
    diagnostics : MatchDiagnostics
    """
    mult = table.multiplicity
    declared = int(np.sum(mult >= 2))
    twin_rows = np.flatnonzero(mult == 2)
    high_rows = np.flatnonzero(mult >= 3)

    child_codes, _ = pd.factorize(table.frame["child_id"].iloc[twin_rows], sort=True)
    group_key = table.mother_codes[twin_rows] * 100_000 + table.birth_key[twin_rows]
    order = np.lexsort((child_codes, group_key))
    twin_rows, group_key = twin_rows[order], group_key[order]
    _, starts, sizes = np.unique(group_key, return_index=True, return_counts=True)

    pair_starts = starts[sizes == 2]
    rows_a, rows_b = twin_rows[pair_starts], twin_rows[pair_starts + 1]
    male = table.male
    types = np.where(
        male[rows_a] != male[rows_b], "MF", np.where(male[rows_a], "MM", "FF")
    ).astype("<U2")

    unmatched = int(np.sum(sizes == 1))
    big = sizes >= 3
    if len(high_rows):
        high_key = table.mother_codes[high_rows] * 100_000 + table.birth_key[high_rows]
        high_groups = len(np.unique(high_key))
    else:
        high_groups = 0
    pairs = TwinPairSet(table, rows_a, rows_b, types)
    diagnostics = MatchDiagnostics(
        pairs_by_type={t: int(np.sum(types == t)) for t in PAIR_TYPES},
        declared_multiples=declared,
        matched_individuals=2 * len(rows_a),
        unmatched_individuals=unmatched,
        dropped_individuals=int(sizes[big].sum()) + len(high_rows),
        dropped_groups=int(big.sum()) + high_groups,
    )
    return pairs, diagnostics


# -- estimation samples ----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Sample:
    """Window-eligible records selected for one regression.

    In ``mf_pairs`` mode rows are interleaved ``male, female`` per pair.
    ``pair_ids`` is -1 for records outside a matched pair.
    """

    table: BirthTable
    window: MortalityWindow
    mode: str
    rows: np.ndarray
    outcome: np.ndarray
    pair_ids: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.rows)

    @property
    def empty(self) -> bool:
        return len(self.rows) == 0

    @property
    def clusters(self) -> np.ndarray:
        return self.table.mother_codes[self.rows]

    @property
    def male(self) -> np.ndarray:
        return self.table.male[self.rows]

    @property
    def society(self) -> str:
        present = set(self.table.society[self.rows]) if len(self.rows) else set(self.table.societies())
        if len(present) == 1:
            return present.pop()
        return "pooled" if present else ""

    @property
    def record_ids(self) -> np.ndarray:
        return self.table.frame["child_id"].to_numpy(dtype=object)[self.rows]

    def frame(self) -> pd.DataFrame:
        """Sample records with ``outcome`` and ``pair_id`` columns appended."""
        f = self.table.frame.iloc[self.rows].reset_index(drop=True)
        return f.assign(outcome=self.outcome, pair_id=self.pair_ids)


def build_sample(table: BirthTable, pairs: TwinPairSet, window, mode: str) -> Sample:
    """Select the records entering a regression for ``window``.

    Modes
    -----
    all_twins
        Every matched twin eligible for the window.
    mf_pairs
        Mixed-sex pairs whose two members are both eligible; a pair with one
        member dead before the window or censored is dropped whole.
    singletons
        Eligible records declared as single births.
    all
        Every eligible record.
    """
    w = get_window(window)
    if mode not in MODES:
        raise ConfigurationError(f"unknown sample mode {mode!r}; expected one of {', '.join(MODES)}")
    if pairs is not None and pairs.table is not table:
        raise ConfigurationError("pairs were matched on a different table")
    eligible, outcome = table.outcomes(w)

    if mode in ("all_twins", "mf_pairs"):
        if pairs is None:
            raise ConfigurationError(f"mode {mode} requires matched pairs")
        a, b = pairs.rows_a, pairs.rows_b
        if mode == "all_twins":
            rows = np.stack([a, b], axis=1).ravel()
            pid = np.repeat(pairs.pair_ids, 2)
            keep = eligible[rows]
            rows, pid = rows[keep], pid[keep]
        else:
            keep = (pairs.types == "MF") & eligible[a] & eligible[b]
            a, b = a[keep], b[keep]
            a_male = table.male[a]
            m_rows = np.where(a_male, a, b)
            f_rows = np.where(a_male, b, a)
            rows = np.stack([m_rows, f_rows], axis=1).ravel()
            pid = np.repeat(pairs.pair_ids[keep], 2)
    else:
        mask = eligible if mode == "all" else eligible & (table.multiplicity == 1)
        rows = np.flatnonzero(mask)
        pid = pairs.pair_of_row[rows] if pairs is not None else np.full(len(rows), -1, np.int64)

    rows = rows.astype(np.int64)
    meta = {"empty": len(rows) == 0, "n_eligible_table": int(eligible.sum())}
    return Sample(table, w, mode, rows, outcome[rows].astype(np.int8), pid.astype(np.int64), meta)
