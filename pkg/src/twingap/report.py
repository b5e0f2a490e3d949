"""Descriptive and results tables, rendered as CSV, JSON or markdown.

Rates are proportions internally; ``per_thousand=True`` at render time
multiplies rate-like columns by 1000 in markdown output only.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .decompose import OUTPUTS, DecompositionTable
from .domain import ASSETS, EDUCATION_LEVELS, MARITAL_STATUSES, WINDOWS, parse_windows
from .errors import ConfigurationError, DataError
from .ingest import BirthTable, TwinPairSet

FORMATS = ("csv", "json", "markdown")


@dataclass
class ReportTable:
    """Rows of plain Python values under a fixed column order."""

    kind: str
    columns: tuple
    rows: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    rate_columns: tuple = ()

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "columns": list(self.columns),
            "rows": [dict(r) for r in self.rows],
            "notes": list(self.notes),
            "meta": self.meta,
            "rate_columns": list(self.rate_columns),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ReportTable":
        sub = _KINDS.get(d["kind"], ReportTable)
        return sub(
            kind=d["kind"],
            columns=tuple(d["columns"]),
            rows=[dict(r) for r in d["rows"]],
            notes=list(d.get("notes", [])),
            meta=d.get("meta", {}),
            rate_columns=tuple(d.get("rate_columns", ())),
        )

    def column(self, name) -> list:
        return [r[name] for r in self.rows]

    def lookup(self, **where) -> dict:
        hits = [r for r in self.rows if all(r.get(k) == v for k, v in where.items())]
        if len(hits) != 1:
            raise KeyError(f"{len(hits)} rows match {where}")
        return hits[0]


class SexRatioSummary(ReportTable):
    """Share of boys by birth group and society; ``meta["pooled_sex_ratio"]`` per society."""


class RateTable(ReportTable):
    """Mortality rates by society, window, group and sex."""

    def figure1(self) -> ReportTable:
        """Singleton infant and child mortality by sex and society."""
        rows = [
            {k: r[k] for k in ("society", "group", "sex", "window", "rate", "n")}
            for r in self.rows
            if r["group"] == "singletons" and r["window"] in ("I", "CH")
        ]
        return ReportTable(
            "figure1", ("society", "group", "sex", "window", "rate", "n"), rows, rate_columns=("rate",)
        )


class CovariateSummary(ReportTable):
    """n, mean and SD per variable for singletons and twins by society."""


_KINDS = {"sex_ratio": SexRatioSummary, "mortality_rates": RateTable, "covariates": CovariateSummary}


def _share(x: np.ndarray) -> tuple:
    n = int(len(x))
    if n == 0:
        return 0, None, None
    p = float(np.mean(x))
    return n, p, math.sqrt(p * (1 - p))


def _twin_groups(table: BirthTable, pairs: TwinPairSet) -> dict:
    """Row masks for the birth groups used across reports."""
    n = len(table)
    in_pair = np.zeros(n, dtype=bool)
    in_pair[pairs.rows_a] = True
    in_pair[pairs.rows_b] = True
    by_type = {}
    for t in ("MF", "MM", "FF"):
        m = np.zeros(n, dtype=bool)
        sel = pairs.types == t
        m[pairs.rows_a[sel]] = True
        m[pairs.rows_b[sel]] = True
        by_type[t] = m
    return {
        "singletons": table.multiplicity == 1,
        "all_twins": in_pair,
        "MF": by_type["MF"],
        "MM": by_type["MM"],
        "FF": by_type["FF"],
        "same_sex": by_type["MM"] | by_type["FF"],
    }


def _check_pairs(table, pairs):
    if pairs.table is not table:
        raise DataError("pairs were matched on a different table")


def sex_ratio_table(table: BirthTable, pairs: TwinPairSet) -> SexRatioSummary:
    """Proportion male with SD ``sqrt(p(1-p))`` for singletons and twin groups.

    The pooled sex ratio is boys per girl over singletons and matched twins.
    """
    _check_pairs(table, pairs)
    groups = _twin_groups(table, pairs)
    male = table.male
    rows, notes, pooled = [], [], {}
    for soc in table.societies():
        in_soc = table.society == soc
        for g, mask in groups.items():
            n, p, sd = _share(male[mask & in_soc])
            if n == 0:
                notes.append(f"{soc}: no {g} births; row omitted")
                continue
            rows.append({"society": soc, "group": g, "n": n, "prop_male": p, "sd": sd})
        both = in_soc & (groups["singletons"] | groups["all_twins"])
        boys, girls = int(np.sum(male & both)), int(np.sum(~male & both))
        pooled[soc] = boys / girls if girls else None
    return SexRatioSummary(
        "sex_ratio",
        ("society", "group", "n", "prop_male", "sd"),
        rows,
        notes,
        {"pooled_sex_ratio": pooled},
        rate_columns=(),
    )


def mortality_rate_table(table: BirthTable, pairs: TwinPairSet, windows=None) -> RateTable:
    """Deaths over eligible children per society, window, group and sex.

    Groups: ``all_twins``; ``mf_twins`` (mixed-sex twins eligible as
    individuals); ``mf_complete_pairs`` (mixed-sex pairs with both members
    eligible, the twin fixed-effect sample); ``singletons``.
    """
    _check_pairs(table, pairs)
    windows = parse_windows(windows)
    groups = _twin_groups(table, pairs)
    male = table.male
    rows = []
    for soc in table.societies():
        in_soc = table.society == soc
        for w in windows:
            eligible, outcome = table.outcomes(w)
            complete = np.zeros(len(table), dtype=bool)
            ok = (pairs.types == "MF") & eligible[pairs.rows_a] & eligible[pairs.rows_b]
            complete[pairs.rows_a[ok]] = True
            complete[pairs.rows_b[ok]] = True
            for g, mask in (
                ("all_twins", groups["all_twins"] & eligible),
                ("mf_twins", groups["MF"] & eligible),
                ("mf_complete_pairs", complete),
                ("singletons", groups["singletons"] & eligible),
            ):
                for sex, sex_mask in (("male", male), ("female", ~male)):
                    sel = mask & in_soc & sex_mask
                    n = int(sel.sum())
                    deaths = int(outcome[sel].sum())
                    rate = deaths / n if n else None
                    sd = math.sqrt(rate * (1 - rate)) if n else None
                    rows.append(
                        {"society": soc, "window": w, "group": g, "sex": sex,
                         "n": n, "deaths": deaths, "rate": rate, "sd": sd}
                    )
    return RateTable(
        "mortality_rates",
        ("society", "window", "group", "sex", "n", "deaths", "rate", "sd"),
        rows,
        rate_columns=("rate", "sd"),
    )


def _covariate_columns(table: BirthTable) -> dict:
    """Variable name -> float array with NaN for missing."""
    f = table.frame
    out = {"child_is_male": table.male.astype(float)}
    out["mother_age"] = f["mother_age"].to_numpy(dtype=float, na_value=np.nan)
    for var, levels in (("mother_marital", MARITAL_STATUSES), ("mother_edu", EDUCATION_LEVELS),
                        ("father_edu", EDUCATION_LEVELS)):
        values = f[var].to_numpy(dtype=object, na_value=None)
        miss = f[var].isna().to_numpy()
        for lv in levels:
            out[f"{var}[{lv}]"] = np.where(miss, np.nan, (values == lv).astype(float))
    out["household_size"] = f["household_size"].to_numpy(dtype=float, na_value=np.nan)
    for a in ASSETS:
        out[a] = f[a].to_numpy(dtype=float, na_value=np.nan)
    for w in ("I", "NN", "PNN", "CH"):
        eligible, outcome = table.outcomes(w)
        out[f"mortality[{w}]"] = np.where(eligible, outcome.astype(float), np.nan)
    return out


def covariate_summary(table: BirthTable, pairs: TwinPairSet | None = None) -> CovariateSummary:
    """Per-variable n, mean and SD for singletons and twins in each society.

    Twins are the matched pair members when ``pairs`` is given, otherwise
    every record declared as a twin. Missing values and window-ineligible
    children are excluded from ``n``.
    """
    if pairs is not None:
        _check_pairs(table, pairs)
        twins = _twin_groups(table, pairs)["all_twins"]
    else:
        twins = table.multiplicity == 2
    cols = _covariate_columns(table)
    rows = []
    for soc in table.societies():
        in_soc = table.society == soc
        for g, mask in (("singletons", table.multiplicity == 1), ("twins", twins)):
            for var, values in cols.items():
                x = values[mask & in_soc]
                x = x[~np.isnan(x)]
                n = int(len(x))
                rows.append({
                    "society": soc, "group": g, "variable": var, "n": n,
                    "mean": float(x.mean()) if n else None,
                    "sd": float(x.std()) if n else None,
                })
    return CovariateSummary("covariates", ("society", "group", "variable", "n", "mean", "sd"), rows)


def regression_table(fits: dict) -> ReportTable:
    """Male coefficients by society and window, one row per fitted model."""
    rows = []
    for key in sorted(fits, key=lambda k: (k[0] != "ND", list(WINDOWS).index(k[1]), k[2])):
        f = fits[key]
        rows.append({
            "society": f.society, "window": f.window, "model": key[2],
            "estimator": f.estimator, "controls": f.controls,
            "theta": f.theta, "se": f.theta_se, "n_obs": int(f.n_obs), "n_clusters": int(f.n_clusters),
        })
    return ReportTable(
        "regressions",
        ("society", "window", "model", "estimator", "controls", "theta", "se", "n_obs", "n_clusters"),
        rows,
    )


def diagnostics_table(diagnostics: dict) -> ReportTable:
    """Twin-matching counts per society."""
    rows = []
    for soc, d in diagnostics.items():
        rows.append({
            "society": soc,
            "pairs_mf": d.pairs_by_type["MF"],
            "pairs_mm": d.pairs_by_type["MM"],
            "pairs_ff": d.pairs_by_type["FF"],
            "declared_multiples": d.declared_multiples,
            "matched_individuals": d.matched_individuals,
            "unmatched_individuals": d.unmatched_individuals,
            "dropped_individuals": d.dropped_individuals,
            "dropped_groups": d.dropped_groups,
        })
    return ReportTable("match_diagnostics", (
        "society", "pairs_mf", "pairs_mm", "pairs_ff", "declared_multiples",
        "matched_individuals", "unmatched_individuals", "dropped_individuals", "dropped_groups"), rows)


# -- rendering -------------------------------------------------------------------


def _csv_cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else ""
    return str(v)


def _md_cell(v, scale=1.0, decimals=3):
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, float):
        if not math.isfinite(v):
            return ""
        text = f"{v * scale:.{decimals}f}"
        # no "-0.000"
        return text[1:] if text.startswith("-") and float(text) == 0 else text
    return str(v)


def _md_table(header, body) -> str:
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    lines += ["| " + " | ".join(r) + " |" for r in body]
    return "\n".join(lines) + "\n"


def _render_decomposition(dec: DecompositionTable, fmt: str, per_thousand: bool) -> str:
    if fmt == "json":
        return json.dumps(dec.to_dict(), indent=2, sort_keys=True) + "\n"
    frame = dec.to_frame()
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(frame.columns)
        for rec in frame.itertuples(index=False):
            w.writerow([_csv_cell(float(v)) if not isinstance(v, str) else v for v in rec])
        return buf.getvalue()
    scale, dec_places = (1000.0, 0) if per_thousand else (1.0, 3)
    header = ["Mortality"] + [
        f"{s}: {lab}" for s in ("ND", "D") for lab in ("Prenatal environment", "Child biology",
                                                     "Parental preferences")
    ]
    body, notes = [], []
    for p in dec:
        cells = []
        for k in OUTPUTS:
            c = _md_cell(getattr(p, k), scale, dec_places)
            if p.se is not None:
                c += f" ({_md_cell(p.se[k], scale, dec_places)})"
            cells.append(c)
        body.append([WINDOWS[p.window].label] + cells)
        mag = abs(p.theta3_d) * 1000
        if p.theta3_d < 0:
            notes.append(f"- {WINDOWS[p.window].label}: parental preferences in D raise girls' mortality "
                         f"relative to boys' by {mag:.0f} per thousand points (signed coefficient "
                         f"{p.theta3_d:.3f}).")
        elif p.theta3_d > 0:
            notes.append(f"- {WINDOWS[p.window].label}: parental preferences in D raise boys' mortality "
                         f"relative to girls' by {mag:.0f} per thousand points (signed coefficient "
                         f"{p.theta3_d:.3f}).")
        else:
            notes.append(f"- {WINDOWS[p.window].label}: no parental-preference effect in D.")
    out = _md_table(header, body)
    if dec.has_se:
        out += f"\nStandard errors in parentheses: cluster bootstrap over mothers, {dec.n_replicates} replicates"
        out += f" ({dec.n_discarded} discarded).\n"
    unit = "per thousand" if per_thousand else "proportions"
    out += f"\nMale minus female, {unit}. Negative parental-preference values mean girls die more.\n"
    return out + "\n".join(notes) + "\n"


def render(report, fmt: str = "markdown", *, per_thousand: bool = False) -> str:
    """Serialise a report table or decomposition.

    JSON and CSV keep full precision; markdown rounds to three decimals.
    """
    if fmt not in FORMATS:
        raise ConfigurationError(f"unknown format {fmt!r}; expected one of {', '.join(FORMATS)}")
    if isinstance(report, DecompositionTable):
        return _render_decomposition(report, fmt, per_thousand)
    if not isinstance(report, ReportTable):
        raise ConfigurationError(f"cannot render {type(report).__name__}")
    if fmt == "json":
        return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(report.columns)
        for r in report.rows:
            w.writerow([_csv_cell(r.get(c)) for c in report.columns])
        return buf.getvalue()
    scale = 1000.0 if per_thousand else 1.0
    body = [
        [_md_cell(r.get(c), scale if c in report.rate_columns else 1.0) for c in report.columns]
        for r in report.rows
    ]
    out = _md_table(list(report.columns), body)
    if report.notes:
        out += "\n" + "\n".join(f"- {n}" for n in report.notes) + "\n"
    return out


def load_report(text: str):
    """Inverse of ``render(..., "json")``."""
    d = json.loads(text)
    if d.get("kind") == "decomposition":
        return DecompositionTable.from_dict(d)
    return ReportTable.from_dict(d)
