"""Per-society fitting: match twins, build samples, run the regressions."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

from .domain import parse_windows
from .errors import ConfigurationError
from .estimate import ModelSpec, fit_lpm, fit_twin_fe
from .ingest import BirthTable, build_sample, match_twins

WORKERS_ENV = "TWINGAP_WORKERS"


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigurationError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigurationError(f"{WORKERS_ENV} must be >= 1")
    return n


def _map(fn, items, workers):
    if workers and workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def match_by_society(table: BirthTable) -> dict:
    """``{society: (subtable, pairs, diagnostics)}`` for each society present."""
    out = {}
    for soc in table.societies():
        sub = table.subset(society=soc) if len(table.societies()) > 1 else table
        pairs, diag = match_twins(sub)
        out[soc] = (sub, pairs, diag)
    return out


def estimate_fits(
    table: BirthTable,
    windows=None,
    spec: ModelSpec = ModelSpec(controls="full"),
    *,
    workers: int = 1,
    unadjusted: bool = False,
    matched: dict | None = None,
) -> dict:
    """Decomposition inputs for every society and window in ``table``.

    Returns a dict keyed by ``(society, window, mode)``: ``mode="all_twins"``
    holds the LPM with ``spec`` controls, ``mode="mf_pairs"`` the twin fixed
    effect. With ``unadjusted=True`` the no-control LPM is added under
    ``(society, window, "all_twins:none")``.
    """
    windows = parse_windows(windows)
    matched = matched if matched is not None else match_by_society(table)
    jobs = []
    for soc, (sub, pairs, _) in matched.items():
        for w in windows:
            jobs.append((soc, w, "all_twins", sub, pairs, spec))
            jobs.append((soc, w, "mf_pairs", sub, pairs, None))
            if unadjusted:
                jobs.append((soc, w, "all_twins:none", sub, pairs, ModelSpec(controls="none")))

    def run(job):
        soc, w, key_mode, sub, pairs, sp = job
        mode = key_mode.split(":")[0]
        sample = build_sample(sub, pairs, w, mode)
        fit = fit_twin_fe(sample) if mode == "mf_pairs" else fit_lpm(sample, sp)
        return (soc, w, key_mode), fit

    return dict(_map(run, jobs, workers))
