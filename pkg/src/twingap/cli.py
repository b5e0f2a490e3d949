"""Command-line entry point: ``twingap {simulate,analyze,decompose,report}``.

Exit status is 0 on success, 1 for data or configuration errors and 2 for
usage errors. Every run that writes files also writes a manifest recording
the resolved options, their hash, the seed and library versions. Worker
count is left out of the manifest because it never changes results.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import platform
import sys
from importlib import metadata
from pathlib import Path

from .decompose import bootstrap_decomposition, decompose_all, load_coefficients
from .domain import parse_windows
from .errors import ConfigurationError, DataError, TwinGapError
from .estimate import CONTROL_SETS, MISSING_POLICIES, ModelSpec, RegressionFit
from .ingest import BirthTable, match_twins, parse_births, write_births
from .pipeline import default_workers, estimate_fits, match_by_society
from .report import (
    FORMATS,
    covariate_summary,
    diagnostics_table,
    mortality_rate_table,
    regression_table,
    render,
    sex_ratio_table,
)
from .synth import SynthConfig, generate

_EXTENSIONS = {".csv": "csv", ".json": "json", ".md": "markdown"}
_SUFFIX = {"csv": ".csv", "json": ".json", "markdown": ".md"}

# options an ``analyze --config`` file may set
_ANALYZE_KEYS = {"windows", "controls", "missing", "bootstrap", "seed", "workers"}
_ANALYZE_DEFAULTS = {"windows": None, "controls": "full", "missing": "listwise_drop", "bootstrap": 0, "seed": 0}


class UsageError(Exception):
    pass


def _versions() -> dict:
    out = {"python": platform.python_version()}
    for dist in ("artifact", "numpy", "pandas", "scipy", "scikit-learn"):
        try:
            out[dist] = metadata.version(dist)
        except metadata.PackageNotFoundError:
            out[dist] = None
    return out


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _write_text(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _manifest(command: str, options: dict, seed, inputs: dict, outputs: dict) -> str:
    body = {
        "command": command,
        "options": options,
        "config_sha256": hashlib.sha256(_canonical(options).encode()).hexdigest(),
        "seed": seed,
        "inputs": inputs,
        "outputs": outputs,
        "versions": _versions(),
    }
    return json.dumps(body, indent=2, sort_keys=True) + "\n"


def _format_for(path, explicit):
    ext = Path(path).suffix.lower()
    inferred = _EXTENSIONS.get(ext)
    if explicit and inferred and explicit != inferred:
        raise UsageError(f"--format {explicit} conflicts with the {ext} extension of {path}")
    fmt = explicit or inferred
    if fmt is None:
        raise UsageError(f"cannot infer output format from {path}; pass --format")
    return fmt


# -- subcommands ----------------------------------------------------------------


def cmd_simulate(args) -> int:
    cfg = SynthConfig.from_json(args.config)
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    table = generate(cfg, workers=args.workers)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_births(table, out)
    options = {"config": cfg.to_dict()}
    manifest = _manifest("simulate", options, cfg.seed, {}, {out.name: _sha256(out)})
    _write_text(out.with_name(out.name + ".manifest.json"), manifest)
    return 0


def _analyze_options(args) -> dict:
    opts = dict(_ANALYZE_DEFAULTS)
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            try:
                from_file = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigurationError(f"{args.config}: invalid JSON ({exc})") from None
        if not isinstance(from_file, dict):
            raise ConfigurationError(f"{args.config}: expected a JSON object")
        unknown = sorted(set(from_file) - _ANALYZE_KEYS)
        if unknown:
            raise ConfigurationError(f"{args.config}: unknown option(s) {unknown}")
        opts.update(from_file)
    for key in _ANALYZE_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            opts[key] = value
    opts["windows"] = list(parse_windows(opts["windows"]))
    if opts["controls"] not in CONTROL_SETS or opts["missing"] not in MISSING_POLICIES:
        raise ConfigurationError(f"bad controls/missing option: {opts['controls']!r}/{opts['missing']!r}")
    for key in ("bootstrap", "seed"):
        if isinstance(opts[key], bool) or not isinstance(opts[key], int) or opts[key] < 0:
            raise ConfigurationError(f"{key} must be a non-negative integer, got {opts[key]!r}")
    workers = opts.pop("workers", None)
    workers = default_workers() if workers is None else workers
    if isinstance(workers, bool) or not isinstance(workers, int) or workers < 1:
        raise ConfigurationError(f"workers must be a positive integer, got {workers!r}")
    return opts, workers


def _load_births(args) -> BirthTable:
    first = parse_births(args.births)
    if not args.births2:
        if set(first.societies()) != {"ND", "D"}:
            raise DataError(
                f"{args.births}: holds society {list(first.societies())}; "
                "supply both ND and D births in one file or pass --births2"
            )
        return first
    second = parse_births(args.births2)
    for path, t in ((args.births, first), (args.births2, second)):
        if len(t.societies()) != 1:
            raise DataError(f"{path}: with --births2 each file must hold one society, found {list(t.societies())}")
    if first.societies() == second.societies():
        raise DataError(f"{args.births} and {args.births2} hold the same society {first.societies()[0]}")
    return BirthTable.concat([first, second])


def _fit_filename(key) -> str:
    soc, w, mode = key
    return f"{soc}_{w}_{mode.replace(':', '-')}.json"


def _parse_fit_filename(name: str):
    soc, w, mode = Path(name).stem.split("_", 2)
    return soc, w, mode.replace("-", ":")


def cmd_analyze(args) -> int:
    opts, workers = _analyze_options(args)
    table = _load_births(args)
    out = Path(args.out)
    windows = opts["windows"]
    spec = ModelSpec(controls=opts["controls"], missing=opts["missing"])

    matched = match_by_society(table)
    fits = estimate_fits(
        table, windows, spec, workers=workers, unadjusted=spec.controls == "full", matched=matched
    )
    if opts["bootstrap"]:
        dec = bootstrap_decomposition(
            matched["ND"][0], matched["D"][0], windows, opts["bootstrap"], opts["seed"], spec=spec, workers=workers
        )
    else:
        dec = decompose_all(fits, windows)

    files = {}
    for key in sorted(fits):
        files[f"fits/{_fit_filename(key)}"] = fits[key].to_json()
    for fmt in FORMATS:
        files[f"decomposition{_SUFFIX[fmt]}"] = render(dec, fmt)
    files["decomposition_per_thousand.md"] = render(dec, "markdown", per_thousand=True)

    pairs, _ = match_twins(table)
    rates = mortality_rate_table(table, pairs, windows)
    reports = {
        "sex_ratio": sex_ratio_table(table, pairs),
        "mortality_rates": rates,
        "figure1": rates.figure1(),
        "covariates": covariate_summary(table, pairs),
        "regressions": regression_table(fits),
        "match_diagnostics": diagnostics_table({s: m[2] for s, m in matched.items()}),
    }
    for name, rep in reports.items():
        files[f"reports/{name}.csv"] = render(rep, "csv")
        files[f"reports/{name}.md"] = render(rep, "markdown")
    diagnostics = {
        "matching": {s: m[2].to_dict() for s, m in matched.items()},
        "dropped_for_missing_covariates": {"/".join(k): int(f.n_dropped_missing) for k, f in sorted(fits.items())},
        "bootstrap": {"replicates_used": dec.n_replicates, "replicates_discarded": dec.n_discarded},
    }
    files["diagnostics.json"] = json.dumps(diagnostics, indent=2, sort_keys=True) + "\n"

    for rel, text in files.items():
        _write_text(out / rel, text)
    outputs = {rel: hashlib.sha256(text.encode()).hexdigest() for rel, text in sorted(files.items())}
    inputs = {Path(p).name: _sha256(p) for p in (args.births, args.births2) if p}
    _write_text(out / "manifest.json", _manifest("analyze", opts, opts["seed"], inputs, outputs))
    return 0


def cmd_decompose(args) -> int:
    fmt = _format_for(args.out, args.format)
    dec = load_coefficients(args.coeffs)
    out = Path(args.out)
    _write_text(out, render(dec, fmt))
    options = {"format": fmt}
    manifest = _manifest("decompose", options, None, {Path(args.coeffs).name: _sha256(args.coeffs)},
                         {out.name: _sha256(out)})
    _write_text(out.with_name(out.name + ".manifest.json"), manifest)
    return 0


def load_fit_dir(path) -> dict:
    """Read ``fits/*.json`` (or ``*.json`` directly) written by ``analyze``."""
    root = Path(path)
    if not root.is_dir():
        raise FileNotFoundError(2, "no such directory", str(root))
    base = root / "fits" if (root / "fits").is_dir() else root
    fits = {}
    for f in sorted(base.glob("*.json")):
        try:
            key = _parse_fit_filename(f.name)
            fits[key] = RegressionFit.from_json(f.read_text(encoding="utf-8"))
        except (ValueError, KeyError) as exc:
            raise DataError(f"{f}: not a fit file ({exc})") from None
    if not fits:
        raise DataError(f"{base}: no fit files found")
    return fits


def cmd_report(args) -> int:
    if args.per_thousand and args.format != "markdown":
        raise UsageError("--per-thousand applies to markdown output only")
    fits = load_fit_dir(args.fit_dir)
    parts = [render(regression_table(fits), args.format)]
    windows = sorted({k[1] for k in fits})
    try:
        dec = decompose_all(fits, windows)
    except TwinGapError as exc:
        print(f"twingap: note: no decomposition ({exc})", file=sys.stderr)
        dec = None
    if dec is not None:
        parts.append(render(dec, args.format, per_thousand=args.per_thousand))
    if args.format == "json":
        text = json.dumps([json.loads(p) for p in parts], indent=2, sort_keys=True) + "\n"
    else:
        text = "\n".join(parts)
    if args.out:
        out = Path(args.out)
        _write_text(out, text)
        manifest = _manifest("report", {"format": args.format, "per_thousand": args.per_thousand}, None,
                             {}, {out.name: _sha256(out)})
        _write_text(out.with_name(out.name + ".manifest.json"), manifest)
    else:
        sys.stdout.write(text)
    return 0


# -- parser ---------------------------------------------------------------------


def _windows_arg(text):
    try:
        return list(parse_windows(text))
    except ConfigurationError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _nonneg(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {v}")
    return v


def _positive(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="twingap", description="Twin-based decomposition of sex gaps in child mortality.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate synthetic birth records")
    s.add_argument("--config", required=True, help="synthetic-population JSON")
    s.add_argument("--out", required=True, help="output CSV")
    s.add_argument("--seed", type=_nonneg, help="overrides the config seed")
    s.add_argument("--workers", type=_positive, default=None)
    s.set_defaults(func=cmd_simulate)

    a = sub.add_parser("analyze", help="fit, decompose and report from birth records")
    a.add_argument("--births", required=True, help="births CSV (both societies, or one with --births2)")
    a.add_argument("--births2", help="births CSV for the other society")
    a.add_argument("--out", required=True, help="output directory")
    a.add_argument("--config", help="JSON with analysis options; flags override it")
    a.add_argument("--windows", type=_windows_arg)
    a.add_argument("--controls", choices=CONTROL_SETS)
    a.add_argument("--missing", choices=MISSING_POLICIES)
    a.add_argument("--bootstrap", type=_nonneg, help="bootstrap replicates (default 0)")
    a.add_argument("--seed", type=_nonneg, help="bootstrap seed (default 0)")
    a.add_argument("--workers", type=_positive, help="default from $TWINGAP_WORKERS, else 1")
    a.set_defaults(func=cmd_analyze)

    d = sub.add_parser("decompose", help="decompose directly from coefficient JSON")
    d.add_argument("--coeffs", required=True)
    d.add_argument("--out", required=True, help="output file; format follows the extension")
    d.add_argument("--format", choices=FORMATS)
    d.set_defaults(func=cmd_decompose)

    r = sub.add_parser("report", help="render fits written by analyze")
    r.add_argument("--fit-dir", required=True)
    r.add_argument("--format", choices=FORMATS, default="markdown")
    r.add_argument("--out", help="write here instead of stdout")
    r.add_argument("--per-thousand", action="store_true")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "workers", None) is None and args.command == "simulate":
        try:
            args.workers = default_workers()
        except ConfigurationError as exc:
            print(f"twingap: error: {exc}", file=sys.stderr)
            return 1
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"twingap: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        where = exc.filename if exc.filename is not None else ""
        print(f"twingap: error: {where}: {exc.strerror or exc}", file=sys.stderr)
        return 1
    except TwinGapError as exc:
        print(f"twingap: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
