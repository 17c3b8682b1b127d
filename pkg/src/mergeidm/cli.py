"""Command-line entry point: ``mergeidm {simulate,fit,filter,generate,report}``.

Exit codes: 0 success, 2 unreadable input, 3 simulation failure,
4 event rejected under ``--strict``, 5 no fit succeeded.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from .calibrate import OptimizerConfig, fit_corpus
from .core import ModelKind, ModelParams, validate_event
from .dataio import (
    STANDARD_MERGE,
    EventFormatError,
    ScenarioError,
    filter_corpus,
    generate_synthetic_event,
    load_corpus,
    load_event,
    save_event,
)
from .metrics import EvalWindow, summarize_errors
from .simulate import SimConfig, simulate_event

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_SIM = 3
EXIT_STRICT = 4
EXIT_NO_FIT = 5

log = logging.getLogger("mergeidm")


class InputError(Exception):
    pass


def _err(msg: str) -> None:
    print(f"mergeidm: {msg}", file=sys.stderr)


def _window(text):
    if text is None:
        return None
    try:
        lo, hi = (float(x) for x in text.split(","))
        return EvalWindow(lo, hi)
    except ValueError as exc:
        raise InputError(f"bad --window {text!r} (expected START,END): {exc}") from None


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from None


def _params(model, params_path) -> ModelParams:
    data = _read_json(params_path) if params_path else {}
    if "values" in data:
        kind = model or data.get("model")
        values = data["values"]
    else:
        kind, values = model, data
    if kind is None:
        raise InputError("no model given (use --model or a params file with 'model')")
    try:
        kind = ModelKind(kind)
        merged = ModelParams.defaults(kind).values
        merged.update(values)
        return ModelParams(kind, merged)
    except (ValueError, KeyError) as exc:
        raise InputError(f"bad parameters: {exc}") from None


def _models(values) -> list[ModelKind]:
    out = []
    for v in values or ["MR_IDM"]:
        for name in v.split(","):
            try:
                out.append(ModelKind(name.strip()))
            except ValueError:
                raise InputError(f"unknown model {name!r}") from None
    return out


def _fmt(x) -> str:
    return repr(float(x))


# --------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    try:
        event = load_event(args.event)
    except (OSError, EventFormatError) as exc:
        raise InputError(f"cannot load {args.event}: {exc}") from None
    params = _params(args.model, args.params)
    violations = validate_event(event)
    if violations and args.strict:
        for v in violations:
            _err(f"{event.event_id}: {v}")
        return EXIT_STRICT
    try:
        result = simulate_event(event, SimConfig(params=params, window=_window(args.window)))
    except Exception as exc:
        _err(f"simulation failed: {exc}")
        return EXIT_SIM

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time", "speed_sim", "speed_raw", "accel", "state", "fallback"])
        for k, d in enumerate(result.diagnostics):
            w.writerow([
                _fmt(result.times[k]),
                _fmt(result.ta_speed_profile[k]),
                _fmt(result.raw_speed_profile[k]),
                _fmt(result.accel_profile[k]),
                d.state,
                d.fallback or "",
            ])
    return EXIT_OK


SUMMARY_FIELDS = ["n", "mean", "median", "std", "q1", "q3", "min", "max"]


def _write_summary(summary: dict, out_dir: Path) -> None:
    with open(out_dir / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["model"] + SUMMARY_FIELDS)
        for model, stats in summary.items():
            if stats is None:
                w.writerow([model] + [""] * len(SUMMARY_FIELDS))
            else:
                w.writerow([model] + [stats[f] if f == "n" else _fmt(stats[f]) for f in SUMMARY_FIELDS])
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")


def cmd_fit(args) -> int:
    path = Path(args.corpus)
    if not path.exists():
        raise InputError(f"no such corpus: {path}")
    events, diagnostics = load_corpus(path)
    for line in diagnostics:
        _err(line)
    filtered = filter_corpus(events)
    for ev_id, found in filtered.violations.items():
        _err(f"skipping {ev_id}: {'; '.join(found)}")
    if not filtered.valid:
        _err("no valid events to fit")
        return EXIT_NO_FIT
    kinds = _models(args.model)
    config = OptimizerConfig(seed=args.seed, max_iter=args.max_iter, restarts=args.restarts)
    fit = fit_corpus(filtered.valid, kinds, config, jobs=args.jobs)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "fits.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["event_id", "model", "cost", "iterations", "converged", "restarts_used", "params", "error"])
        for r in fit.results:
            params = json.dumps(r.fitted_params.values, sort_keys=True) if r.fitted_params else ""
            w.writerow([r.event_id, r.model_kind.value, _fmt(r.cost), r.iterations,
                        int(r.converged), r.restarts_used, params, r.error or ""])
    _write_summary(fit.summary, out_dir)
    failed = [r for r in fit.results if not r.ok]
    for r in failed:
        _err(f"fit failed for {r.event_id} / {r.model_kind.value}: {r.error}")
    return EXIT_OK if len(failed) < len(fit.results) else EXIT_NO_FIT


def cmd_filter(args) -> int:
    path = Path(args.corpus)
    if not path.exists():
        raise InputError(f"no such corpus: {path}")
    events, diagnostics = load_corpus(path)
    result = filter_corpus(events)
    report = {
        "valid": [ev.event_id for ev in result.valid],
        "rejected": result.violations,
        "tallies": dict(sorted(result.tallies.items())),
        "load_errors": diagnostics,
    }
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text)
    print(f"{len(result.valid)} valid, {len(result.rejected)} rejected, {len(diagnostics)} unreadable")
    for code, count in sorted(result.tallies.items()):
        print(f"  {code}: {count}")
    return EXIT_OK


def cmd_generate(args) -> int:
    spec = _read_json(args.spec) if args.spec else STANDARD_MERGE
    if not isinstance(spec, dict):
        raise InputError("scenario spec must be a JSON object")
    out_dir = Path(args.out)
    events = []
    try:
        for i in range(args.n):
            seed = args.seed + i
            events.append(generate_synthetic_event(spec, seed=seed, event_id=f"synthetic-{seed:04d}"))
    except (ScenarioError, ValueError, KeyError, TypeError) as exc:
        _err(f"bad scenario: {exc}")
        return EXIT_PARSE
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {"scenario": spec, "events": []}
    for ev in events:
        path = save_event(ev, out_dir / f"{ev.event_id}.event.json")
        manifest["events"].append({
            "file": path.name,
            "event_id": ev.event_id,
            "seed": ev.meta["seed"],
            "generator": ev.meta["generator"],
        })
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_report(args) -> int:
    path = Path(args.fits)
    if path.is_dir():
        path = path / "fits.csv"
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    costs: dict[str, list] = {}
    for row in rows:
        if row.get("error"):
            continue
        try:
            costs.setdefault(row["model"], []).append(float(row["cost"]))
        except (KeyError, ValueError) as exc:
            raise InputError(f"malformed fits row {row}: {exc}") from None
    summary = {m: summarize_errors(c) for m, c in sorted(costs.items())}
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_summary(summary, out_dir)
    for model, stats in summary.items():
        print(f"{model}: n={stats['n']} mean={stats['mean']:.4f} median={stats['median']:.4f} std={stats['std']:.4f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mergeidm", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate the TA of one event")
    p.add_argument("event")
    p.add_argument("--model")
    p.add_argument("--params", help="JSON file with parameter values")
    p.add_argument("--window", help="START,END in seconds")
    p.add_argument("--strict", action="store_true", help="refuse events that fail the filters")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="calibrate models on a corpus")
    p.add_argument("corpus")
    p.add_argument("--model", action="append", help="model name(s); repeat or comma-separate")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--restarts", type=int, default=3)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("filter", help="apply the event filters and tally violations")
    p.add_argument("corpus")
    p.add_argument("--out")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("generate", help="write synthetic merge events")
    p.add_argument("spec", nargs="?", help="scenario JSON (default: built-in negotiated merge)")
    p.add_argument("-n", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("report", help="summarize a fits.csv into box-plot statistics")
    p.add_argument("fits")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except InputError as exc:
        _err(str(exc))
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
