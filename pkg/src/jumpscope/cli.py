"""Command-line front end.

    jumpscope detect --input data.csv --delta 1e-3 --m1 2 --m2 8 --output report.json
    jumpscope demo   [--input spec_or_corpus.json] [--noise uniform] [--output ...]
    jumpscope gen    --n 200 --seed 0 --output corpus.json

Exit status: 0 on success, 1 on input, parse and I/O problems, 2 when the
numbers admit no warranted answer (for example the step would not fit in
[0, 1]).  Diagnostics go to stderr; no report is written on failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from .detector import detect
from .errors import (
    DetectionError,
    DomainNotUnit,
    InputError,
    NonUniformGrid,
    ParseError,
)
from .model import DetectionReport, SampledGridSource, SmoothnessClass, make_step_policy
from .synth import (
    CorpusConstraints,
    PieceSpec,
    add_noise,
    build_signal,
    corpus_from_dict,
    corpus_to_dict,
    random_corpus,
)

GRID_TOL = 1e-9
DEMO_SPEC = "demo_step.json"
NOISE_MODELS = ("uniform", "adversarial", "checker")


class UsageError(InputError):
    """Bad or missing command-line options."""


# ------------------------------------------------------------------ config --

@dataclass(frozen=True)
class RunConfig:
    mode: str = "auto"
    delta: Optional[float] = None
    m1: Optional[float] = None
    m2: Optional[float] = None
    a: Optional[float] = None
    ma: Optional[float] = None
    t: float = 10.0
    jump_factor: float = 4.0
    input: Optional[str] = None
    output: Optional[str] = None
    emit_plot: bool = False

    def resolved_mode(self):
        if self.mode != "auto":
            return self.mode
        if self.a is not None:
            return "fractional"
        return "smooth" if (self.m2 or 0.0) > 0 else "linear"

    def smoothness_class(self) -> SmoothnessClass:
        mode = self.resolved_mode()
        if self.m1 is None:
            raise UsageError("--m1 is required")
        if mode == "smooth":
            if self.m2 is None:
                raise UsageError("smooth mode needs --m2")
            return SmoothnessClass.smooth(self.m1, self.m2)
        if mode == "fractional":
            if self.a is None or self.ma is None:
                raise UsageError("fractional mode needs --alpha and --ma")
            return SmoothnessClass.fractional(self.a, self.ma, self.m1)
        return SmoothnessClass.linear(self.m1)


# ------------------------------------------------------------------- input --

def _read_rows(path):
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            yield lineno, row


def ingest_csv(path, delta: float = 0.0, m1: float = 0.0) -> SampledGridSource:
    """Read ``x,value`` rows into a ``SampledGridSource``.

    A non-numeric first row is taken as a header.  The abscissae must run
    from 0 to 1 in equal steps (relative tolerance 1e-9).
    """
    xs, vs = [], []
    for lineno, row in _read_rows(path):
        if len(row) != 2:
            raise ParseError(f"expected 2 columns, got {len(row)}", lineno)
        try:
            x, v = float(row[0]), float(row[1])
        except ValueError:
            if not xs and lineno == 1:
                continue  # header
            raise ParseError(f"not a number pair: {','.join(row)!r}", lineno) from None
        if not (math.isfinite(x) and math.isfinite(v)):
            raise ParseError("non-finite value", lineno)
        xs.append(x)
        vs.append(v)
    if len(xs) < 3:
        raise ParseError(f"need at least 3 samples, got {len(xs)}")

    x = np.array(xs)
    lo, hi = x.min(), x.max()
    if abs(x[0]) > GRID_TOL or abs(x[-1] - 1.0) > GRID_TOL or lo < -GRID_TOL or hi > 1 + GRID_TOL:
        raise DomainNotUnit(
            f"x spans [{lo:g}, {hi:g}]; map it onto [0, 1] with u = (x - x0) / L "
            "and pass m1 * L and m2 * L**2 as the bounds"
        )
    dx = 1.0 / (x.size - 1)
    steps = np.diff(x)
    worst = int(np.argmax(np.abs(steps - dx)))
    if abs(steps[worst] - dx) > GRID_TOL * dx:
        raise NonUniformGrid(
            f"spacing {steps[worst]!r} between samples {worst} and {worst + 1} "
            f"differs from {dx!r} beyond relative tolerance {GRID_TOL:g}"
        )
    return SampledGridSource(np.array(vs), delta, m1)


# ------------------------------------------------------------------ output --

def _clean(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    return v


def event_to_dict(event):
    return _clean(
        {
            "kind": event.kind.value,
            "interval": list(event.interval),
            "location": event.location,
            "size": event.size,
            "size_error_bound": event.size_error_bound,
            "diagnostics": event.diagnostics,
        }
    )


def report_to_dict(report: DetectionReport) -> dict:
    return _clean(
        {
            "params": report.params,
            "derivative": [[x, v] for x, v in report.derivative],
            "events": [event_to_dict(e) for e in report.events],
            "masked": [{"j": m.j, "x": m.x, "reason": m.reason} for m in report.masked],
            "warnings": list(report.warnings),
        }
    )


def dumps(doc) -> str:
    """Canonical JSON: insertion key order, shortest round-trip floats."""
    return json.dumps(doc, indent=1, allow_nan=False) + "\n"


def plot_table(report: DetectionReport) -> str:
    reasons = {m.j: m.reason for m in report.masked}
    lines = ["# x f_j flag"]
    for j, x, v in zip(report.table.nodes, report.table.x, report.table.values):
        lines.append(f"{float(x)!r} {float(v)!r} {reasons.get(int(j), 'ok')}")
    return "\n".join(lines) + "\n"


def _emit(text, output):
    if output is None:
        sys.stdout.write(text)
    else:
        Path(output).write_text(text)


def _plot_path(output):
    return Path(output).with_suffix(".plot.txt") if output else Path("jumpscope.plot.txt")


# ---------------------------------------------------------------- commands --

def run(config: RunConfig) -> int:
    """Detect on the CSV ``config.input`` and write the report."""
    if config.input is None:
        raise UsageError("--input is required")
    if config.delta is None:
        raise UsageError("--delta is required")
    cls = config.smoothness_class()
    src = ingest_csv(config.input, config.delta, cls.m1)
    report = detect(src, cls, kappa=config.jump_factor, t=config.t)
    if src.dx > report.params["h"] / 10:
        report.warnings.append(
            f"sample spacing {src.dx:g} exceeds h/10 = {report.params['h'] / 10:g}; "
            "node snapping dominates the noise bound"
        )
    text = dumps(report_to_dict(report))
    plot = plot_table(report) if config.emit_plot else None
    _emit(text, config.output)
    if plot is not None:
        _plot_path(config.output).write_text(plot)
    return 0


def _demo_seed(default):
    env = os.environ.get("JUMPSCOPE_SEED")
    if env is None or env.strip() == "":
        return default
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"JUMPSCOPE_SEED must be an integer, got {env!r}") from None


def make_noisy(evaluator, delta, model, seed, h):
    """Noise wrapper used by the demo; the adversarial pattern is fixed."""
    if model == "adversarial":
        phase = (seed % 1000) * 0.001 * 2 * math.pi
        return add_noise(evaluator, delta, model, seed,
                         direction=lambda x: np.cos(2 * math.pi * 7 * np.asarray(x) + phase))
    if model == "checker":
        return add_noise(evaluator, delta, model, seed, spacing=h)
    return add_noise(evaluator, delta, model, seed)


def score(report: DetectionReport, truth) -> dict:
    """Compare reported events with ground truth, kind by kind, in order."""
    h = report.params["h"]
    eps = report.params["epsilon"]
    out = {}
    for kind, found in (("jump", report.jumps), ("kink", report.kinks),
                        ("critical", report.critical_points)):
        true = truth.of_kind(kind)
        hits = 0
        used = set()
        for t in true:
            for i, e in enumerate(found):
                if i not in used and e.contains(t.location):
                    used.add(i)
                    hits += 1
                    break
        entry = {"true": len(true), "found": len(found), "matched": hits}
        paired = list(zip(found, true)) if len(found) == len(true) else []
        located = len(found) == len(true) == hits
        if kind == "jump":
            entry["localized"] = located and all(e.width <= 4 * h * (1 + 1e-12) for e, _ in paired)
            entry["sizes_within_bound"] = located and all(
                abs(e.size - t.size) <= e.size_error_bound for e, t in paired)
        elif kind == "kink":
            entry["sizes_within_bound"] = located and all(
                abs(abs(e.size) - abs(t.size)) <= 7 * eps for e, t in paired)
        entry["ok"] = located and all(v for k, v in entry.items() if isinstance(v, bool))
        out[kind] = entry
    return out


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc.msg}", exc.lineno) from None


def _bundled(name):
    with resources.files("jumpscope").joinpath("data", name).open() as fh:
        return json.load(fh)


def demo(config: RunConfig, noise, seed) -> int:
    doc = _load_json(config.input) if config.input else _bundled(DEMO_SPEC)
    if doc.get("format") == "jumpscope-corpus":
        return _demo_corpus(config, doc, noise, seed)

    settings = doc.get("settings", {})
    merged = RunConfig(
        mode=config.mode,
        delta=config.delta if config.delta is not None else settings.get("delta"),
        m1=config.m1 if config.m1 is not None else settings.get("m1"),
        m2=config.m2 if config.m2 is not None else settings.get("m2"),
        a=config.a, ma=config.ma, t=config.t, jump_factor=config.jump_factor,
    )
    if merged.delta is None:
        raise UsageError("--delta is required (the spec carries no settings)")
    cls = merged.smoothness_class()
    spec = PieceSpec.from_dict(doc)
    evaluator, truth = build_signal(spec)
    model = noise[0] if noise else settings.get("noise", "uniform")
    h = make_step_policy(cls, merged.delta, merged.t).h
    src = make_noisy(evaluator, merged.delta, model, seed, h)
    report = detect(src, cls, kappa=merged.jump_factor, t=merged.t)
    out = report_to_dict(report)
    out["noise"] = {"model": model, "seed": seed}
    out["truth"] = _clean(truth.to_dict())
    out["score"] = score(report, truth)
    text = dumps(out)
    plot = plot_table(report) if config.emit_plot else None
    _emit(text, config.output)
    if plot is not None:
        _plot_path(config.output).write_text(plot)
    return 0


def _demo_corpus(config, doc, noise, seed):
    corpus, cons = corpus_from_dict(doc)
    delta = config.delta if config.delta is not None else cons.get("delta")
    m1 = config.m1 if config.m1 is not None else cons.get("m1")
    m2 = config.m2 if config.m2 is not None else cons.get("m2")
    kappa = config.jump_factor if config.jump_factor != 4.0 else cons.get("kappa", 4.0)
    if delta is None:
        raise UsageError("--delta is required (the corpus carries no constraints)")
    merged = RunConfig(mode=config.mode, delta=delta, m1=m1, m2=m2, a=config.a, ma=config.ma,
                       t=config.t, jump_factor=kappa)
    cls = merged.smoothness_class()
    models = list(noise) if noise else ["uniform", "adversarial"]
    h = make_step_policy(cls, delta, merged.t).h
    signals = []
    totals = {k: {"true": 0, "found": 0, "matched": 0, "failures": 0}
              for k in ("jump", "kink", "critical")}
    params = None
    for i, (spec, truth) in enumerate(corpus):
        evaluator, _ = build_signal(spec)
        for model in models:
            src = make_noisy(evaluator, delta, model, seed + i, h)
            report = detect(src, cls, kappa=kappa, t=merged.t)
            params = params or report.params
            sc = score(report, truth)
            for kind, entry in sc.items():
                tot = totals[kind]
                tot["true"] += entry["true"]
                tot["found"] += entry["found"]
                tot["matched"] += entry["matched"]
                tot["failures"] += 0 if entry["ok"] else 1
            signals.append({
                "index": i,
                "noise": model,
                "events": [event_to_dict(e) for e in report.events],
                "score": sc,
            })
    for tot in totals.values():
        tot["precision"] = tot["matched"] / tot["found"] if tot["found"] else 1.0
        tot["recall"] = tot["matched"] / tot["true"] if tot["true"] else 1.0
    out = {
        "params": params,
        "noise": {"models": models, "seed": seed},
        "summary": totals,
        "passed": all(t["failures"] == 0 for t in totals.values()),
        "signals": signals,
    }
    _emit(dumps(_clean(out)), config.output)
    return 0


def gen(args) -> int:
    cons = CorpusConstraints(
        delta=args.delta if args.delta is not None else 1e-4,
        m1=args.m1 if args.m1 is not None else 3.0,
        m2=args.m2 if args.m2 is not None else 4.0,
        kappa=args.kappa,
    )
    corpus = random_corpus(args.n, args.seed, cons)
    _emit(dumps(_clean(corpus_to_dict(corpus, cons, args.seed))), args.output)
    return 0


# --------------------------------------------------------------------- main --

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--mode", choices=["auto", "smooth", "fractional", "linear"], default="auto")
    common.add_argument("--delta", type=float, help="sup-norm noise bound")
    common.add_argument("--m1", type=float, help="bound on |f'| off breakpoints")
    common.add_argument("--m2", type=float, help="bound on |f''| off breakpoints")
    common.add_argument("--alpha", type=float, help="Hoelder order a in (1, 2]")
    common.add_argument("--ma", type=float, help="Hoelder constant of f'")
    common.add_argument("--t", type=float, default=10.0, help="slope confidence (linear mode)")
    common.add_argument("--kappa", type=float, default=4.0, help="jump factor, > 1")
    common.add_argument("--input", help="input path")
    common.add_argument("--output", help="report path (stdout if omitted)")
    common.add_argument("--plot", action="store_true", help="also write an x, f_j, flag table")

    parser = _Parser(prog="jumpscope", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("detect", parents=[common], help="detect on a CSV of x,value rows")
    p = sub.add_parser("demo", parents=[common], help="detect on a synthetic spec or corpus")
    p.add_argument("--noise", action="append", choices=NOISE_MODELS)
    p.add_argument("--seed", type=int, default=0)
    p = sub.add_parser("gen", parents=[common], help="write a random corpus")
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    return parser


def config_from_args(args) -> RunConfig:
    return RunConfig(
        mode=args.mode, delta=args.delta, m1=args.m1, m2=args.m2, a=args.alpha,
        ma=args.ma, t=args.t, jump_factor=args.kappa, input=args.input,
        output=args.output, emit_plot=args.plot,
    )


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command == "detect":
            return run(config_from_args(args))
        if args.command == "demo":
            return demo(config_from_args(args), args.noise, _demo_seed(args.seed))
        return gen(args)
    except DetectionError as exc:
        print(f"jumpscope: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except (InputError, OSError) as exc:
        print(f"jumpscope: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:  # bad numeric arguments rejected by constructors
        print(f"jumpscope: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
