"""Criterion-level acceptance checks.

Each ``check_*`` function returns ``(passed, detail)`` and is independent of
pytest; ``python3 tests/test_acceptance.py`` prints one line per criterion.
Under pytest the same lines appear in the terminal summary.
"""

import json
import math
import os
import sys
import tempfile
from importlib import resources

import numpy as np

sys.path.insert(0, os.path.dirname(__file__))

import oracles  # noqa: E402
from jumpscope import cli  # noqa: E402
from jumpscope.detector import detect, refine_jump_location  # noqa: E402
from jumpscope.differentiator import derivative_table, error_bound  # noqa: E402
from jumpscope.errors import NotRefinable  # noqa: E402
from jumpscope.model import DetectionGrid, EventKind, SmoothnessClass, make_step_policy  # noqa: E402
from jumpscope.synth import (  # noqa: E402
    CorpusConstraints,
    Poly,
    add_noise,
    build_signal,
    checker_sign,
    random_corpus,
)

# tolerances, as stated by the criteria
FP_SLACK = 1e-12          # criterion 1
LOCALIZE_WIDTH = 4.0      # criterion 2, in units of h
KINK_FACTOR = 7.0         # criterion 4, in units of eps
REL_TOL = 1e-12           # criterion 5
LINEAR_P_FLOOR = 8.0      # criterion 6, in units of delta
LINEAR_SIZE_TOL = 4.0     # criterion 6, in units of delta
SLOPE_REL_ERR = 0.1       # criterion 6
REFINE_WIDTH = 1e-4       # criterion 8

DELTAS = (1e-2, 1e-3, 1e-4)
TAU = 2 * math.pi
E = math.e


def _checker_models(h):
    """The four phases of the ++-- pattern on the lattice of step h."""
    return [("adversarial", dict(direction=lambda x, k=k: checker_sign(x, h, k))) for k in range(4)]


# ------------------------------------------------------------- criterion 1 --

C1_SIGNALS = {
    "sin(2 pi x)": (lambda x: np.sin(TAU * x), lambda x: TAU * np.cos(TAU * x), TAU, TAU**2),
    "x^3": (lambda x: x**3, lambda x: 3 * x**2, 3.0, 6.0),
    "(e^x - 1)/(e - 1)": (
        lambda x: np.expm1(x) / (E - 1), lambda x: np.exp(x) / (E - 1), E / (E - 1), E / (E - 1)
    ),
}


def check_1():
    violations, runs, worst = 0, 0, 0.0
    for f, df, m1, m2 in C1_SIGNALS.values():
        for delta in DELTAS:
            policy = make_step_policy(SmoothnessClass.smooth(m1, m2), delta)
            grid = DetectionGrid(policy.h)
            bound = math.sqrt(2 * m2 * delta)
            models = [("uniform", dict(seed=s)) for s in range(100)] + _checker_models(policy.h)
            for model, kw in models:
                table = derivative_table(add_noise(f, delta, model, **kw), grid, policy)
                err = float(np.max(np.abs(table.values - df(table.x))))
                worst = max(worst, err / bound)
                violations += err > bound + FP_SLACK
                runs += 1
    return violations == 0, f"{runs} runs, {violations} violations, worst err/bound {worst:.6f}"


# -------------------------------------------------------- criteria 2 and 3 --

def _jump_directions(truth):
    jumps = [(e.location, math.copysign(1.0, e.size)) for e in truth.of_kind("jump")]

    def inflate(x):
        x = np.asarray(x, dtype=float)
        if not jumps:
            return np.ones_like(x)
        locs = np.array([j[0] for j in jumps])
        near = np.argmin(np.abs(x[..., None] - locs), axis=-1)
        signs = np.array([j[1] for j in jumps])[near]
        return signs * np.where(x >= locs[near], 1.0, -1.0)

    return {
        "adversarial+": dict(direction=inflate),
        "adversarial-": dict(direction=lambda x: -inflate(x)),
    }


_CORPUS_RUNS = None


def _corpus_runs():
    global _CORPUS_RUNS
    if _CORPUS_RUNS is None:
        cons = CorpusConstraints()
        cls = SmoothnessClass.smooth(cons.m1, cons.m2)
        runs = []
        for i, (spec, truth) in enumerate(random_corpus(200, 2024, cons)):
            f, _ = build_signal(spec)
            models = {"uniform": ("uniform", dict(seed=i))}
            models.update({k: ("adversarial", v) for k, v in _jump_directions(truth).items()})
            for name, (model, kw) in models.items():
                report = detect(add_noise(f, cons.delta, model, **kw), cls, kappa=cons.kappa)
                runs.append((name, truth, report))
        _CORPUS_RUNS = (cons, runs)
    return _CORPUS_RUNS


def check_2():
    cons, runs = _corpus_runs()
    tp = fp = fn = bad = 0
    for _, truth, report in runs:
        h = report.params["h"]
        true = [e.location for e in truth.of_kind("jump")]
        found = report.jumps
        matched = [any(e.contains(x) for e in found) for x in true]
        useful = [any(e.contains(x) for x in true) for e in found]
        tp += sum(matched)
        fn += len(true) - sum(matched)
        fp += len(found) - sum(useful)
        bad += sum(e.width > LOCALIZE_WIDTH * h * (1 + 1e-12) for e in found)
        bad += len(found) != len(true)
    precision = tp / (tp + fp) if tp + fp else 1.0
    recall = tp / (tp + fn) if tp + fn else 1.0
    ok = precision == 1.0 and recall == 1.0 and bad == 0
    return ok, (f"{len(runs)} runs, {tp} jumps, precision {precision:.4f}, "
                f"recall {recall:.4f}, count/width failures {bad}")


def check_3():
    cons, runs = _corpus_runs()
    total = within = 0
    worst = 0.0
    for _, truth, report in runs:
        h = report.params["h"]
        bound = 2 * cons.delta + 2 * cons.m1 * h
        for t in truth.of_kind("jump"):
            hits = [e for e in report.jumps if e.contains(t.location)]
            total += 1
            if len(hits) == 1:
                err = abs(hits[0].size - t.size)
                worst = max(worst, err / bound)
                within += err <= bound
    return within == total and total > 0, (
        f"{within}/{total} jump sizes within 2 delta + 2 M1 h, worst err/bound {worst:.4f}"
    )


# ------------------------------------------------------------- criterion 4 --

def check_4():
    rng = np.random.default_rng(4)
    delta = 1e-4
    cases = mis = size_fail = 0
    worst = 0.0
    for a in (0.3, 1.0, 3.0):
        cls = SmoothnessClass.smooth(a, 1.0)
        policy = make_step_policy(cls, delta)
        for k in range(50):
            c = rng.uniform(0.15, 0.85)
            f = lambda x, c=c, a=a: a * np.abs(np.asarray(x) - c)  # noqa: E731
            for model, kw in [("uniform", dict(seed=k))] + _checker_models(policy.h)[k % 4:k % 4 + 1]:
                report = detect(add_noise(f, delta, model, **kw), cls)
                cases += 1
                kinds = [e.kind for e in report.events]
                if kinds != [EventKind.KINK] or not report.events[0].contains(c):
                    mis += 1
                    continue
                err = abs(abs(report.events[0].size) - 2 * a)
                worst = max(worst, err / (KINK_FACTOR * policy.epsilon))
                size_fail += err > KINK_FACTOR * policy.epsilon
    for k in range(50):
        c, x0 = rng.uniform(0.25, 1.0), rng.uniform(0.2, 0.8)
        cls = SmoothnessClass.smooth(2 * c * max(x0, 1 - x0), 2.0)
        policy = make_step_policy(cls, delta)
        f = lambda x, c=c, x0=x0: c * (np.asarray(x) - x0) ** 2  # noqa: E731
        for model, kw in [("uniform", dict(seed=k))] + _checker_models(policy.h)[k % 4:k % 4 + 1]:
            report = detect(add_noise(f, delta, model, **kw), cls)
            cases += 1
            kinds = [e.kind for e in report.events]
            mis += kinds != [EventKind.CRITICAL] or not report.events[0].contains(x0)
    return mis == 0 and size_fail == 0, (
        f"{cases} runs, {mis} misclassified, {size_fail} |P| errors above 7 eps, "
        f"worst err/(7 eps) {worst:.4f}"
    )


# ------------------------------------------------------------- criterion 5 --

# f'(x) = sum w_i |x - c_i|^(1/2): each term is (1/2)-Hoelder with constant 1,
# so the sum has Hoelder constant sum(w_i) = 1.
C5_CENTERS = (0.5 * (math.sqrt(5) - 1), 1 / math.pi, 0.5 + 1 / (4 * math.e), math.sqrt(2) - 1)
C5_WEIGHTS = (0.5, 0.25, 0.125, 0.125)


def _c15_signal():
    def f(x):
        x = np.asarray(x, dtype=float)
        return sum(w * (2 / 3) * np.sign(x - c) * np.abs(x - c) ** 1.5
                   for w, c in zip(C5_WEIGHTS, C5_CENTERS))

    def df(x):
        x = np.asarray(x, dtype=float)
        return sum(w * np.sqrt(np.abs(x - c)) for w, c in zip(C5_WEIGHTS, C5_CENTERS))

    return f, df, sum(C5_WEIGHTS)


def check_5():
    notes, ok = [], True
    for ma, delta in [(4.0, 0.02), (1.0, 1e-4), (7.3, 3e-6)]:
        frac = make_step_policy(SmoothnessClass.fractional(2.0, ma, 1.0), delta)
        smooth = make_step_policy(SmoothnessClass.smooth(1.0, ma), delta)
        ok &= abs(frac.h - smooth.h) <= REL_TOL * smooth.h
    a = 1.5
    for ma, delta in [(1.0, 1e-3), (2.5, 1e-5), (0.3, 1e-2)]:
        policy = make_step_policy(SmoothnessClass.fractional(a, ma, 1.0), delta)
        formula = a * ma ** (1 / a) * (2 / (a - 1)) ** ((a - 1) / a) * delta ** ((a - 1) / a)
        ok &= abs(error_bound(policy) - formula) <= REL_TOL * formula
    f, df, ma = _c15_signal()
    worst, runs = 0.0, 0
    for delta in DELTAS:
        policy = make_step_policy(SmoothnessClass.fractional(a, ma, ma), delta)
        grid = DetectionGrid(policy.h)
        bound = error_bound(policy)
        for model, kw in [("uniform", dict(seed=s)) for s in range(100)] + _checker_models(policy.h):
            table = derivative_table(add_noise(f, delta, model, **kw), grid, policy)
            err = float(np.max(np.abs(table.values - df(table.x))))
            worst = max(worst, err / bound)
            runs += 1
    ok &= worst <= 1.0
    notes.append(f"a=2 steps equal, a=1.5 bounds match; {runs} runs on a C^1.5 signal, "
                 f"worst err/bound {worst:.4f}")
    return ok, "; ".join(notes)


# ------------------------------------------------------------- criterion 6 --

C6_M1, C6_DELTA, C6_KAPPA, C6_T = 2.0, 1e-3, 1.5, 10.0


def _linear_cases(n=50, seed=6):
    rng = np.random.default_rng(seed)
    for k in range(n):
        xj = rng.uniform(0.2, 0.8)
        p = rng.choice([-1, 1]) * rng.uniform(LINEAR_P_FLOOR * 1.001, 20) * C6_DELTA
        s1, s2 = (rng.choice([-1, 1]) * rng.uniform(C6_M1 / 2, C6_M1) for _ in range(2))
        if k == 0:
            s1, s2 = C6_M1 / 2, -C6_M1 / 2  # the smallest admissible slopes
        f = lambda x, xj=xj, p=p, s1=s1, s2=s2: np.where(  # noqa: E731
            np.asarray(x) < xj, s1 * np.asarray(x), s2 * np.asarray(x) + (s1 - s2) * xj + p)
        yield k, xj, p, (s1, s2), f


def check_6a():
    cls = SmoothnessClass.linear(C6_M1)
    policy = make_step_policy(cls, C6_DELTA, C6_T)
    runs = fails = 0
    worst = 0.0
    for k, xj, p, _, f in _linear_cases():
        away = lambda x, xj=xj, p=p: np.sign(p) * np.where(np.asarray(x) >= xj, 1.0, -1.0)  # noqa: E731
        models = [("uniform", dict(seed=k)), ("adversarial", dict(direction=away)),
                  ("adversarial", dict(direction=lambda x, a=away: -a(x)))]
        models += _checker_models(policy.h)[k % 4:k % 4 + 1]
        for model, kw in models:
            report = detect(add_noise(f, C6_DELTA, model, **kw), cls, kappa=C6_KAPPA, t=C6_T)
            runs += 1
            jumps = report.jumps
            if len(jumps) != 1 or not jumps[0].contains(xj):
                fails += 1
                continue
            err = abs(jumps[0].size - p)
            worst = max(worst, err / C6_DELTA)
            fails += err > LINEAR_SIZE_TOL * C6_DELTA
    return fails == 0, (f"{runs} runs with |p| > 8 delta (kappa {C6_KAPPA}), {fails} failures, "
                        f"worst size error {worst:.3f} delta")


def check_6b():
    cls = SmoothnessClass.linear(C6_M1)
    policy = make_step_policy(cls, C6_DELTA, C6_T)
    worst, worst_slope, runs = 0.0, None, 0
    for k, xj, _, (s1, s2), f in _linear_cases():
        for phase in range(4):
            src = add_noise(f, C6_DELTA, "adversarial",
                            direction=lambda x, ph=phase: checker_sign(x, policy.slope_h, ph))
            report = detect(src, cls, kappa=C6_KAPPA, t=C6_T)
            runs += 1
            for x, v in report.derivative:
                slope = s1 if x < xj else s2
                rel = abs(v - slope) / abs(slope)
                if rel > worst:
                    worst, worst_slope = rel, slope
    return worst <= SLOPE_REL_ERR, (
        f"{runs} runs, worst slope relative error {worst:.4f} (|a| = {abs(worst_slope):.3f}, "
        f"M1/(t|a|) = {C6_M1 / (C6_T * abs(worst_slope)):.4f}) against 0.1"
    )


# ------------------------------------------------------------- criterion 7 --

def check_7():
    rng = np.random.default_rng(7)
    delta = 1e-4
    false_events = crit_total = crit_bad = 0
    for k in range(100):
        deg = int(rng.integers(0, 4))
        coeffs = tuple(rng.uniform(-1, 1, deg + 1))
        piece = Poly(coeffs)
        m1 = max(piece.sup_d1(0.0, 1.0), 1e-3)
        m2 = max(piece.sup_d2(0.0, 1.0), 0.5)
        cls = SmoothnessClass.smooth(m1, m2)
        policy = make_step_policy(cls, delta)
        roots = oracles.poly_derivative_roots(coeffs, 0.0, 1.0)
        f = np.polynomial.Polynomial(coeffs)
        for model, kw in _checker_models(policy.h)[k % 4:k % 4 + 1] + [
            ("adversarial", dict(direction=lambda x: np.cos(37 * np.asarray(x))))
        ]:
            report = detect(add_noise(f, delta, model, **kw), cls)
            false_events += len(report.jumps) + len(report.kinks)
            for e in report.critical_points:
                crit_total += 1
                crit_bad += not any(e.contains(r) for r in roots)
    ok = false_events == 0 and crit_bad == 0
    return ok, (f"200 runs, {false_events} jump/kink events, {crit_total} critical points "
                f"reported, {crit_bad} without a true root of f' inside")


# ------------------------------------------------------------- criterion 8 --

def check_8():
    rng = np.random.default_rng(8)
    delta = 1e-3
    refined = refusals = trials = 0
    for k in range(20):
        x0 = rng.uniform(0.3, 0.7)
        lo, hi = x0 - rng.uniform(0.001, 0.05), x0 + rng.uniform(0.001, 0.05)
        for model in ("uniform", "adversarial"):
            trials += 1
            for p, want in ((10 * delta, "refine"), (3 * delta, "refuse")):
                f = lambda x, x0=x0, p=p: np.where(np.asarray(x) >= x0, p, 0.0)  # noqa: E731
                src = add_noise(f, delta, model, k,
                                direction=lambda x, s=x0 - 0.01: np.asarray(x) - s)
                try:
                    ref = refine_jump_location(src, (lo, hi), delta, 0.0, REFINE_WIDTH)
                except NotRefinable:
                    refusals += want == "refuse"
                    continue
                refined += (want == "refine" and ref.width <= REFINE_WIDTH
                            and ref.lo <= x0 <= ref.hi)
    ok = refined == trials and refusals == trials
    return ok, (f"|p| = 10 delta refined to <= 1e-4 around x0 in {refined}/{trials}; "
                f"|p| = 3 delta refused in {refusals}/{trials}")


# ------------------------------------------------------------- criterion 9 --

def check_9():
    corpus = resources.files("jumpscope").joinpath("data", "demo_corpus.json")
    golden = os.path.join(os.path.dirname(__file__), "golden", "demo_report.json")
    saved = os.environ.pop("JUMPSCOPE_SEED", None)
    try:
        with tempfile.TemporaryDirectory() as d, resources.as_file(corpus) as path:
            out = os.path.join(d, "corpus_report.json")
            code = cli.main(["demo", "--input", str(path), "--output", out])
            with open(out) as fh:
                summary = json.load(fh)
            texts = []
            for i in range(2):
                target = os.path.join(d, f"demo{i}.json")
                cli.main(["demo", "--output", target])
                with open(target) as fh:
                    texts.append(fh.read())
    finally:
        if saved is not None:
            os.environ["JUMPSCOPE_SEED"] = saved
    with open(golden) as fh:
        reference = fh.read()
    s = summary["summary"]
    ok = code == 0 and summary["passed"] and texts[0] == texts[1] == reference
    return ok, (
        f"corpus demo: jumps {s['jump']['matched']}/{s['jump']['true']}, "
        f"kinks {s['kink']['matched']}/{s['kink']['true']}, "
        f"critical {s['critical']['matched']}/{s['critical']['true']}, "
        f"failures {sum(v['failures'] for v in s.values())}; golden diff "
        f"{'empty' if texts[0] == texts[1] == reference else 'NOT empty'}"
    )


CHECKS = {
    "1": ("derivative bound", check_1),
    "2": ("jump localization and count", check_2),
    "3": ("jump size", check_3),
    "4": ("kink/critical discrimination", check_4),
    "5": ("fractional consistency", check_5),
    "6a": ("linear mode steps", check_6a),
    "6b": ("linear mode slopes", check_6b),
    "7": ("no false positives", check_7),
    "8": ("refinement", check_8),
    "9": ("CLI end-to-end", check_9),
}


def _line(key):
    name, fn = CHECKS[key]
    ok, detail = fn()
    return ok, f"criterion {key:<3} {'PASS' if ok else 'FAIL'}  {name}: {detail}"


def _run(key, log):
    ok, line = _line(key)
    log.append(line)
    print(line)
    assert ok, line


def test_criterion_1(acceptance_log):
    _run("1", acceptance_log)


def test_criterion_2(acceptance_log):
    _run("2", acceptance_log)


def test_criterion_3(acceptance_log):
    _run("3", acceptance_log)


def test_criterion_4(acceptance_log):
    _run("4", acceptance_log)


def test_criterion_5(acceptance_log):
    _run("5", acceptance_log)


def test_criterion_6a(acceptance_log):
    _run("6a", acceptance_log)


def test_criterion_6b(acceptance_log):
    _run("6b", acceptance_log)


def test_criterion_7(acceptance_log):
    _run("7", acceptance_log)


def test_criterion_8(acceptance_log):
    _run("8", acceptance_log)


def test_criterion_9(acceptance_log):
    _run("9", acceptance_log)


if __name__ == "__main__":
    failed = 0
    for key in CHECKS:
        ok, line = _line(key)
        failed += not ok
        print(line, flush=True)
    sys.exit(1 if failed else 0)
