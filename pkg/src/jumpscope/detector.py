"""Locate jumps of f and kinks / critical points of f' from noisy data.

Pipeline (``detect``): step policy -> grid -> central differences -> flag
and merge jump nodes -> jump sizes -> kink and critical-point pass on the
jump-free part of the grid -> derivative-jump sizes -> mask -> report.

Thresholds are provable ceilings of the tested statistic on regular
windows, so none of them can fire on a function that obeys the stated
bounds:

* ``|f_j| <= M1 + delta/h`` on a window without a jump;
* ``|f_{j+1} - f_j| <= curvature_increment + 2 delta/h`` on a window where
  f' is M2-Lipschitz (Hoelder for the fractional class).  Four noisy
  samples enter a second difference, hence ``2 delta/h``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .differentiator import DerivativeTable, derivative_table
from .errors import ModeUnsupportedKinks, NotRefinable
from .model import (
    DetectionGrid,
    DetectionReport,
    Event,
    EventKind,
    MaskedNode,
    SignalSource,
    SmoothnessClass,
    StepPolicy,
    Variant,
    effective_delta,
    make_step_policy,
)

# Relative slack on thresholds that coincide with a provable ceiling; the
# worst case attains the ceiling exactly and rounding must not tip it over.
FP_GUARD = 1e-9

KINK_BOUND_FACTOR = 7.0


@dataclass(frozen=True)
class Thresholds:
    jump_factor: float
    jump_threshold: float
    kink_threshold: float
    critical_threshold: float
    sign_floor: float
    p_min: float
    smooth_ceiling: float
    pair_ceiling: float

    @classmethod
    def from_policy(cls, policy: StepPolicy, kappa: float = 4.0) -> "Thresholds":
        if not (kappa > 1 and math.isfinite(kappa)):
            raise ValueError(f"jump factor must be > 1, got {kappa!r}")
        smooth_ceiling = policy.m1 + policy.node_noise
        pair_ceiling = policy.curvature_increment + 2.0 * policy.node_noise
        jump = kappa * smooth_ceiling
        kink = pair_ceiling * (1.0 + FP_GUARD)
        return cls(
            jump_factor=float(kappa),
            jump_threshold=jump,
            kink_threshold=kink,
            critical_threshold=kink,
            sign_floor=policy.epsilon * (1.0 + FP_GUARD),
            p_min=2.0 * policy.h * jump * (1.0 + 1.0 / kappa),
            smooth_ceiling=smooth_ceiling,
            pair_ceiling=pair_ceiling,
        )

    def to_dict(self):
        return {
            "jump_factor": self.jump_factor,
            "jump": self.jump_threshold,
            "kink": self.kink_threshold,
            "critical": self.critical_threshold,
            "sign_floor": self.sign_floor,
            "p_min": self.p_min,
        }


@dataclass(frozen=True)
class Run:
    """Maximal run of consecutive flagged indices (nodes, or pairs)."""

    start: int
    stop: int
    representative: int
    interval: tuple


@dataclass(frozen=True)
class Refinement:
    lo: float
    hi: float
    floor_reached: bool
    steps: int

    @property
    def interval(self):
        return self.lo, self.hi

    @property
    def width(self):
        return self.hi - self.lo


# ------------------------------------------------------------------- jumps --

def flag_jump_nodes(table: DerivativeTable, th: Thresholds) -> np.ndarray:
    """Nodes j with |f_j| above the jump threshold, ascending."""
    return table.nodes[np.abs(table.values) > th.jump_threshold]


def merge_flags(flags, grid: DetectionGrid, table: DerivativeTable) -> list:
    """Collapse consecutive flagged nodes into runs.

    A run reports the hull of its node intervals and, as representative,
    the node with the largest |f_j| (smallest j on ties).
    """
    flags = np.asarray(flags, dtype=np.int64)
    if flags.size == 0:
        return []
    mask = np.zeros(grid.j_max, dtype=bool)
    mask[flags - 1] = True
    starts, stops = _kernels.find_runs(mask)
    h = grid.h
    runs = []
    for s, e in zip(starts.tolist(), stops.tolist()):
        rep = s + int(np.argmax(np.abs(table.values[s:e + 1])))
        runs.append(Run(s + 1, e + 1, rep + 1, (s * h, (e + 2) * h)))
    return runs


def estimate_jump(src: SignalSource, j: int, policy: StepPolicy):
    """Jump size f_delta(jh + h) - f_delta(jh - h) and its guaranteed error."""
    h = policy.h
    right, left = src.eval(np.clip(np.array([(j + 1) * h, (j - 1) * h]), 0.0, 1.0))
    if policy.variant is Variant.LINEAR:
        bound = 2.0 * policy.delta + 4.0 * policy.m1 * h
    else:
        bound = 2.0 * policy.delta + 2.0 * policy.m1 * h
    return float(right - left), bound


# ------------------------------------------------------------------- kinks --

def _collar(jump_runs, j_max):
    usable = np.ones(j_max, dtype=bool)
    for run in jump_runs:
        usable[max(run.start - 2, 0):min(run.stop + 1, j_max)] = False
    return usable


def estimate_derivative_jump(table: DerivativeTable, pair, policy: StepPolicy):
    """Signed derivative-jump estimate 2 (f_{j+1} - f_j) and its bound 7 eps."""
    j, j1 = pair
    if j1 != j + 1:
        raise ValueError(f"pair must be consecutive nodes, got {pair!r}")
    if policy.variant is Variant.LINEAR:
        raise ModeUnsupportedKinks("derivative jumps need m2 > 0")
    diff = table.value_at(j1) - table.value_at(j)
    return 2.0 * diff, KINK_BOUND_FACTOR * policy.epsilon


def classify_kinks(
    table: DerivativeTable,
    jump_runs,
    th: Thresholds,
    policy: Optional[StepPolicy] = None,
) -> list:
    """Kink and critical-point events on the part of the grid away from jumps.

    Nodes inside a jump run and one node either side are ignored.  A pair
    (j, j+1) whose difference exceeds ``th.kink_threshold`` cannot come from
    a window where f' is regular, so it marks a kink on (jh - h, jh + 2h).
    Overlapping kink pairs merge into one event.

    A critical point is reported between two consecutive trusted nodes
    (|f_j| above ``th.sign_floor``, hence sign f_j = sign f') whose signs
    differ, provided no kink event overlaps that stretch.  For adjacent
    trusted nodes this reduces to the sign-change pair test; the narrow kink
    rule (sign change, difference above ``th.critical_threshold``) only
    fires when the critical threshold is set below the kink threshold.

    Kink events carry a size when ``policy`` is supplied.
    """
    f = table.values
    h = table.h
    usable = _collar(jump_runs, f.size)
    codes = _kernels.classify_pairs(
        f, usable, th.kink_threshold, th.critical_threshold, th.sign_floor
    )
    diffs = np.diff(f)

    kinks = []
    current = None
    for k in np.flatnonzero(codes).tolist():
        j = k + 1
        if codes[k] == _kernels.PAIR_KINK_WIDE:
            lo, hi = (j - 1) * h, (j + 2) * h
        else:
            lo, hi = j * h, (j + 1) * h
        if current is not None and lo < current["hi"]:
            current["hi"] = max(current["hi"], hi)
            current["pairs"].append(k)
        else:
            current = {"lo": lo, "hi": hi, "pairs": [k]}
            kinks.append(current)

    events = []
    for group in kinks:
        pairs = group["pairs"]
        k = pairs[int(np.argmax(np.abs(diffs[pairs])))]
        j = k + 1
        size = bound = None
        if policy is not None:
            size, bound = estimate_derivative_jump(table, (j, j + 1), policy)
        rule = "ceiling" if codes[k] == _kernels.PAIR_KINK_WIDE else "sign-change"
        events.append(
            Event(
                EventKind.KINK,
                (group["lo"], group["hi"]),
                size,
                bound,
                {
                    "pair": [j, j + 1],
                    "f_left": float(f[k]),
                    "f_right": float(f[k + 1]),
                    "difference": float(diffs[k]),
                    "rule": rule,
                },
            )
        )

    seg_a, seg_b = _kernels.sign_segments(f, usable, th.sign_floor)
    for a, b in zip(seg_a.tolist(), seg_b.tolist()):
        lo, hi = (a + 1) * h, (b + 1) * h
        if any(lo < e.interval[1] and e.interval[0] < hi for e in events if e.kind is EventKind.KINK):
            continue
        events.append(
            Event(
                EventKind.CRITICAL,
                (lo, hi),
                diagnostics={
                    "nodes": [a + 1, b + 1],
                    "f_left": float(f[a]),
                    "f_right": float(f[b]),
                },
            )
        )
    events.sort(key=lambda e: (e.location, e.interval[0]))
    return events


# -------------------------------------------------------------- pipeline --

def _mask(table: DerivativeTable, events):
    h = table.h
    x = table.x
    masked = np.zeros(len(table), dtype=bool)
    reasons = [None] * len(table)
    for event in events:
        if event.kind is EventKind.CRITICAL:
            continue
        lo, hi = event.interval
        hit = ((x - h) < hi) & (lo < (x + h)) & ~masked
        for i in np.flatnonzero(hit).tolist():
            reasons[i] = event.kind.value
        masked |= hit
    return masked, reasons


def detect(
    src: SignalSource,
    cls: SmoothnessClass,
    *,
    kappa: float = 4.0,
    t: float = 10.0,
    kinks: Optional[bool] = None,
    thresholds: Optional[Thresholds] = None,
) -> DetectionReport:
    """Run the full pipeline on ``src`` under the bounds of ``cls``.

    ``kinks=None`` classifies kinks whenever the class allows it; asking for
    kinks on the linear class raises ``ModeUnsupportedKinks``.  The number of
    jumps is ``len(report.jumps)``.
    """
    delta = effective_delta(src)
    policy = make_step_policy(cls, delta, t=t)
    th = thresholds if thresholds is not None else Thresholds.from_policy(policy, kappa)
    grid = DetectionGrid(policy.h)
    table = derivative_table(src, grid, policy)

    runs = merge_flags(flag_jump_nodes(table, th), grid, table)
    events = []
    for run in runs:
        size, bound = estimate_jump(src, run.representative, policy)
        events.append(
            Event(
                EventKind.JUMP,
                run.interval,
                size,
                bound,
                {
                    "nodes": list(range(run.start, run.stop + 1)),
                    "representative": run.representative,
                    "f_j": table.value_at(run.representative),
                },
            )
        )

    warnings = []
    if policy.variant is Variant.LINEAR:
        if kinks:
            raise ModeUnsupportedKinks("kink classification needs m2 > 0")
        warnings.append("kink detection disabled in linear mode")
        out_table = derivative_table(src, DetectionGrid(policy.slope_h), policy)
    else:
        if kinks is not False:
            events.extend(classify_kinks(table, runs, th, policy))
        out_table = table
    events.sort(key=lambda e: (e.location, e.interval[0]))

    masked, reasons = _mask(out_table, events)
    derivative = [
        (float(x), float(v))
        for x, v, m in zip(out_table.x, out_table.values, masked)
        if not m
    ]
    masked_nodes = [
        MaskedNode(int(j), float(x), reasons[i])
        for i, (j, x) in enumerate(zip(out_table.nodes, out_table.x))
        if masked[i]
    ]

    params = {
        "delta": delta,
        "mode": policy.variant.value,
        "class": cls.to_dict(),
        "h": policy.h,
        "epsilon": policy.epsilon,
        "table_h": out_table.h,
        "j_max": grid.j_max,
        "t": policy.t,
        "thresholds": th.to_dict(),
    }
    return DetectionReport(derivative, events, params, masked_nodes, out_table, warnings)


# ------------------------------------------------------------- refinement --

def refine_jump_location(
    src: SignalSource,
    bracket,
    delta: float,
    m1: float,
    target_width: float,
) -> Refinement:
    """Shrink a bracket around a single jump by bisection.

    A window [a, b] is accepted as holding the jump when
    |f_delta(b) - f_delta(a)| > 2 delta + m1 (b - a), which a regular window
    can never satisfy.  Before bisecting, the whole bracket must certify
    |p| > 4 delta + m1 w, i.e. |f_delta(hi) - f_delta(lo)| > 6 delta + 2 m1 w;
    that guarantees every bisection step finds exactly one passing half.

    Sampled sources are bisected on their own nodes and stop once the
    width drops to 4 dx (``floor_reached`` is then set).
    """
    if not target_width > 0:
        raise ValueError("target width must be > 0")
    lo, hi = float(bracket[0]), float(bracket[1])
    if not lo < hi:
        raise ValueError(f"empty bracket {bracket!r}")
    res = float(getattr(src, "resolution", 0.0))
    if res > 0:
        lo = math.floor(lo / res + 1e-9) * res
        hi = min(math.ceil(hi / res - 1e-9) * res, 1.0)
    floor_width = max(target_width, 4.0 * res)

    f_lo, f_hi = (float(v) for v in src.eval(np.array([lo, hi])))
    width = hi - lo
    if not abs(f_hi - f_lo) > 6.0 * delta + 2.0 * m1 * width:
        raise NotRefinable(
            "bracket increment does not certify a jump larger than 4*delta"
        )

    steps = 0
    floor_reached = False
    while hi - lo > target_width:
        if hi - lo <= floor_width:
            floor_reached = True
            break
        mid = 0.5 * (lo + hi)
        if res > 0:
            mid = src.snap(mid)
            if not lo < mid < hi:
                floor_reached = True
                break
        f_mid = float(src.eval(mid))
        left = abs(f_mid - f_lo) > 2.0 * delta + m1 * (mid - lo)
        right = abs(f_hi - f_mid) > 2.0 * delta + m1 * (hi - mid)
        if left == right:
            raise NotRefinable(
                "both halves pass the window test" if left
                else "neither half passes the window test"
            )
        if left:
            hi, f_hi = mid, f_mid
        else:
            lo, f_lo = mid, f_mid
        steps += 1
    return Refinement(lo, hi, floor_reached, steps)
