"""Piecewise-smooth test signals with exact ground truth, and bounded noise.

A ``PieceSpec`` splits [0, 1] at breakpoints; each segment carries one
primitive (``Poly`` up to degree 3, ``Affine``, or ``Sine`` = affine plus a
sinusoid) and each interior breakpoint a ``Join``: a jump of f, a kink (jump
of f'), or a smooth join (f and f' continuous).  ``build_signal`` turns a
spec into an exact evaluator plus ``GroundTruth`` whose bounds are computed
from the primitives in closed form.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np
from numpy.polynomial import Polynomial

from . import _kernels
from .errors import ConstraintsInfeasible, InvalidSpec
from .model import SignalSource, SmoothnessClass, make_step_policy

TWO_PI = 2.0 * math.pi


# -------------------------------------------------------------- primitives --

@dataclass(frozen=True)
class Poly:
    coeffs: tuple  # ascending powers of x

    kind = "poly"

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coeffs)
        if not coeffs or len(coeffs) > 4:
            raise InvalidSpec("polynomial pieces need 1 to 4 coefficients")
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def _p(self):
        return Polynomial(self.coeffs)

    def value(self, x):
        return self._p(x)

    def d1(self, x):
        return self._p.deriv(1)(x)

    def d2(self, x):
        return self._p.deriv(2)(x)

    def sup_d1(self, lo, hi):
        cand = [lo, hi] + _real_roots(self._p.deriv(2), lo, hi)
        return float(np.max(np.abs(self.d1(np.array(cand)))))

    def sup_d2(self, lo, hi):
        # f'' is affine, extreme at an endpoint
        return float(np.max(np.abs(self.d2(np.array([lo, hi])))))

    def critical_points(self, lo, hi):
        d1 = self._p.deriv(1)
        if len(d1.coef) == 0 or np.all(d1.coef == 0):
            return []
        d2 = self._p.deriv(2)
        return [r for r in _real_roots(d1, lo, hi) if d2(r) != 0.0]

    def shifted(self, offset):
        return Poly((self.coeffs[0] + offset,) + self.coeffs[1:])

    def to_dict(self):
        return {"kind": "poly", "coeffs": list(self.coeffs)}


@dataclass(frozen=True)
class Affine:
    slope: float
    intercept: float

    kind = "affine"

    def value(self, x):
        return self.intercept + self.slope * np.asarray(x, dtype=float)

    def d1(self, x):
        return np.full(np.shape(x), float(self.slope))

    def d2(self, x):
        return np.zeros(np.shape(x))

    def sup_d1(self, lo, hi):
        return abs(float(self.slope))

    def sup_d2(self, lo, hi):
        return 0.0

    def critical_points(self, lo, hi):
        return []

    def shifted(self, offset):
        return Affine(self.slope, self.intercept + offset)

    def to_dict(self):
        return {"kind": "affine", "slope": self.slope, "intercept": self.intercept}


@dataclass(frozen=True)
class Sine:
    """offset + slope x + amp sin(2 pi freq x + phase)."""

    offset: float
    slope: float
    amp: float
    freq: float
    phase: float

    kind = "sine"

    @property
    def omega(self):
        return TWO_PI * self.freq

    def _theta(self, x):
        return self.omega * np.asarray(x, dtype=float) + self.phase

    def value(self, x):
        return self.offset + self.slope * np.asarray(x, dtype=float) + self.amp * np.sin(self._theta(x))

    def d1(self, x):
        return self.slope + self.amp * self.omega * np.cos(self._theta(x))

    def d2(self, x):
        return -self.amp * self.omega ** 2 * np.sin(self._theta(x))

    def _phase_points(self, lo, hi, shift):
        """x in (lo, hi) with theta(x) = shift + n pi, paired with n."""
        w = self.omega
        if w == 0 or self.amp == 0:
            return []
        t_lo, t_hi = sorted((w * lo + self.phase, w * hi + self.phase))
        n0 = math.ceil((t_lo - shift) / math.pi)
        n1 = math.floor((t_hi - shift) / math.pi)
        return [((shift + n * math.pi - self.phase) / w, n) for n in range(n0, n1 + 1)]

    def sup_d1(self, lo, hi):
        vals = list(np.abs(self.d1(np.array([lo, hi]))))
        aw = self.amp * self.omega
        for _, n in self._phase_points(lo, hi, 0.0):
            vals.append(abs(self.slope + aw * (1.0 if n % 2 == 0 else -1.0)))
        return float(max(vals))

    def sup_d2(self, lo, hi):
        vals = list(np.abs(self.d2(np.array([lo, hi]))))
        if self._phase_points(lo, hi, 0.5 * math.pi):
            vals.append(abs(self.amp) * self.omega ** 2)
        return float(max(vals))

    def critical_points(self, lo, hi):
        aw = self.amp * self.omega
        if aw == 0:
            return []
        c = -self.slope / aw
        if not -1.0 < c < 1.0:
            return []
        base = math.acos(c)
        out = []
        for sign in (1.0, -1.0):
            target = sign * base
            w = self.omega
            t_lo, t_hi = sorted((w * lo + self.phase, w * hi + self.phase))
            n0 = math.ceil((t_lo - target) / TWO_PI)
            n1 = math.floor((t_hi - target) / TWO_PI)
            for n in range(n0, n1 + 1):
                x = (target + n * TWO_PI - self.phase) / w
                if lo < x < hi:
                    out.append(x)
        return sorted(out)

    def shifted(self, offset):
        return Sine(self.offset + offset, self.slope, self.amp, self.freq, self.phase)

    def to_dict(self):
        return {
            "kind": "sine",
            "offset": self.offset,
            "slope": self.slope,
            "amp": self.amp,
            "freq": self.freq,
            "phase": self.phase,
        }


def _real_roots(poly, lo, hi):
    coef = np.trim_zeros(np.asarray(poly.coef, dtype=float), "b")
    if coef.size <= 1:
        return []
    roots = Polynomial(coef).roots()
    real = sorted({float(r.real) for r in roots if abs(r.imag) <= 1e-12 * max(1.0, abs(r.real))})
    return [r for r in real if lo < r < hi]


def piece_from_dict(d):
    kind = d.get("kind")
    try:
        if kind == "poly":
            return Poly(tuple(d["coeffs"]))
        if kind == "affine":
            return Affine(float(d["slope"]), float(d["intercept"]))
        if kind == "sine":
            return Sine(*(float(d[k]) for k in ("offset", "slope", "amp", "freq", "phase")))
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidSpec(f"malformed {kind} piece: {exc}") from exc
    raise InvalidSpec(f"unknown piece kind {kind!r}")


# -------------------------------------------------------------------- spec --

class JoinKind(str, Enum):
    JUMP = "jump"
    KINK = "kink"
    SMOOTH = "smooth"


@dataclass(frozen=True)
class Join:
    kind: JoinKind
    size: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", JoinKind(self.kind))

    def to_dict(self):
        out = {"kind": self.kind.value}
        if self.kind is not JoinKind.SMOOTH:
            out["size"] = self.size
        return out


@dataclass(frozen=True)
class PieceSpec:
    breakpoints: tuple
    pieces: tuple
    joins: tuple

    def to_dict(self):
        return {
            "breakpoints": list(self.breakpoints),
            "pieces": [p.to_dict() for p in self.pieces],
            "joins": [j.to_dict() for j in self.joins],
        }

    @classmethod
    def from_dict(cls, d):
        try:
            breakpoints = tuple(float(b) for b in d["breakpoints"])
            pieces = tuple(piece_from_dict(p) for p in d["pieces"])
            joins = tuple(Join(j["kind"], j.get("size")) for j in d["joins"])
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidSpec(f"malformed spec: {exc}") from exc
        return cls(breakpoints, pieces, joins)

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class TruthEvent:
    kind: str  # "jump" | "kink" | "critical"
    location: float
    size: Optional[float] = None

    def to_dict(self):
        return {"kind": self.kind, "location": self.location, "size": self.size}


@dataclass(frozen=True)
class GroundTruth:
    events: tuple
    m1_true: float
    m2_true: float
    m0_true: float = 0.0

    def of_kind(self, kind):
        return [e for e in self.events if e.kind == kind]

    def to_dict(self):
        return {
            "events": [e.to_dict() for e in self.events],
            "m0_true": self.m0_true,
            "m1_true": self.m1_true,
            "m2_true": self.m2_true,
        }


class PiecewiseFunction:
    """Exact evaluator; at a breakpoint the right-hand piece is used."""

    def __init__(self, spec: PieceSpec):
        self.spec = spec
        self._inner = np.asarray(spec.breakpoints[1:-1], dtype=float)

    def _apply(self, x, method):
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self._inner, x, side="right")
        out = np.empty(x.shape, dtype=float)
        for k, piece in enumerate(self.spec.pieces):
            sel = idx == k
            if np.any(sel):
                out[sel] = getattr(piece, method)(x[sel])
        return out if out.ndim else float(out)

    def __call__(self, x):
        return self._apply(x, "value")

    def derivative(self, x):
        return self._apply(x, "d1")

    def second_derivative(self, x):
        return self._apply(x, "d2")


def _tolerance(*values):
    return 1e-12 * max([1.0] + [abs(float(v)) for v in values])


def build_signal(spec: PieceSpec):
    """Validate ``spec`` and return ``(evaluator, GroundTruth)``."""
    b = spec.breakpoints
    if len(b) < 2 or b[0] != 0.0 or b[-1] != 1.0:
        raise InvalidSpec("breakpoints must start at 0 and end at 1")
    if any(not (b[i] < b[i + 1]) for i in range(len(b) - 1)):
        raise InvalidSpec("breakpoints must be strictly increasing")
    if len(spec.pieces) != len(b) - 1:
        raise InvalidSpec(f"{len(b) - 1} segments need as many pieces, got {len(spec.pieces)}")
    if len(spec.joins) != len(b) - 2:
        raise InvalidSpec(f"{len(b) - 2} interior breakpoints need as many joins, got {len(spec.joins)}")

    events = []
    for i, join in enumerate(spec.joins):
        x = b[i + 1]
        left, right = spec.pieces[i], spec.pieces[i + 1]
        v_l, v_r = float(left.value(x)), float(right.value(x))
        d_l, d_r = float(left.d1(x)), float(right.d1(x))
        p, P = v_r - v_l, d_r - d_l
        if join.kind is JoinKind.JUMP:
            if join.size is None or abs(join.size - p) > _tolerance(v_l, v_r):
                raise InvalidSpec(f"jump at {x}: declared {join.size}, pieces give {p}")
            if abs(p) <= _tolerance(v_l, v_r):
                raise InvalidSpec(f"jump at {x} has zero size")
            events.append(TruthEvent("jump", x, float(join.size)))
        else:
            if abs(p) > _tolerance(v_l, v_r):
                raise InvalidSpec(f"{join.kind.value} join at {x} is not value-continuous ({p})")
            if join.kind is JoinKind.KINK:
                if join.size is None or abs(join.size - P) > _tolerance(d_l, d_r):
                    raise InvalidSpec(f"kink at {x}: declared {join.size}, pieces give {P}")
                if abs(P) <= _tolerance(d_l, d_r):
                    raise InvalidSpec(f"kink at {x} has zero derivative jump")
                events.append(TruthEvent("kink", x, float(join.size)))
            elif abs(P) > _tolerance(d_l, d_r):
                raise InvalidSpec(f"smooth join at {x} has a derivative jump ({P})")

    m0 = m1 = m2 = 0.0
    for k, piece in enumerate(spec.pieces):
        lo, hi = b[k], b[k + 1]
        for x in piece.critical_points(lo, hi):
            events.append(TruthEvent("critical", float(x)))
        m1 = max(m1, piece.sup_d1(lo, hi))
        m2 = max(m2, piece.sup_d2(lo, hi))
        m0 = max(m0, float(np.max(np.abs(piece.value(np.array([lo, hi]))))))
    events.sort(key=lambda e: e.location)
    return PiecewiseFunction(spec), GroundTruth(tuple(events), m1, m2, m0)


# ------------------------------------------------------------------- noise --

class NoiseModel(str, Enum):
    UNIFORM = "uniform"
    ADVERSARIAL = "adversarial"
    CHECKER = "checker"


def checker_sign(x, spacing, phase=0):
    """+1/-1 on the lattice k*spacing with pattern ++-- (period 4).

    Nodes two steps apart always get opposite signs, so every central
    difference on that lattice picks up the full 2*delta of noise.
    """
    k = np.rint(np.asarray(x, dtype=float) / spacing).astype(np.int64) + int(phase)
    return np.where((k // 2) % 2 == 0, 1.0, -1.0)


class NoisySource(SignalSource):
    """exact(x) + noise(x) with |noise| <= delta, deterministic in x."""

    def __init__(self, exact, delta, model, seed=0, direction=None, spacing=None):
        if not (delta >= 0 and math.isfinite(delta)):
            raise ValueError(f"delta must be finite and >= 0, got {delta!r}")
        self.exact = exact
        self.model = NoiseModel(model)
        self.seed = int(seed)
        self.direction = direction
        self.spacing = spacing
        self._delta = float(delta)
        if self.model is NoiseModel.ADVERSARIAL and direction is None:
            raise ValueError("adversarial noise needs a direction function")
        if self.model is NoiseModel.CHECKER and not (spacing and spacing > 0):
            raise ValueError("checker noise needs the grid spacing")

    @property
    def delta(self):
        return self._delta

    def noise(self, x):
        x = np.asarray(x, dtype=float)
        if self._delta == 0.0:
            return np.zeros(x.shape)
        if self.model is NoiseModel.UNIFORM:
            u = _kernels.hash_uniform(x.reshape(-1), self.seed).reshape(x.shape)
            return self._delta * (2.0 * u - 1.0)
        if self.model is NoiseModel.CHECKER:
            return self._delta * checker_sign(x, self.spacing)
        up = np.asarray(self.direction(x))
        return np.where(np.broadcast_to(up, x.shape) > 0, self._delta, -self._delta)

    def _eval(self, x):
        return np.asarray(self.exact(x), dtype=float) + self.noise(x)


def add_noise(
    evaluator: Callable,
    delta: float,
    model="uniform",
    seed: int = 0,
    direction: Optional[Callable] = None,
    spacing: Optional[float] = None,
) -> NoisySource:
    """Wrap an exact evaluator as a source with sup-norm noise <= delta.

    uniform: i.i.d.-looking values in [-delta, delta) hashed from (seed, x).
    adversarial: +delta where ``direction(x) > 0``, else -delta.
    checker: +-delta in the ++-- pattern on the lattice ``spacing``.
    """
    return NoisySource(evaluator, delta, model, seed, direction, spacing)


# ------------------------------------------------------------------ corpus --

@dataclass(frozen=True)
class CorpusConstraints:
    """Bounds every generated signal obeys, and the detection setting they
    are meant for.  ``None`` fields take defaults derived from the step h of
    the smooth class (m1, m2) at noise ``delta``."""

    delta: float = 1e-4
    m1: float = 3.0
    m2: float = 4.0
    kappa: float = 4.0
    min_separation: Optional[float] = None
    p_min: Optional[float] = None
    kink_min: Optional[float] = None
    margin: float = 0.05
    max_jumps: int = 3
    max_kinks: int = 2
    max_critical: int = 2

    def resolved(self):
        from .detector import Thresholds  # avoid an import cycle

        policy = make_step_policy(SmoothnessClass.smooth(self.m1, self.m2), self.delta)
        th = Thresholds.from_policy(policy, self.kappa)
        sep = self.min_separation
        if sep is None:
            sep = max(4.0 * policy.h, 0.08)
        p_min = self.p_min if self.p_min is not None else 1.05 * th.p_min
        kink_min = self.kink_min if self.kink_min is not None else 10.0 * policy.epsilon
        return {
            "h": policy.h,
            "epsilon": policy.epsilon,
            "min_separation": float(sep),
            "p_min": float(p_min),
            "p_max": float(max(1.5, 3.0 * p_min)),
            "kink_min": float(kink_min),
        }

    def to_dict(self):
        out = {
            "delta": self.delta,
            "m1": self.m1,
            "m2": self.m2,
            "kappa": self.kappa,
            "margin": self.margin,
            "max_jumps": self.max_jumps,
            "max_kinks": self.max_kinks,
            "max_critical": self.max_critical,
        }
        out.update(self.resolved())
        return out


def _place(rng, count, sep, margin):
    if count == 0:
        return []
    free = (1.0 - 2.0 * margin) - (count - 1) * sep
    u = np.sort(rng.uniform(0.0, free, count))
    return [margin + float(u[i]) + i * sep for i in range(count)]


def _regular_piece(rng, lo, hi, m1, m2):
    """A piece whose derivative keeps one sign with |f'| >= |s|/2."""
    s = float(rng.choice([-1.0, 1.0]) * rng.uniform(0.3, min(1.6, m1 / 1.75)))
    w = 0.5 * (hi - lo)
    mid = 0.5 * (lo + hi)
    kind = rng.choice(["affine", "poly", "sine"])
    if kind == "affine":
        return Affine(s, 0.0)
    if kind == "poly":
        budget = 0.5 * abs(s)
        beta = rng.uniform(-1, 1) * min(budget / (2 * w), m2 / 2)
        gamma = rng.uniform(-1, 1) * min(budget / (2 * w * w), m2 / (4 * w))
        # f'(x) = s + beta (x - mid) + gamma (x - mid)^2, expanded in x
        d1 = Polynomial([s, beta, gamma])(Polynomial([-mid, 1.0]))
        return Poly(tuple(d1.integ().coef))
    freq = float(rng.integers(1, 4))
    omega = TWO_PI * freq
    amp = float(rng.uniform(0.3, 1.0) * min(0.25 * abs(s) / omega, m2 / omega ** 2))
    return Sine(0.0, s, amp, freq, float(rng.uniform(0, TWO_PI)))


def _critical_piece(beta, xi):
    # f'(x) = beta (x - xi)
    return Poly((0.0, -beta * xi, 0.5 * beta))


def _attempt(rng, cons, res):
    sep, margin = res["min_separation"], cons.margin
    kinds = (
        ["jump"] * int(rng.integers(0, cons.max_jumps + 1))
        + ["kink"] * int(rng.integers(0, cons.max_kinks + 1))
        + ["critical"] * int(rng.integers(0, cons.max_critical + 1))
    )
    rng.shuffle(kinds)
    locs = _place(rng, len(kinds), sep, margin)
    planned = list(zip(kinds, locs))

    # breakpoints: jumps, kinks, and a smooth join between two critical
    # points that would otherwise share a piece
    cuts = [(0.0, None)]
    last_crit = None
    for kind, x in planned:
        if kind == "critical":
            if last_crit is not None:
                cuts.append((0.5 * (last_crit + x), JoinKind.SMOOTH))
            last_crit = x
        else:
            cuts.append((x, JoinKind(kind)))
            last_crit = None
    cuts.append((1.0, None))
    crit = [x for kind, x in planned if kind == "critical"]

    pieces, joins = [], []
    prev = None
    prev_beta = None
    for k in range(len(cuts) - 1):
        lo, hi = cuts[k][0], cuts[k + 1][0]
        join = cuts[k][1]
        inside = [x for x in crit if lo < x < hi]
        for _ in range(30):
            if inside:
                xi = inside[0]
                reach = max(xi - lo, hi - xi)
                if join is JoinKind.SMOOTH:
                    beta = -prev_beta
                    if abs(beta) * reach > cons.m1:
                        return None
                else:
                    top = min(cons.m2, cons.m1 / reach)
                    if top < cons.m2 / 2:
                        return None
                    beta = float(rng.choice([-1.0, 1.0]) * rng.uniform(cons.m2 / 2, top))
                piece = _critical_piece(beta, xi)
            else:
                beta = None
                piece = _regular_piece(rng, lo, hi, cons.m1, cons.m2)
            if join is JoinKind.KINK:
                if abs(float(piece.d1(lo)) - float(prev.d1(lo))) < res["kink_min"]:
                    continue
            break
        else:
            return None

        if prev is None:
            target = float(rng.uniform(-0.5, 0.5))
        else:
            target = float(prev.value(lo))
            if join is JoinKind.JUMP:
                target += float(rng.choice([-1.0, 1.0]) * rng.uniform(res["p_min"], res["p_max"]))
        piece = piece.shifted(target - float(piece.value(lo)))
        if prev is not None:
            if join is JoinKind.JUMP:
                size = float(piece.value(lo)) - float(prev.value(lo))
            elif join is JoinKind.KINK:
                size = float(piece.d1(lo)) - float(prev.d1(lo))
            else:
                size = None
            joins.append(Join(join, size))
        pieces.append(piece)
        prev, prev_beta = piece, beta

    spec = PieceSpec(tuple(c[0] for c in cuts), tuple(pieces), tuple(joins))
    _, truth = build_signal(spec)
    if truth.m1_true > cons.m1 or truth.m2_true > cons.m2:
        return None
    if [e.kind for e in truth.events] != [kind for kind, _ in planned]:
        return None
    if any(abs(e.location - x) > 1e-9 for e, (_, x) in zip(truth.events, planned)):
        return None
    jump_ok = all(abs(e.size) >= res["p_min"] * (1 - 1e-12) for e in truth.of_kind("jump"))
    kink_ok = all(abs(e.size) >= res["kink_min"] for e in truth.of_kind("kink"))
    if not (jump_ok and kink_ok):
        return None
    return spec, truth


def random_corpus(n: int, seed: int, constraints: Optional[CorpusConstraints] = None):
    """``n`` reproducible ``(spec, GroundTruth)`` pairs.

    Each signal has 0-3 jumps, 0-2 kinks and 0-2 critical points, pairwise
    at least ``min_separation`` apart and ``margin`` away from 0 and 1, with
    |f'| <= m1 and |f''| <= m2 off the breakpoints.
    """
    cons = constraints or CorpusConstraints()
    res = cons.resolved()
    sep = res["min_separation"]
    if sep < 4.0 * res["h"] * (1 - 1e-12):
        raise ConstraintsInfeasible(f"separation {sep} is below 4h = {4 * res['h']}")
    most = cons.max_jumps + cons.max_kinks + cons.max_critical
    if sep > 1.0 or (most > 1 and (most - 1) * sep > 1.0 - 2.0 * cons.margin):
        raise ConstraintsInfeasible(
            f"{most} events at separation {sep} do not fit in [{cons.margin}, {1 - cons.margin}]"
        )
    if res["p_min"] > res["p_max"]:
        raise ConstraintsInfeasible("p_min exceeds the largest jump the generator draws")
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        for _ in range(500):
            got = _attempt(rng, cons, res)
            if got is not None:
                out.append(got)
                break
        else:
            raise ConstraintsInfeasible("could not satisfy the constraints after 500 draws")
    return out


def corpus_to_dict(corpus, constraints: CorpusConstraints, seed=None):
    return {
        "format": "jumpscope-corpus",
        "version": 1,
        "seed": seed,
        "constraints": constraints.to_dict(),
        "signals": [{"spec": s.to_dict(), "truth": t.to_dict()} for s, t in corpus],
    }


def corpus_from_dict(d):
    """Specs and their constraint block; ground truth is rebuilt, not trusted."""
    if d.get("format") != "jumpscope-corpus":
        raise InvalidSpec("not a corpus document")
    specs = [PieceSpec.from_dict(item["spec"]) for item in d.get("signals", [])]
    return [(s, build_signal(s)[1]) for s in specs], d.get("constraints", {})
