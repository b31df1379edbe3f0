"""Domain types shared by every stage: sources, smoothness classes, step
policies, detection grids, events and reports.

Everything here is immutable after construction.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np

from .errors import DomainTooSmall, InvalidClass, OutOfDomain

# query points may overshoot [0, 1] by this much from lattice arithmetic
DOMAIN_TOL = 1e-9


class Variant(str, Enum):
    SMOOTH = "smooth"
    FRACTIONAL = "fractional"
    LINEAR = "linear"


class EventKind(str, Enum):
    JUMP = "jump"
    KINK = "kink"
    CRITICAL = "critical"


# ----------------------------------------------------------------- sources --

class SignalSource(ABC):
    """Point-queryable noisy data ``f_delta`` on [0, 1].

    ``eval`` accepts a scalar or an array and is deterministic: the same
    abscissa always returns the same value.  ``resolution`` is the spacing of
    the underlying sample table, or 0 for sources that can be queried
    anywhere.
    """

    resolution = 0.0

    @property
    @abstractmethod
    def delta(self) -> float:
        ...

    @abstractmethod
    def _eval(self, x: np.ndarray) -> np.ndarray:
        ...

    def eval(self, x):
        arr = np.asarray(x, dtype=np.float64)
        if arr.size and (arr.min() < -DOMAIN_TOL or arr.max() > 1.0 + DOMAIN_TOL):
            bad = arr[(arr < -DOMAIN_TOL) | (arr > 1.0 + DOMAIN_TOL)].flat[0]
            raise OutOfDomain(f"query point {bad!r} lies outside [0, 1]")
        arr = np.clip(arr, 0.0, 1.0)
        out = np.asarray(self._eval(np.atleast_1d(arr)), dtype=np.float64)
        if arr.ndim == 0:
            return float(out.reshape(-1)[0])
        return out.reshape(arr.shape)

    __call__ = eval


class FunctionSource(SignalSource):
    """Wraps a callable that already returns noisy values.

    ``func`` is called with a float64 array and should return an array of
    the same shape (a scalar result is broadcast).
    """

    def __init__(self, func: Callable, delta: float):
        if not (delta >= 0.0 and math.isfinite(delta)):
            raise ValueError(f"delta must be finite and >= 0, got {delta!r}")
        self._func = func
        self._delta = float(delta)

    @property
    def delta(self):
        return self._delta

    def _eval(self, x):
        return np.broadcast_to(np.asarray(self._func(x), dtype=np.float64), x.shape)


class SampledGridSource(SignalSource):
    """A uniform sample table ``v_k = f_delta(k / K)``, k = 0..K.

    Queries snap to the nearest node.  On a smooth piece that moves the value
    by at most ``m1 * dx / 2``, so ``delta`` reports the inflated bound
    ``delta_raw + m1 * dx / 2``.
    """

    def __init__(self, values, delta_raw: float, m1: float):
        values = np.array(values, dtype=np.float64)
        if values.ndim != 1 or values.size < 2:
            raise ValueError("need at least two samples")
        if not np.all(np.isfinite(values)):
            raise ValueError("samples must be finite")
        if delta_raw < 0 or m1 < 0:
            raise ValueError("delta_raw and m1 must be non-negative")
        values.setflags(write=False)
        self.values = values
        self.delta_raw = float(delta_raw)
        self.m1 = float(m1)
        self.dx = 1.0 / (values.size - 1)
        self.resolution = self.dx

    @property
    def x(self):
        return np.arange(self.values.size) * self.dx

    @property
    def delta(self):
        return self.delta_raw + self.m1 * self.dx / 2.0

    def node_index(self, x):
        idx = np.rint(np.asarray(x, dtype=np.float64) / self.dx).astype(np.int64)
        return np.clip(idx, 0, self.values.size - 1)

    def snap(self, x):
        """Abscissa of the node nearest to ``x``."""
        out = self.node_index(x) * self.dx
        return float(out) if np.ndim(out) == 0 else out

    def _eval(self, x):
        return self.values[self.node_index(x)]


def effective_delta(src: SignalSource) -> float:
    """Noise bound every downstream formula must use for ``src``."""
    if isinstance(src, SampledGridSource):
        return src.delta_raw + src.m1 * src.dx / 2.0
    return src.delta


# ------------------------------------------------------ smoothness classes --

@dataclass(frozen=True)
class SmoothnessClass:
    """A priori bounds on the unknown function away from its breakpoints.

    Use the ``smooth``, ``fractional`` and ``linear`` constructors.  ``m0`` is
    carried for reporting only; no formula uses it.
    """

    variant: Variant
    m1: float
    m2: float = 0.0
    a: Optional[float] = None
    ma: Optional[float] = None
    m0: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        finite = lambda v: v is not None and math.isfinite(v)  # noqa: E731
        if not finite(self.m1) or self.m1 < 0:
            raise InvalidClass(f"m1 must be finite and >= 0, got {self.m1!r}")
        if self.m0 is not None and (not finite(self.m0) or self.m0 < 0):
            raise InvalidClass(f"m0 must be finite and >= 0, got {self.m0!r}")
        if self.variant is Variant.SMOOTH:
            if not finite(self.m2) or self.m2 <= 0:
                raise InvalidClass("smooth class needs m2 > 0")
        elif self.variant is Variant.LINEAR:
            if self.m2 != 0:
                raise InvalidClass("linear class needs m2 == 0")
            if self.m1 <= 0:
                raise InvalidClass("linear class needs m1 > 0")
        else:
            if not finite(self.a) or not (1.0 < self.a <= 2.0):
                raise InvalidClass(f"fractional order must lie in (1, 2], got {self.a!r}")
            if not finite(self.ma) or self.ma <= 0:
                raise InvalidClass("fractional class needs ma > 0")

    @classmethod
    def smooth(cls, m1, m2, m0=None):
        return cls(Variant.SMOOTH, m1=float(m1), m2=float(m2), m0=m0)

    @classmethod
    def fractional(cls, a, ma, m1, m0=None):
        return cls(Variant.FRACTIONAL, m1=float(m1), a=float(a), ma=float(ma), m0=m0)

    @classmethod
    def linear(cls, m1, m0=None):
        return cls(Variant.LINEAR, m1=float(m1), m2=0.0, m0=m0)

    def to_dict(self):
        out = {"variant": self.variant.value, "m1": self.m1}
        if self.variant is Variant.SMOOTH:
            out["m2"] = self.m2
        elif self.variant is Variant.FRACTIONAL:
            out["a"] = self.a
            out["ma"] = self.ma
        else:
            out["m2"] = 0.0
        if self.m0 is not None:
            out["m0"] = self.m0
        return out


@dataclass(frozen=True)
class StepPolicy:
    """Step size and error scale for one (class, delta) pair.

    ``h`` is the detection step.  For the linear class ``slope_h`` is the
    (longer) step used for the derivative table and ``epsilon`` is the noise
    term ``delta / slope_h``.  ``curvature_increment`` bounds
    ``|f'(x + h) - f'(x)|`` on a regular window.
    """

    variant: Variant
    delta: float
    h: float
    epsilon: float
    m1: float
    curvature_increment: float
    t: Optional[float] = None
    slope_h: Optional[float] = None

    @property
    def node_noise(self):
        """Largest noise contribution to one central difference, delta / h."""
        return self.delta / self.h

    @property
    def table_h(self):
        return self.slope_h if self.slope_h is not None else self.h


def _fractional_step(a, ma, delta):
    c_a = (2.0 / (ma * (a - 1.0))) ** (1.0 / a)
    return c_a * delta ** (1.0 / a)


def _fractional_bound(a, ma, delta):
    return a * ma ** (1.0 / a) * (2.0 / (a - 1.0)) ** ((a - 1.0) / a) * delta ** ((a - 1.0) / a)


def make_step_policy(cls: SmoothnessClass, delta: float, t: float = 10.0) -> StepPolicy:
    """Choose the step that balances noise against truncation for ``cls``.

    >>> p = make_step_policy(SmoothnessClass.smooth(m1=1, m2=4), 0.02)
    >>> round(p.h, 12), round(p.epsilon, 12)
    (0.1, 0.4)
    """
    if not isinstance(cls, SmoothnessClass):
        raise InvalidClass(f"expected SmoothnessClass, got {type(cls).__name__}")
    if not (delta > 0 and math.isfinite(delta)):
        raise ValueError(f"delta must be finite and > 0, got {delta!r}")
    if cls.variant is Variant.SMOOTH:
        h = math.sqrt(2.0 * delta / cls.m2)
        policy = StepPolicy(
            Variant.SMOOTH, delta, h, math.sqrt(2.0 * cls.m2 * delta), cls.m1,
            curvature_increment=cls.m2 * h,
        )
    elif cls.variant is Variant.FRACTIONAL:
        h = _fractional_step(cls.a, cls.ma, delta)
        policy = StepPolicy(
            Variant.FRACTIONAL, delta, h, _fractional_bound(cls.a, cls.ma, delta), cls.m1,
            curvature_increment=cls.ma * h ** (cls.a - 1.0),
        )
    else:
        if not (t > 0 and math.isfinite(t)):
            raise InvalidClass(f"slope confidence t must be > 0, got {t!r}")
        h = delta / (2.0 * cls.m1)
        slope_h = t * delta / cls.m1
        policy = StepPolicy(
            Variant.LINEAR, delta, h, delta / slope_h, cls.m1,
            curvature_increment=0.0, t=float(t), slope_h=slope_h,
        )
    for step in (policy.h, policy.slope_h):
        if step is not None and 2.0 * step >= 1.0:
            raise DomainTooSmall(
                f"step h={step:.6g} gives 2h >= 1; delta={delta:g} is too large "
                f"for the stated smoothness bounds"
            )
    return policy


# -------------------------------------------------------------------- grid --

@dataclass(frozen=True)
class DetectionGrid:
    """Nodes x_j = j h, j = 1..j_max, with j_max the largest j such that
    jh + h <= 1.  Node j owns the open interval (jh - h, jh + h)."""

    h: float
    j_max: int = field(init=False)

    def __post_init__(self):
        if not (self.h > 0 and math.isfinite(self.h)):
            raise ValueError(f"step must be finite and > 0, got {self.h!r}")
        if 2.0 * self.h >= 1.0:
            raise DomainTooSmall(f"step h={self.h:.6g} gives 2h >= 1")
        j_max = int(math.floor(1.0 / self.h + DOMAIN_TOL)) - 1
        while j_max > 1 and (j_max + 1) * self.h > 1.0 + DOMAIN_TOL:
            j_max -= 1
        object.__setattr__(self, "j_max", j_max)

    @property
    def nodes(self):
        return np.arange(1, self.j_max + 1)

    @property
    def x(self):
        return self.nodes * self.h

    @property
    def lattice(self):
        """Abscissas k h, k = 0..j_max + 1, every point a central difference touches."""
        return np.clip(np.arange(self.j_max + 2) * self.h, 0.0, 1.0)

    def interval(self, j):
        return (j - 1) * self.h, (j + 1) * self.h

    def __len__(self):
        return self.j_max


# ------------------------------------------------------------------ events --

@dataclass(frozen=True)
class Event:
    kind: EventKind
    interval: tuple
    size: Optional[float] = None
    size_error_bound: Optional[float] = None
    diagnostics: dict = field(default_factory=dict, compare=False)

    @property
    def location(self):
        lo, hi = self.interval
        return 0.5 * (lo + hi)

    @property
    def width(self):
        return self.interval[1] - self.interval[0]

    def contains(self, x):
        lo, hi = self.interval
        return lo <= x <= hi


@dataclass(frozen=True)
class MaskedNode:
    j: int
    x: float
    reason: str


@dataclass(frozen=True)
class DetectionReport:
    """Outcome of one detection run.

    ``derivative`` holds (x, f_j) for the nodes whose window is free of every
    detected jump and kink; the remaining nodes are listed in ``masked``.
    ``table`` keeps the unmasked-and-masked derivative table for diagnostics.
    """

    derivative: list
    events: list
    params: dict
    masked: list
    table: object = field(repr=False, compare=False, default=None)
    warnings: list = field(default_factory=list)

    @property
    def jumps(self):
        return [e for e in self.events if e.kind is EventKind.JUMP]

    @property
    def kinks(self):
        return [e for e in self.events if e.kind is EventKind.KINK]

    @property
    def critical_points(self):
        return [e for e in self.events if e.kind is EventKind.CRITICAL]

    @property
    def jump_count(self):
        return len(self.jumps)
