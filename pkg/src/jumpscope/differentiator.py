"""Stable derivative estimates by a central difference with a noise-aware step."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .errors import OutOfDomain
from .model import DOMAIN_TOL, DetectionGrid, SignalSource, StepPolicy


@dataclass(frozen=True)
class DerivativeEstimate:
    x: float
    value: float
    bound: float


@dataclass(frozen=True, eq=False)
class DerivativeTable:
    """Central differences f_j at every node of a grid, in node order.

    Iterating yields ``DerivativeEstimate`` rows.  ``lattice_values`` are the
    source values at k h, k = 0..j_max + 1, which every later stage reuses.
    """

    grid: DetectionGrid
    values: np.ndarray
    lattice_values: np.ndarray
    bound: float

    @property
    def h(self):
        return self.grid.h

    @property
    def nodes(self):
        return self.grid.nodes

    @property
    def x(self):
        return self.grid.x

    def value_at(self, j):
        return float(self.values[j - 1])

    def __len__(self):
        return self.values.size

    def __getitem__(self, i):
        return DerivativeEstimate(float(self.x[i]), float(self.values[i]), self.bound)

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]


def central_difference(src: SignalSource, x: float, h: float) -> float:
    """[f_delta(x + h) - f_delta(x - h)] / (2h)."""
    if not h > 0:
        raise ValueError(f"step must be > 0, got {h!r}")
    if x - h < -DOMAIN_TOL or x + h > 1.0 + DOMAIN_TOL:
        raise OutOfDomain(f"x={x!r} with h={h!r} leaves [0, 1]")
    right, left = src.eval(np.array([min(x + h, 1.0), max(x - h, 0.0)]))
    return (right - left) / (2.0 * h)


def error_bound(policy: StepPolicy) -> float:
    """Guaranteed sup-error of the table values on regular windows.

    Smooth: sqrt(2 M2 delta).  Fractional: the Hoelder-class formula
    a M_a^(1/a) (2/(a-1))^((a-1)/a) delta^((a-1)/a).  Linear: the noise term
    delta / h at the slope step, since the truncation term vanishes.
    """
    return policy.epsilon


def derivative_table(
    src: SignalSource, grid: DetectionGrid, policy: Optional[StepPolicy] = None
) -> DerivativeTable:
    """Evaluate f_j for j = 1..j_max.

    No masking happens here; values next to discontinuities blow up and the
    detector relies on that.  ``bound`` is ``error_bound(policy)`` when a
    policy is given, NaN otherwise.
    """
    lattice_values = np.asarray(src.eval(grid.lattice), dtype=np.float64)
    values = _kernels.central_diff(lattice_values, grid.h)
    bound = float("nan") if policy is None else error_bound(policy)
    lattice_values.setflags(write=False)
    values.setflags(write=False)
    return DerivativeTable(grid, values, lattice_values, bound)
