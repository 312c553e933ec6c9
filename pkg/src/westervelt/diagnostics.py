"""Energy, dissipation and vorticity time series; space-time error norms."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .derham import DeRhamComplex
from .mesh import GridError, TensorGrid
from .model import SolverState, WesterveltParams, dissipation_rate, hamiltonian

COLUMNS = ("H", "diss_rate", "diss_integral", "vorticity_drift", "nonlinear_solves")
_EPS_FLOOR = 1e-300


def vorticity(v, cplx: DeRhamComplex) -> np.ndarray:
    if cplx.C is None:
        raise GridError("vorticity needs a 2D or 3D grid")
    return cplx.C.apply(v)


@dataclass
class TimeSeries:
    times: list = field(default_factory=list)
    columns: dict = field(default_factory=lambda: {c: [] for c in COLUMNS})

    def __len__(self):
        return len(self.times)

    def append(self, t, **values):
        if self.times and not t > self.times[-1]:
            raise ValueError(f"times must increase strictly ({t!r} after {self.times[-1]!r})")
        self.times.append(float(t))
        for name in self.columns:
            self.columns[name].append(values[name])

    def column(self, name) -> np.ndarray:
        return np.asarray(self.columns[name], dtype=np.float64)

    def rows(self):
        for i, t in enumerate(self.times):
            yield (t, *(self.columns[c][i] for c in COLUMNS))


class Recorder:
    """Appends one row per call: energy, rate, its running integral, vorticity drift."""

    def __init__(self, cplx: DeRhamComplex, params: WesterveltParams, weights=None):
        self.cplx = cplx
        self.params = params
        self.weights = weights
        self.series = TimeSeries()
        self._omega0 = None
        self._omega0_norm = None

    def record(self, state: SolverState, nonlinear_solves: int = 0) -> TimeSeries:
        return record_step(state, self.params, self.cplx, self.series, self.weights, nonlinear_solves, self)

    def _drift(self, v):
        if self.cplx.C is None:
            return 0.0
        w = vorticity(v, self.cplx)
        if self._omega0 is None:
            self._omega0 = w
            self._omega0_norm = max(float(np.max(np.abs(w))), _EPS_FLOOR)
            return 0.0
        return float(np.max(np.abs(w - self._omega0))) / self._omega0_norm


def record_step(state, params, cplx, series: TimeSeries, weights=None, nonlinear_solves=0, recorder=None):
    """Append ``state`` to ``series``; the dissipation integral uses the trapezoidal rule."""
    rate = dissipation_rate(state.p, params, cplx)
    if len(series):
        t_prev = series.times[-1]
        integral = series.columns["diss_integral"][-1] + 0.5 * (state.t - t_prev) * (
            series.columns["diss_rate"][-1] + rate
        )
    else:
        integral = 0.0
    if recorder is not None:
        drift = recorder._drift(state.v)
    else:
        drift = 0.0
    series.append(
        state.t,
        H=hamiltonian(state, params, cplx, weights),
        diss_rate=rate,
        diss_integral=integral,
        vorticity_drift=drift,
        nonlinear_solves=int(nonlinear_solves),
    )
    return series


@dataclass(frozen=True)
class ErrorReport:
    rel_l2: float
    rel_linf: float


class SpaceTimeError:
    """Running relative L2 and Linf norms of ``numeric - exact`` over space and time.

    Time integration is trapezoidal over the recorded samples; space uses the
    cell volume as weight.
    """

    def __init__(self, cell_volume: float):
        self.hd = cell_volume
        self._t = None
        self._e2 = self._x2 = 0.0
        self.err_sq = 0.0
        self.ref_sq = 0.0
        self.err_max = 0.0
        self.ref_max = 0.0
        self.samples = 0

    def add(self, t, numeric, exact):
        numeric = np.asarray(numeric, dtype=np.float64)
        exact = np.asarray(exact, dtype=np.float64)
        e = numeric - exact
        e2 = float(e @ e) * self.hd
        x2 = float(exact @ exact) * self.hd
        if self._t is not None:
            h = t - self._t
            self.err_sq += 0.5 * h * (self._e2 + e2)
            self.ref_sq += 0.5 * h * (self._x2 + x2)
        self._t, self._e2, self._x2 = t, e2, x2
        self.err_max = max(self.err_max, float(np.max(np.abs(e))))
        self.ref_max = max(self.ref_max, float(np.max(np.abs(exact))))
        self.samples += 1

    def report(self) -> ErrorReport:
        if self.samples == 0:
            raise ValueError("no snapshots recorded")
        if self.samples == 1:
            # a single time level: fall back to the spatial norm
            l2 = math.sqrt(self._e2 / self._x2) if self._x2 > 0 else math.inf
        else:
            l2 = math.sqrt(self.err_sq / self.ref_sq) if self.ref_sq > 0 else math.inf
        linf = self.err_max / self.ref_max if self.ref_max > 0 else math.inf
        if self.err_max == 0.0:
            l2 = linf = 0.0
        return ErrorReport(l2, linf)


def spacetime_error(snapshots: Sequence, exact: Callable, grid: TensorGrid, dt: float, t0: float = 0.0) -> ErrorReport:
    """Errors of pressure snapshots taken at ``t0 + n dt`` against ``exact(*coords, t)``."""
    if len(snapshots) == 0:
        raise ValueError("no snapshots given")
    coords = grid.node_coords()
    acc = SpaceTimeError(grid.cell_volume)
    for n, p in enumerate(snapshots):
        t = t0 + n * dt
        acc.add(t, p, np.broadcast_to(exact(*coords, t), (grid.n_nodes,)))
    return acc.report()


def convergence_orders(errors: Sequence[float], ratio: float = 2.0) -> list[float]:
    """Observed orders ``log(e_j / e_{j+1}) / log(ratio)`` for successive refinements."""
    errors = [float(e) for e in errors]
    if len(errors) < 2:
        raise ValueError("need at least two resolutions")
    if any(not e > 0 for e in errors):
        raise ValueError(f"errors must be positive, got {errors}")
    return [math.log(a / b) / math.log(ratio) for a, b in zip(errors, errors[1:])]
