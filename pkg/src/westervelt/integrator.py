"""Split-step time integration.

The conservative dynamics split into two exactly solvable flows, one moving
the density with the momentum and one moving the velocity with the pressure
gradient. The dissipative relaxation of the density is integrated with
forward Euler or the explicit midpoint rule, and the pieces are composed by
Lie-Trotter or Strang splitting. External sources are bundled with the
conservative flows; every stage integrates its source over its own substep
interval.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .derham import DeRhamComplex, reduce_1form
from .mesh import TensorGrid
from .model import (
    SolverState,
    SoundSpeedWeights,
    WesterveltParams,
    build_sound_speed_weights,
    kinetic_op,
    p_of_rho,
)

SCHEMES = ("strang", "lie-trotter")


@dataclass(frozen=True)
class ForcingSpec:
    """External sources ``S_p(x.., t)`` and ``S_v(x.., t)``.

    ``*_integral(x.., t0, t1)`` give the exact time integral over a substep; if
    absent, the midpoint rule ``(t1 - t0) S(x.., (t0 + t1) / 2)`` is used.
    ``source_v`` and its integral return one array per velocity component.
    """

    source_p: Optional[Callable] = None
    source_p_integral: Optional[Callable] = None
    source_v: Optional[Callable] = None
    source_v_integral: Optional[Callable] = None

    @property
    def has_p(self) -> bool:
        return self.source_p is not None or self.source_p_integral is not None

    @property
    def has_v(self) -> bool:
        return self.source_v is not None or self.source_v_integral is not None


NO_FORCING = ForcingSpec()


@dataclass(frozen=True)
class StepPlan:
    dt: float
    t_end: float
    scheme: str = "strang"
    cfl_safety: float = 0.9
    # reference-formula runs sit on the bound; they pin dt and skip the check
    enforce_bound: bool = False

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt!r}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if not 0 < self.cfl_safety <= 1:
            raise ValueError(f"cfl_safety must lie in (0, 1], got {self.cfl_safety!r}")

    @property
    def n_steps(self) -> int:
        return max(0, math.ceil(self.t_end / self.dt - 1e-9))


def laplacian_norm_bound(grid: TensorGrid) -> float:
    """Gershgorin bound ``4 sum 1/dx_a^2`` on ``||H0^-1 G^T H1 G||``."""
    return 4.0 * sum(1.0 / dx ** 2 for dx in grid.spacings)


def stability_bounds(grid: TensorGrid, params: WesterveltParams, weights: Optional[SoundSpeedWeights] = None) -> dict:
    norm = laplacian_norm_bound(grid)
    if weights is None:
        weights = build_sound_speed_weights(grid, params)
    c2 = weights.max
    cons = 1.0 / math.sqrt(c2 * norm)
    diss = 1.0 / (params.b * norm) if params.b > 0 else math.inf
    return {
        "laplacian_norm_bound": norm,
        "sound_speed_sq_max": c2,
        "conservative": cons,
        "dissipative": diss,
        "binding": "dissipative" if diss < cons else "conservative",
        "bound": min(cons, diss),
    }


def stable_dt(grid: TensorGrid, params: WesterveltParams, cfl_safety: float = 0.9, weights=None) -> float:
    return cfl_safety * stability_bounds(grid, params, weights)["bound"]


class SplitStepper:
    """Partial flows and their compositions for one discretised problem.

    ``nonlinear_solves`` counts constitutive solves performed so far.
    """

    def __init__(
        self,
        cplx: DeRhamComplex,
        params: WesterveltParams,
        forcing: ForcingSpec = NO_FORCING,
        weights: Optional[SoundSpeedWeights] = None,
    ):
        self.cplx = cplx
        self.params = params
        self.forcing = forcing or NO_FORCING
        self.grid = cplx.grid
        self.weights = weights if weights is not None else build_sound_speed_weights(self.grid, params)
        self.hd = self.grid.cell_volume
        self._G = cplx.G
        self._K = kinetic_op(cplx, self.weights)
        self._L = cplx.stiffness()
        self._h0 = cplx.H0.diagonal
        self._coords = self.grid.node_coords()
        self.nonlinear_solves = 0

    def solve(self, rho) -> np.ndarray:
        self.nonlinear_solves += 1
        return p_of_rho(rho, self.params, self.hd)

    # -- sources ---------------------------------------------------------------

    def _source_p(self, t0, t1):
        f = self.forcing
        if f.source_p_integral is not None:
            s = f.source_p_integral(*self._coords, t0, t1)
        else:
            s = (t1 - t0) * np.asarray(f.source_p(*self._coords, 0.5 * (t0 + t1)))
        return self._h0 * s

    def _source_v(self, t0, t1):
        f = self.forcing
        if f.source_v_integral is not None:
            return reduce_1form(self.grid, lambda *x: f.source_v_integral(*x, t0, t1))
        tm = 0.5 * (t0 + t1)
        return (t1 - t0) * reduce_1form(self.grid, lambda *x: f.source_v(*x, tm))

    # -- partial flows ---------------------------------------------------------

    def phi_rho(self, state: SolverState, dt: float, t0: Optional[float] = None) -> SolverState:
        """Density advance by ``dt G^T (c^2 H1) v`` plus the sources; re-solves ``p``."""
        t0 = state.t if t0 is None else t0
        rho = state.rho + dt * self._G.apply_transpose(self._K.apply(state.v))
        if self.forcing.has_p and dt != 0.0:
            rho = rho + self._source_p(t0, t0 + dt)
        return SolverState(state.t, rho, self.solve(rho), state.v)

    def phi_v(self, state: SolverState, dt: float, t0: Optional[float] = None) -> SolverState:
        t0 = state.t if t0 is None else t0
        v = state.v - dt * self._G.apply(state.p)
        if self.forcing.has_v and dt != 0.0:
            v = v + self._source_v(t0, t0 + dt)
        return SolverState(state.t, state.rho, state.p, v)

    def phi_cons_lie(self, state, dt, t0=None):
        t0 = state.t if t0 is None else t0
        return self.phi_v(self.phi_rho(state, dt, t0), dt, t0)

    def phi_cons_strang(self, state, dt, t0=None):
        """``phi_v(dt/2) o phi_rho(dt) o phi_v(dt/2)``; one constitutive solve."""
        t0 = state.t if t0 is None else t0
        s = self.phi_v(state, 0.5 * dt, t0)
        s = self.phi_rho(s, dt, t0)
        return self.phi_v(s, 0.5 * dt, t0 + 0.5 * dt)

    def phi_diss(self, state: SolverState, dt: float, order: int = 2) -> SolverState:
        b = self.params.b
        if b == 0.0 or dt == 0.0:
            return state
        L = self._L.apply
        if order == 1:
            rho = state.rho - b * dt * L(state.p)
        elif order == 2:
            p_half = self.solve(state.rho - 0.5 * b * dt * L(state.p))
            rho = state.rho - b * dt * L(p_half)
        else:
            raise ValueError(f"dissipative order must be 1 or 2, got {order!r}")
        return SolverState(state.t, rho, self.solve(rho), state.v)

    # -- full steps ------------------------------------------------------------

    def step_strang(self, state: SolverState, dt: float) -> SolverState:
        t = state.t
        q = 0.25 * dt
        s = self.phi_v(state, q, t)
        s = self.phi_rho(s, 0.5 * dt, t)
        s = self.phi_v(s, q, t + q)
        s = self.phi_diss(s, dt, order=2)
        s = self.phi_v(s, q, t + 2 * q)
        s = self.phi_rho(s, 0.5 * dt, t + 0.5 * dt)
        s = self.phi_v(s, q, t + 3 * q)
        return s.replace(t=t + dt)

    def step_lie_trotter(self, state: SolverState, dt: float) -> SolverState:
        s = self.phi_cons_lie(state, dt, state.t)
        s = self.phi_diss(s, dt, order=1)
        return s.replace(t=state.t + dt)

    def step(self, state, dt, scheme="strang"):
        if scheme == "strang":
            return self.step_strang(state, dt)
        if scheme == "lie-trotter":
            return self.step_lie_trotter(state, dt)
        raise ValueError(f"unknown scheme {scheme!r}")

    def run(self, state: SolverState, plan: StepPlan, on_step: Optional[Callable] = None) -> SolverState:
        """Advance to ``plan.t_end``; the final step is shortened to land on it.

        ``on_step(step_index, state)`` is called after every step.
        """
        if plan.enforce_bound:
            limit = stable_dt(self.grid, self.params, plan.cfl_safety, self.weights)
            if plan.dt > limit:
                raise ValueError(f"dt={plan.dt:g} exceeds the stable limit {limit:g}")
        t0 = state.t
        n_steps = plan.n_steps
        for n in range(n_steps):
            if n == n_steps - 1:
                t_target = t0 + plan.t_end
                h = t_target - state.t
            else:
                t_target = t0 + (n + 1) * plan.dt
                h = plan.dt
            state = self.step(state, h, plan.scheme).replace(t=t_target)
            if not np.all(np.isfinite(state.p)):
                raise FloatingPointError(f"non-finite pressure after step {n + 1}")
            if on_step is not None:
                on_step(n + 1, state)
        return state
