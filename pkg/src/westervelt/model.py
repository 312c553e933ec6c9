"""Westervelt model on the discrete complex.

State is ``(rho, v)`` with the pressure ``p`` carried alongside; ``rho`` is the
dual top-form density and ``p`` the primal nodal pressure, linked by the
collocated constitutive relation ``rho = h^d (1 - k p) p``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from . import kernels
from .derham import DeRhamComplex, LinearOp
from .mesh import TensorGrid


class DiscriminantNegative(ArithmeticError):
    """The density left the invertible branch of the constitutive map."""

    def __init__(self, index: int, value: float):
        self.index = int(index)
        self.value = float(value)
        super().__init__(
            f"1 - 4 k rho / h^d = {self.value:.6g} < 0 at coefficient {self.index}"
        )

    def __reduce__(self):
        return (DiscriminantNegative, (self.index, self.value))


class BranchError(ValueError):
    """Pressure outside the invertible branch ``k p < 1/2`` of the constitutive map."""


@dataclass(frozen=True)
class WesterveltParams:
    k: float = 0.0
    b: float = 0.0
    # None means unit sound speed; otherwise c_S^2(*coords)
    sound_speed_sq: Optional[Callable] = None

    def __post_init__(self):
        if self.k < 0 or self.b < 0:
            raise ValueError(f"k and b must be nonnegative (k={self.k}, b={self.b})")


@dataclass(frozen=True)
class SolverState:
    t: float
    rho: np.ndarray
    p: np.ndarray
    v: np.ndarray

    def replace(self, **kw) -> "SolverState":
        return replace(self, **kw)

    def copy(self) -> "SolverState":
        return SolverState(self.t, self.rho.copy(), self.p.copy(), self.v.copy())


def rho_of_p(p, params: WesterveltParams, cell_volume: float) -> np.ndarray:
    return kernels.density_from_pressure(p, params.k, cell_volume)


def p_of_rho(rho, params: WesterveltParams, cell_volume: float) -> np.ndarray:
    """Negative (physical) branch of the inverse constitutive map.

    Evaluated as ``2 q / (1 + sqrt(1 - 4 k q))`` with ``q = rho / h^d``, which
    equals ``(1 - sqrt(1 - 4 k q)) / (2 k)`` without the cancellation at small
    ``k q`` and reduces to ``q`` at ``k = 0``.
    """
    p, bad = kernels.pressure_from_density(rho, params.k, cell_volume)
    if bad >= 0:
        q = float(np.asarray(rho).reshape(-1)[bad]) / cell_volume
        raise DiscriminantNegative(bad, 1.0 - 4.0 * params.k * q)
    return p


def make_state(t, p, v, params, cell_volume) -> SolverState:
    """Consistent state from pressure and velocity coefficients."""
    p = np.array(p, dtype=np.float64).reshape(-1)
    if params.k > 0 and np.any(params.k * p >= 0.5):
        i = int(np.argmax(params.k * p))
        raise BranchError(f"k p = {params.k * p[i]:.6g} >= 1/2 at node {i}; the density cannot be inverted there")
    return SolverState(float(t), rho_of_p(p, params, cell_volume), p, np.array(v, dtype=np.float64).reshape(-1))


@dataclass(frozen=True)
class SoundSpeedWeights:
    """Per-edge weights multiplying ``H1``; one block per velocity component."""

    values: np.ndarray

    @property
    def max(self) -> float:
        return float(np.max(self.values))

    @property
    def is_uniform(self) -> bool:
        return bool(np.all(self.values == self.values.flat[0]))


def _sample_points(grid: TensorGrid, component: int):
    # component a is sampled at the primal coordinate along a and at dual
    # (half-shifted) coordinates along every other axis
    return grid.node_coords([b != component for b in range(grid.dim)])


def build_sound_speed_weights(grid: TensorGrid, params: WesterveltParams, integrated=False) -> SoundSpeedWeights:
    """Sample ``c_S^2`` for the kinetic-energy weighting.

    The x-block is taken at ``(x_i, y_{j+1/2})`` and the y-block at
    ``(x_{i+1/2}, y_j)``. With ``integrated=True`` the x-block is instead the
    average of ``c_S^2(., y_{j+1/2})`` over ``[x_{i-1/2}, x_{i+1/2}]`` (and
    likewise for y), using 8-point Gauss quadrature.
    """
    n = grid.n_nodes
    if params.sound_speed_sq is None:
        return SoundSpeedWeights(np.ones(n * grid.dim))
    blocks = []
    s, w = np.polynomial.legendre.leggauss(8)
    for a in range(grid.dim):
        pts = list(_sample_points(grid, a))
        if integrated:
            dx = grid.spacings[a]
            acc = np.zeros(n)
            for sk, wk in zip(s, w):
                shifted = list(pts)
                shifted[a] = pts[a] + 0.5 * dx * sk
                acc += 0.5 * wk * np.asarray(params.sound_speed_sq(*shifted), dtype=np.float64)
            vals = acc
        else:
            vals = np.broadcast_to(np.asarray(params.sound_speed_sq(*pts), dtype=np.float64), (n,))
        blocks.append(np.array(vals))
    values = np.concatenate(blocks)
    if not np.all(values > 0.0):
        bad = int(np.flatnonzero(~(values > 0.0))[0])
        raise ValueError(f"c_S^2 must be positive; sample {bad} is {values[bad]!r}")
    return SoundSpeedWeights(values)


def kinetic_op(cplx: DeRhamComplex, weights: Optional[SoundSpeedWeights]) -> LinearOp:
    if weights is None or (weights.is_uniform and weights.values.flat[0] == 1.0):
        return cplx.H1
    return cplx.H1.scaled(weights.values)


def momentum_of_v(v, H1: LinearOp, weights: Optional[SoundSpeedWeights] = None) -> np.ndarray:
    m = H1.apply(v)
    if weights is not None:
        m = weights.values * m
    return m


def hamiltonian(state: SolverState, params: WesterveltParams, cplx: DeRhamComplex, weights=None) -> float:
    """``1/2 p^T H0 p + 1/2 v^T (c^2 H1) v - (2k/3) sum p^3 h^d``."""
    p, v = state.p, state.v
    hd = cplx.grid.cell_volume
    quad_p = float(p @ cplx.H0.apply(p))
    quad_v = float(v @ momentum_of_v(v, cplx.H1, weights))
    return 0.5 * (quad_p + quad_v) - (2.0 * params.k / 3.0) * float(np.sum(p ** 3)) * hd


def dissipation_rate(p, params: WesterveltParams, cplx: DeRhamComplex) -> float:
    """``-b (Gp)^T H1 (Gp)``; uses the unweighted ``H1`` irrespective of sound speed."""
    if params.b == 0.0:
        return 0.0
    g = cplx.G.apply(p)
    return -params.b * float(g @ cplx.H1.apply(g))
