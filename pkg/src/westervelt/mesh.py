"""Uniform periodic grids, their tensor products, and the flat index layout.

Multi-dimensional coefficient vectors are stored flat in C order: the last
axis varies fastest and x is outermost. With this layout the x-block of the
gradient is ``d0 (x) I`` exactly as written for Kronecker products.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from math import prod

import numpy as np


class GridError(ValueError):
    """Degenerate or inconsistent grid description."""


@dataclass(frozen=True)
class UniformPeriodicGrid1D:
    n_cells: int
    length: float
    origin: float = 0.0

    def __post_init__(self):
        if int(self.n_cells) != self.n_cells or self.n_cells < 3:
            raise GridError(f"need at least 3 cells, got {self.n_cells!r}")
        if not self.length > 0.0:
            raise GridError(f"length must be positive, got {self.length!r}")

    @property
    def dx(self) -> float:
        return self.length / self.n_cells

    def primal_nodes(self) -> np.ndarray:
        return self.origin + np.arange(self.n_cells) * self.dx

    def dual_nodes(self) -> np.ndarray:
        return self.origin + (np.arange(self.n_cells) + 0.5) * self.dx


def build_grid_1d(n_cells: int, length: float = 1.0, origin: float = 0.0) -> UniformPeriodicGrid1D:
    return UniformPeriodicGrid1D(int(n_cells), float(length), float(origin))


@dataclass(frozen=True)
class TensorGrid:
    axes: tuple[UniformPeriodicGrid1D, ...]
    _shape3: tuple[int, int, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not 1 <= len(self.axes) <= 3:
            raise GridError(f"dimension must be 1, 2 or 3, got {len(self.axes)}")
        object.__setattr__(self, "axes", tuple(self.axes))
        s = tuple(a.n_cells for a in self.axes) + (1,) * (3 - len(self.axes))
        object.__setattr__(self, "_shape3", s)

    @classmethod
    def uniform(cls, n, length=1.0, origin=0.0, dim=None) -> "TensorGrid":
        """Grid with per-axis cell counts ``n`` (int or sequence)."""
        ns = [n] * (dim or 1) if np.isscalar(n) else list(n)
        d = len(ns)
        lengths = [length] * d if np.isscalar(length) else list(length)
        origins = [origin] * d if np.isscalar(origin) else list(origin)
        return cls(tuple(build_grid_1d(a, b, c) for a, b, c in zip(ns, lengths, origins)))

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(a.n_cells for a in self.axes)

    @property
    def shape3(self) -> tuple[int, int, int]:
        """Shape padded with unit axes to rank 3, for the kernels."""
        return self._shape3

    @property
    def spacings(self) -> tuple[float, ...]:
        return tuple(a.dx for a in self.axes)

    @property
    def n_nodes(self) -> int:
        return prod(self.shape)

    @property
    def cell_volume(self) -> float:
        return prod(self.spacings)

    def n_dofs(self, degree: int) -> int:
        """Coefficient count for ``degree``-forms (periodic: one block per component)."""
        return self.n_nodes * n_components(self.dim, degree)

    def flat_index(self, multi_index) -> int:
        idx = [int(i) % n for i, n in zip(multi_index, self.shape)]
        return int(np.ravel_multi_index(idx, self.shape))

    def multi_index(self, flat: int) -> tuple[int, ...]:
        return tuple(int(i) for i in np.unravel_index(int(flat) % self.n_nodes, self.shape))

    def node_coords(self, dual=None) -> tuple[np.ndarray, ...]:
        """Flattened coordinate arrays of the nodes, one per axis.

        ``dual`` selects, per axis, whether the half-shifted dual coordinate is
        used (a bool applies to all axes).
        """
        if dual is None or isinstance(dual, bool):
            dual = [bool(dual)] * self.dim
        lines = [a.dual_nodes() if d else a.primal_nodes() for a, d in zip(self.axes, dual)]
        return tuple(m.reshape(-1) for m in np.meshgrid(*lines, indexing="ij"))


def n_components(dim: int, degree: int) -> int:
    if not 0 <= degree <= dim:
        raise GridError(f"no {degree}-forms in {dim}D")
    return {0: 1, dim: 1}.get(degree, dim)


def flat_index(grid: TensorGrid, multi_index) -> int:
    return grid.flat_index(multi_index)


def inverse_flat_index(grid: TensorGrid, flat: int) -> tuple[int, ...]:
    return grid.multi_index(flat)


class Complex(str, Enum):
    PRIMAL = "primal"
    DUAL = "dual"


@dataclass
class FormCoefficients:
    """Flat coefficient vector tagged with its form degree and complex."""

    grid: TensorGrid
    degree: int
    data: np.ndarray
    complex_tag: Complex = Complex.PRIMAL

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64).reshape(-1)
        expected = self.grid.n_dofs(self.degree)
        if self.data.size != expected:
            raise GridError(
                f"{self.degree}-form on {self.grid.shape} needs {expected} coefficients, got {self.data.size}"
            )
        if not np.all(np.isfinite(self.data)):
            raise FloatingPointError("non-finite form coefficients")

    @property
    def n_components(self) -> int:
        return n_components(self.grid.dim, self.degree)

    def components(self) -> list[np.ndarray]:
        """Per-component blocks, ordered (x, y, z)."""
        return list(self.data.reshape(self.n_components, -1))
