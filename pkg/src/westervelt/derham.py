"""Discrete double de Rham complex on uniform periodic tensor grids.

All operators are matrix-free. Derivatives are built from the periodic
forward difference ``d0`` (row pattern -1 at i, +1 at i+1) applied along one
axis of the flat C-ordered layout; Hodge duality matrices are diagonal
products of ``h0 = dx`` and ``h1 = 1/dx`` per axis.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import prod
from typing import Callable, Optional, Sequence

import numpy as np

from . import kernels
from .mesh import GridError, TensorGrid, build_grid_1d, n_components


class QuadratureError(RuntimeError):
    """Edge/face/cell integrals failed to converge."""


class LinearOp:
    """Matrix-free linear operator with exact transpose application."""

    def __init__(self, shape, kind, matvec, rmatvec, diagonal=None, blocks=None):
        self.shape = (int(shape[0]), int(shape[1]))
        self.kind = kind
        self._matvec = matvec
        self._rmatvec = rmatvec
        self.diagonal = None if diagonal is None else np.asarray(diagonal, dtype=np.float64)
        self.blocks = blocks

    def apply(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.shape[1],):
            raise ValueError(f"operator of shape {self.shape} applied to vector of shape {x.shape}")
        return self._matvec(x)

    def apply_transpose(self, y):
        y = np.asarray(y, dtype=np.float64)
        if y.shape != (self.shape[0],):
            raise ValueError(f"transpose of shape {self.shape} applied to vector of shape {y.shape}")
        return self._rmatvec(y)

    __call__ = apply

    @property
    def T(self) -> "LinearOp":
        return LinearOp(
            (self.shape[1], self.shape[0]), self.kind, self._rmatvec, self._matvec,
            diagonal=self.diagonal,
        )

    def __matmul__(self, other):
        if isinstance(other, LinearOp):
            if self.shape[1] != other.shape[0]:
                raise ValueError(f"cannot compose {self.shape} with {other.shape}")
            a, b = self, other
            return LinearOp(
                (a.shape[0], b.shape[1]), "composition",
                lambda x: a._matvec(b._matvec(x)),
                lambda y: b._rmatvec(a._rmatvec(y)),
            )
        return self.apply(other)

    def __neg__(self):
        a = self
        return LinearOp(
            self.shape, self.kind, lambda x: -a._matvec(x), lambda y: -a._rmatvec(y),
            diagonal=None if self.diagonal is None else -self.diagonal,
        )

    def inverse_diagonal(self) -> "LinearOp":
        if self.diagonal is None:
            raise TypeError("only diagonal operators have a cheap inverse")
        return diagonal_op(1.0 / self.diagonal)

    def scaled(self, weights) -> "LinearOp":
        """Diagonal operator with entries ``weights * diag(self)``."""
        if self.diagonal is None:
            raise TypeError("scaling is defined for diagonal operators only")
        return diagonal_op(np.asarray(weights, dtype=np.float64) * self.diagonal)

    def to_dense(self) -> np.ndarray:
        """Dense matrix, column by column. Meant for small test grids."""
        cols = [self._matvec(e) for e in np.eye(self.shape[1])]
        return np.array(cols).T.reshape(self.shape)

    def __repr__(self):
        return f"LinearOp(kind={self.kind!r}, shape={self.shape})"


def diagonal_op(d) -> LinearOp:
    d = np.asarray(d, dtype=np.float64)
    return LinearOp((d.size, d.size), "diagonal", lambda x: d * x, lambda y: d * y, diagonal=d)


def zero_op(rows, cols) -> LinearOp:
    return LinearOp((rows, cols), "zero", lambda x: np.zeros(rows), lambda y: np.zeros(cols))


def block_op(rows: Sequence[Sequence[Optional[LinearOp]]], row_sizes, col_sizes) -> LinearOp:
    """Block operator; ``None`` entries are zero blocks."""
    rs = np.cumsum([0, *row_sizes])
    cs = np.cumsum([0, *col_sizes])

    def mv(x):
        out = np.zeros(rs[-1])
        for i, row in enumerate(rows):
            for j, blk in enumerate(row):
                if blk is not None:
                    out[rs[i]:rs[i + 1]] += blk.apply(x[cs[j]:cs[j + 1]])
        return out

    def rmv(y):
        out = np.zeros(cs[-1])
        for i, row in enumerate(rows):
            for j, blk in enumerate(row):
                if blk is not None:
                    out[cs[j]:cs[j + 1]] += blk.apply_transpose(y[rs[i]:rs[i + 1]])
        return out

    return LinearOp((rs[-1], cs[-1]), "block", mv, rmv, blocks=rows)


def axis_difference(grid: TensorGrid, axis: int) -> LinearOp:
    """``I (x) .. (x) d0 (x) .. (x) I`` with ``d0`` acting on ``axis``."""
    s3 = grid.shape3
    n = grid.n_nodes
    kind = "circulant-stencil" if grid.dim == 1 else "kronecker-composition"
    return LinearOp(
        (n, n), kind,
        lambda x: kernels.diff_forward(x, s3, axis),
        lambda y: kernels.diff_backward(y, s3, axis),
    )


def build_d0_1d(n: int) -> LinearOp:
    return axis_difference(TensorGrid((build_grid_1d(n, 1.0),)), 0)


def form_component_axes(dim: int, degree: int) -> list[tuple[int, ...]]:
    """Axes spanned by each component of a ``degree``-form, ordered (x, y, z).

    Component blocks are: edges along each axis for 1-forms, faces normal to
    each axis for 2-forms in 3D, and all axes for the top form.
    """
    n_components(dim, degree)
    if degree == 0:
        return [()]
    if degree == dim:
        return [tuple(range(dim))]
    if degree == 1:
        return [(a,) for a in range(dim)]
    return [tuple(b for b in range(3) if b != a) for a in range(3)]


def build_gradient(grid: TensorGrid) -> LinearOp:
    if grid.dim == 1:
        return axis_difference(grid, 0)
    n = grid.n_nodes
    return block_op([[axis_difference(grid, a)] for a in range(grid.dim)], [n] * grid.dim, [n])


def build_curl(grid: TensorGrid) -> LinearOp:
    """2D: scalar curl ``d_y v_x - d_x v_y`` onto cells. 3D: edges onto faces."""
    n = grid.n_nodes
    if grid.dim == 2:
        dx, dy = axis_difference(grid, 0), axis_difference(grid, 1)
        return block_op([[dy, -dx]], [n], [n, n])
    if grid.dim == 3:
        dx, dy, dz = (axis_difference(grid, a) for a in range(3))
        return block_op(
            [[None, -dz, dy], [dz, None, -dx], [-dy, dx, None]], [n] * 3, [n] * 3,
        )
    raise GridError("curl needs a 2D or 3D grid")


def build_divergence(grid: TensorGrid) -> LinearOp:
    """Primal face-to-cell divergence (3D)."""
    if grid.dim != 3:
        raise GridError("the primal divergence is built for 3D grids")
    n = grid.n_nodes
    return block_op([[axis_difference(grid, a) for a in range(3)]], [n], [n] * 3)


def hodge_diagonal_entries(grid: TensorGrid, degree: int) -> np.ndarray:
    blocks = []
    for covered in form_component_axes(grid.dim, degree):
        w = 1.0
        for a, dx in enumerate(grid.spacings):
            w *= (1.0 / dx) if a in covered else dx
        blocks.append(np.full(grid.n_nodes, w))
    return np.concatenate(blocks)


def build_hodge_diagonal(grid: TensorGrid, degree: int) -> LinearOp:
    return diagonal_op(hodge_diagonal_entries(grid, degree))


def build_h0_natural_1d(n: int, dx: float) -> LinearOp:
    """Natural 0-form duality stencil ``(dx/8) (1 6 1)``; symmetric circulant."""
    if n < 3:
        raise GridError(f"need at least 3 cells, got {n}")
    c = dx / 8.0

    def mv(u):
        return (np.roll(u, 1) + 6.0 * u + np.roll(u, -1)) * c

    return LinearOp((n, n), "circulant-stencil", mv, mv)


@dataclass
class DeRhamComplex:
    grid: TensorGrid
    G: LinearOp
    C: Optional[LinearOp]
    D: Optional[LinearOp]
    H: dict[int, LinearOp]
    h0_natural: Optional[LinearOp] = None
    _lap: Optional[LinearOp] = field(default=None, repr=False)

    @property
    def H0(self):
        return self.H[0]

    @property
    def H1(self):
        return self.H[1]

    def stiffness(self) -> LinearOp:
        """``G^T H1 G`` (positive semidefinite; ``-h^d`` times a Laplacian)."""
        if self._lap is None:
            self._lap = self.G.T @ self.H1 @ self.G
        return self._lap


def build_complex(grid: TensorGrid) -> DeRhamComplex:
    H = {d: build_hodge_diagonal(grid, d) for d in range(grid.dim + 1)}
    nat = None
    if grid.dim == 1:
        nat = build_h0_natural_1d(grid.shape[0], grid.spacings[0])
    return DeRhamComplex(
        grid=grid,
        G=build_gradient(grid),
        C=build_curl(grid) if grid.dim >= 2 else None,
        D=build_divergence(grid) if grid.dim == 3 else None,
        H=H,
        h0_natural=nat,
    )


# -- reduction -----------------------------------------------------------------

def _node_lines(grid: TensorGrid, dual):
    if isinstance(dual, bool):
        dual = [dual] * grid.dim
    return [a.dual_nodes() if d else a.primal_nodes() for a, d in zip(grid.axes, dual)]


def _check_finite(values, what):
    if not np.all(np.isfinite(values)):
        raise ValueError(f"non-finite sample while reducing {what}")
    return values


def reduce_0form(grid: TensorGrid, f: Callable, dual=False) -> np.ndarray:
    """Point values at the (primal or dual) nodes, in flat-index order."""
    coords = grid.node_coords(dual)
    vals = np.broadcast_to(np.asarray(f(*coords), dtype=np.float64), (grid.n_nodes,))
    return _check_finite(np.array(vals), "a 0-form")


_GAUSS = {}


def _gauss(npts):
    if npts not in _GAUSS:
        s, w = np.polynomial.legendre.leggauss(npts)
        _GAUSS[npts] = (0.5 * (s + 1.0), 0.5 * w)
    return _GAUSS[npts]


def _box_integrals(func, starts, widths, covered, n_sub, npts=8):
    """Composite Gauss integrals of ``func`` over boxes anchored at ``starts``.

    ``starts`` are flat per-axis coordinate arrays; the boxes extend by
    ``widths[a]`` along each covered axis ``a``.
    """
    s, w = _gauss(npts)
    sub = (np.arange(n_sub)[:, None] + s[None, :]).reshape(-1) / n_sub
    wq = np.tile(w, n_sub) / n_sub
    m = sub.size
    q = len(covered)
    # tensor grid of quadrature offsets over the covered axes
    offs = np.meshgrid(*([sub] * q), indexing="ij")
    wts = np.ones([m] * q)
    for i in range(q):
        shape = [1] * q
        shape[i] = m
        wts = wts * wq.reshape(shape)
    offs = [o.reshape(-1) for o in offs]
    wts = wts.reshape(-1)
    pts = []
    for a, x0 in enumerate(starts):
        if a in covered:
            off = offs[covered.index(a)]
            pts.append(x0[:, None] + widths[a] * off[None, :])
        else:
            pts.append(np.broadcast_to(x0[:, None], (x0.size, wts.size)))
    vals = np.asarray(func(*pts), dtype=np.float64)
    vals = np.broadcast_to(vals, pts[0].shape)
    _check_finite(vals, "an integral form")
    return (vals * wts[None, :]).sum(axis=1) * prod(widths[a] for a in covered)


def _adaptive_box_integrals(func, starts, widths, covered, rtol, max_sub):
    n_sub = 1
    prev = _box_integrals(func, starts, widths, covered, n_sub)
    while n_sub < max_sub:
        n_sub *= 2
        cur = _box_integrals(func, starts, widths, covered, n_sub)
        scale = max(np.max(np.abs(cur)), np.finfo(float).tiny)
        if np.all(np.abs(cur - prev) <= rtol * np.maximum(np.abs(cur), scale * 1e-3)):
            return cur
        prev = cur
    raise QuadratureError(
        f"integrals did not reach rtol={rtol:g} with {max_sub} subintervals per axis"
    )


def reduce_form(
    grid: TensorGrid,
    degree: int,
    F,
    antiderivative=None,
    dual=False,
    rtol=1e-12,
    max_sub=64,
) -> np.ndarray:
    """Reduce a differential form to its coefficient vector.

    ``F(*coords)`` returns one array per component (or a single array for
    scalar-valued degrees). For 1-forms ``antiderivative`` may supply per
    component a primitive ``A_a`` with ``d A_a / d x_a = F_a``; edge integrals
    are then taken in closed form.
    """
    if degree == 0:
        return reduce_0form(grid, F, dual)
    axes_list = form_component_axes(grid.dim, degree)
    one_comp = len(axes_list) == 1
    starts = grid.node_coords(dual)
    widths = grid.spacings
    blocks = []
    for c, covered in enumerate(axes_list):
        if antiderivative is not None:
            if degree != 1:
                raise ValueError("closed-form antiderivatives are supported for 1-forms only")
            A = antiderivative if one_comp and callable(antiderivative) else antiderivative[c]
            a = covered[0]
            ends = list(starts)
            ends[a] = starts[a] + widths[a]
            vals = np.asarray(A(*ends), dtype=np.float64) - np.asarray(A(*starts), dtype=np.float64)
            blocks.append(_check_finite(np.broadcast_to(vals, (grid.n_nodes,)), "a 1-form"))
            continue
        if one_comp:
            comp = (lambda *x: _first(F(*x)))
        else:
            comp = (lambda cc: (lambda *x: F(*x)[cc]))(c)
        blocks.append(_adaptive_box_integrals(comp, starts, widths, list(covered), rtol, max_sub))
    return np.concatenate(blocks)


def reduce_1form(grid, F, antiderivative=None, dual=False, rtol=1e-12):
    """Circulations along the edges; component ``a`` of edge ``i`` spans [x_i, x_i + dx_a]."""
    return reduce_form(grid, 1, F, antiderivative=antiderivative, dual=dual, rtol=rtol)


def reduce_2form(grid, B, dual=False, rtol=1e-12):
    return reduce_form(grid, 2, B, dual=dual, rtol=rtol)


def reduce_3form(grid, rho, dual=False, rtol=1e-12):
    return reduce_form(grid, 3, rho, dual=dual, rtol=rtol)


def _first(r):
    return r[0] if isinstance(r, (tuple, list)) else r


# -- interpolation -------------------------------------------------------------

def interpolate_form(grid: TensorGrid, degree: int, coeffs, dual=False):
    """Lowest-order interpolant: periodic hats on nodes, ``1/dx`` edge bumps.

    Returns ``f(*coords)``; vector-valued degrees give a tuple of components.
    """
    coeffs = np.asarray(coeffs, dtype=np.float64)
    axes_list = form_component_axes(grid.dim, degree)
    n = grid.n_nodes
    if coeffs.size != n * len(axes_list):
        raise ValueError(f"{degree}-form coefficients of size {coeffs.size} on grid {grid.shape}")
    blocks = [coeffs[i * n:(i + 1) * n].reshape(grid.shape) for i in range(len(axes_list))]
    if isinstance(dual, bool):
        dual = [dual] * grid.dim
    origins = [a.origin + (0.5 * a.dx if d else 0.0) for a, d in zip(grid.axes, dual)]

    def locate(coords):
        idx, frac = [], []
        for x, o, ax in zip(coords, origins, grid.axes):
            t = (np.asarray(x, dtype=np.float64) - o) / ax.dx
            j = np.floor(t)
            frac.append(t - j)
            idx.append(j.astype(np.int64) % ax.n_cells)
        return idx, frac

    def evaluate(*coords):
        idx, frac = locate(coords)
        shape = np.broadcast(*coords).shape
        outs = []
        for blk, covered in zip(blocks, axes_list):
            total = np.zeros(shape)
            free = [a for a in range(grid.dim) if a not in covered]
            for corner in range(2 ** len(free)):
                weight = np.ones(shape)
                where = []
                for a in range(grid.dim):
                    if a in covered:
                        weight = weight / grid.axes[a].dx
                        where.append(idx[a])
                    else:
                        bit = (corner >> free.index(a)) & 1
                        weight = weight * (frac[a] if bit else 1.0 - frac[a])
                        where.append((idx[a] + bit) % grid.axes[a].n_cells)
                total = total + weight * blk[tuple(np.broadcast_arrays(*where))]
            outs.append(total)
        return outs[0] if len(outs) == 1 else tuple(outs)

    return evaluate


def interpolate_0form(grid, coeffs, dual=False):
    return interpolate_form(grid, 0, coeffs, dual)


def interpolate_1form(grid, coeffs, dual=False):
    return interpolate_form(grid, 1, coeffs, dual)
