"""Iterated convolutions, the resolvent Psi = sum_n Phi_n, and Volterra solves.

All integrals are trapezoidal on a uniform grid t_k = k*h.  The discrete
convolution used throughout is

    (f*g)_k = h * [ sum_{j=0}^{k} f_{k-j} g_j  -  (f_k g_0 + f_0 g_k) / 2 ]

which is symmetric in (f, g) and vanishes at k = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._csv import write_rows
from .errors import HorizonError, NumericalError
from .kernel import Kernel

__all__ = [
    "Grid",
    "ResolventTable",
    "VolterraSolution",
    "trapezoid_convolve",
    "iterated_convolution",
    "resolvent",
    "resolvent_series",
    "solve_volterra",
    "write_resolvent_csv",
]


@dataclass(frozen=True)
class Grid:
    step: float
    n_nodes: int

    def __post_init__(self):
        if not (math.isfinite(self.step) and self.step > 0):
            raise ValueError(f"grid step must be positive, got {self.step!r}")
        if self.n_nodes < 2:
            raise ValueError("grid needs at least two nodes")

    @classmethod
    def covering(cls, horizon: float, step: float | None = None) -> "Grid":
        """Smallest uniform grid from 0 reaching at least ``horizon``.

        Default step is min(1e-3, horizon / 1e4).
        """
        if not (horizon > 0):
            raise ValueError("horizon must be positive")
        if step is None:
            step = min(1e-3, horizon / 1e4)
        n = int(math.ceil(horizon / step - 1e-9)) + 1
        return cls(step=float(step), n_nodes=max(n, 2))

    @property
    def horizon(self) -> float:
        return self.step * (self.n_nodes - 1)

    @property
    def nodes(self) -> np.ndarray:
        return self.step * np.arange(self.n_nodes)

    def index(self, t: float) -> tuple[int, float]:
        """Nearest node index and the snap distance |t - t_k|."""
        if t < 0 or t > self.horizon + 0.5 * self.step:
            raise HorizonError(f"time {t!r} outside grid [0, {self.horizon!r}]")
        k = min(int(round(t / self.step)), self.n_nodes - 1)
        return k, abs(t - k * self.step)


def trapezoid_convolve(f: np.ndarray, g: np.ndarray, step: float) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    n = f.size
    full = np.convolve(f, g)[:n]
    return step * (full - 0.5 * (f * g[0] + f[0] * g))


def _forward_solve(phi: np.ndarray, g: np.ndarray, step: float) -> np.ndarray:
    """Solve f = g + phi*f node by node with the trapezoidal convolution."""
    n = phi.size
    diag = 1.0 - 0.5 * step * phi[0]
    if not diag > 0:
        raise NumericalError(
            f"grid step {step!r} too coarse for Phi(0) = {phi[0]!r} (1 - h*Phi(0)/2 <= 0)"
        )
    f = np.empty(n)
    f[0] = g[0]
    rev = phi[::-1]  # rev[n-1-m] = phi[m]
    for k in range(1, n):
        # sum_{j=1}^{k-1} phi[k-j] f[j]
        inner = float(np.dot(rev[n - k:n - 1], f[1:k])) if k > 1 else 0.0
        f[k] = (g[k] + step * inner + 0.5 * step * phi[k] * f[0]) / diag
    if not np.all(np.isfinite(f)):
        raise NumericalError("non-finite values during Volterra forward solve")
    return f


def cumulative_trapezoid(values: np.ndarray, step: float) -> np.ndarray:
    out = np.empty_like(values, dtype=float)
    out[0] = 0.0
    np.cumsum(0.5 * step * (values[1:] + values[:-1]), out=out[1:])
    return out


def iterated_convolution(kernel: Kernel, n: int, grid: Grid) -> np.ndarray:
    """Phi_n on the grid nodes: Phi_1 = Phi, Phi_n = Phi * Phi_{n-1}."""
    if int(n) != n or n < 1:
        raise ValueError(f"convolution order must be a positive integer, got {n!r}")
    phi = kernel.evaluate(grid.nodes)
    out = phi.copy()
    for _ in range(int(n) - 1):
        out = trapezoid_convolve(phi, out, grid.step)
    return out


def resolvent_series(kernel: Kernel, grid: Grid, order: int) -> np.ndarray:
    """Truncated sum Phi_1 + ... + Phi_order (slow; kept as a cross-check)."""
    phi = kernel.evaluate(grid.nodes)
    term = phi.copy()
    total = phi.copy()
    for _ in range(order - 1):
        term = trapezoid_convolve(phi, term, grid.step)
        total += term
    return total


@dataclass(frozen=True, eq=False)
class ResolventTable:
    """Psi and I(v) = int_0^v Psi on a uniform grid."""

    grid: Grid
    psi: np.ndarray
    cum: np.ndarray
    kernel_l1: float
    residual: float

    @property
    def step(self) -> float:
        return self.grid.step

    @property
    def horizon(self) -> float:
        return self.grid.horizon

    @property
    def nodes(self) -> np.ndarray:
        return self.grid.nodes

    @property
    def psi_l1_limit(self) -> float:
        return self.kernel_l1 / (1.0 - self.kernel_l1)

    def index(self, t: float) -> tuple[int, float]:
        return self.grid.index(t)

    def psi_at(self, t: float) -> float:
        return float(self.psi[self.index(t)[0]])

    def cum_at(self, t: float) -> float:
        return float(self.cum[self.index(t)[0]])


def resolvent(kernel: Kernel, grid: Grid) -> ResolventTable:
    """Solve Psi = Phi + Phi*Psi on ``grid`` by forward substitution."""
    phi = kernel.evaluate(grid.nodes)
    psi = _forward_solve(phi, phi, grid.step)
    residual = float(np.max(np.abs(psi - phi - trapezoid_convolve(phi, psi, grid.step))))
    cum = cumulative_trapezoid(psi, grid.step)
    return ResolventTable(grid=grid, psi=psi, cum=cum, kernel_l1=kernel.l1_norm, residual=residual)


@dataclass(frozen=True, eq=False)
class VolterraSolution:
    values: np.ndarray
    via_resolvent: np.ndarray
    discrepancy: float


def solve_volterra(g, kernel: Kernel, grid: Grid, table: ResolventTable | None = None) -> VolterraSolution:
    """Solve f = g + Phi*f and, independently, f = g + Psi*g.

    ``g`` is either an array of node values or a callable of the node times.
    Returns the direct solution with the resolvent form and their max difference.
    """
    nodes = grid.nodes
    gv = np.asarray(g(nodes) if callable(g) else g, dtype=float)
    if gv.shape != nodes.shape:
        raise ValueError(f"g has shape {gv.shape}, grid has {nodes.size} nodes")
    if not np.all(np.isfinite(gv)):
        raise ValueError("g must be finite on every node")
    phi = kernel.evaluate(nodes)
    direct = _forward_solve(phi, gv, grid.step)
    if table is None:
        table = resolvent(kernel, grid)
    elif table.grid != grid:
        raise ValueError("resolvent table was built on a different grid")
    other = gv + trapezoid_convolve(table.psi, gv, grid.step)
    return VolterraSolution(direct, other, float(np.max(np.abs(direct - other))))


def write_resolvent_csv(table: ResolventTable, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        write_rows(fh, ("t", "psi", "cum"), zip(table.nodes, table.psi, table.cum))
