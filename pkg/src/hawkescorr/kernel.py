"""Excitation kernels and model parameters.

Three kernel shapes are supported:

    exponential   Phi(t) = alpha * exp(-beta * t)
    power-law     Phi(t) = alpha * (c + t) ** (-gamma),  gamma > 1
    tabulated     piecewise linear through (k * step, values[k]), zero beyond

Every kernel is checked at construction for nonnegativity and for the
stability condition ||Phi||_1 < 1 (strict, no slack).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .errors import StabilityError

__all__ = [
    "Kernel",
    "ExponentialKernel",
    "PowerLawKernel",
    "TabulatedKernel",
    "ModelParams",
    "evaluate",
    "l1_norm",
    "kernel_from_dict",
    "load_kernel",
    "zero_kernel",
]

# Power-law quadrature runs over [0, _PL_SPAN * c]; the rest is the analytic tail.
_PL_SPAN = 200.0
_PL_NODES = 400_001


def _as_times(t):
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise ValueError("kernel evaluated at negative or NaN time")
    return arr


def _check_stability(norm: float) -> None:
    if not norm < 1.0:
        raise StabilityError(
            f"stability assumption ||Phi||_1 < 1 violated: "
            f"||Phi||_1 = {norm!r}"
        )


def _richardson_trapezoid(values: np.ndarray, step: float) -> float:
    """Trapezoid with one Richardson step; needs an odd number of nodes."""
    fine = np.trapezoid(values, dx=step)
    coarse = np.trapezoid(values[::2], dx=2 * step)
    return float((4.0 * fine - coarse) / 3.0)


class Kernel:
    """Base class. Subclasses are frozen dataclasses."""

    kind: str = ""

    def __call__(self, t):
        return self.evaluate(t)

    def evaluate(self, t):
        """Phi(t) for scalar or array ``t >= 0``."""
        arr = _as_times(t)
        out = self._eval(arr)
        return float(out) if np.ndim(out) == 0 else out

    def _eval(self, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @property
    def l1_norm(self) -> float:
        return self._norm  # type: ignore[attr-defined]

    def cumulative(self, x):
        """Integral of Phi over [0, x]."""
        raise NotImplementedError

    def sample_offsets(self, rng: np.random.Generator, uppers) -> np.ndarray:
        """One offset per entry of ``uppers``, with density proportional to Phi on [0, upper]."""
        raise NotImplementedError

    @property
    def nonincreasing(self) -> bool:
        return True

    @property
    def is_zero(self) -> bool:
        return self.l1_norm == 0.0

    def to_dict(self) -> dict[str, Any]:
        raise NotImplementedError


@dataclass(frozen=True, eq=True)
class ExponentialKernel(Kernel):
    alpha: float
    beta: float
    kind = "exponential"
    _norm: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and math.isfinite(self.beta)):
            raise ValueError("exponential kernel parameters must be finite")
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        norm = self.alpha / self.beta
        _check_stability(norm)
        object.__setattr__(self, "_norm", norm)

    def _eval(self, t):
        return self.alpha * np.exp(-self.beta * t)

    def cumulative(self, x):
        x = np.asarray(x, dtype=float)
        return self._norm * -np.expm1(-self.beta * x)

    def sample_offsets(self, rng, uppers):
        uppers = np.asarray(uppers, dtype=float)
        u = rng.random(uppers.size) * self.cumulative(uppers)
        # invert alpha/beta * (1 - exp(-beta x)) = u
        return -np.log1p(-u / self._norm) / self.beta

    def to_dict(self):
        return {"type": "exponential", "alpha": self.alpha, "beta": self.beta}


@dataclass(frozen=True, eq=True)
class PowerLawKernel(Kernel):
    alpha: float
    c: float
    gamma: float
    kind = "powerlaw"
    _norm: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.alpha, self.c, self.gamma)):
            raise ValueError("power-law kernel parameters must be finite")
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        if self.c <= 0:
            raise ValueError("c must be positive (kernel must be bounded at 0)")
        if self.gamma <= 1:
            raise ValueError("gamma must exceed 1 for integrability")
        norm = self._quadrature_norm()
        _check_stability(norm)
        object.__setattr__(self, "_norm", norm)

    def _quadrature_norm(self) -> float:
        if self.alpha == 0:
            return 0.0
        span = _PL_SPAN * self.c
        nodes = np.linspace(0.0, span, _PL_NODES)
        body = _richardson_trapezoid(self._eval(nodes), nodes[1] - nodes[0])
        tail = self.alpha * (self.c + span) ** (1.0 - self.gamma) / (self.gamma - 1.0)
        return body + tail

    def closed_form_norm(self) -> float:
        return self.alpha * self.c ** (1.0 - self.gamma) / (self.gamma - 1.0)

    def _eval(self, t):
        return self.alpha * (self.c + t) ** (-self.gamma)

    def cumulative(self, x):
        x = np.asarray(x, dtype=float)
        g1 = self.gamma - 1.0
        return self.alpha / g1 * (self.c ** -g1 - (self.c + x) ** -g1)

    def sample_offsets(self, rng, uppers):
        uppers = np.asarray(uppers, dtype=float)
        g1 = self.gamma - 1.0
        u = rng.random(uppers.size) * self.cumulative(uppers)
        base = self.c ** -g1 - u * g1 / self.alpha
        return base ** (-1.0 / g1) - self.c

    def to_dict(self):
        return {"type": "powerlaw", "alpha": self.alpha, "c": self.c, "gamma": self.gamma}


@dataclass(frozen=True, eq=False)
class TabulatedKernel(Kernel):
    """Linear interpolation through ``values`` on nodes ``k * step``; zero beyond."""

    step: float
    values: tuple
    kind = "tabulated"
    _nodes: np.ndarray = field(init=False, repr=False)
    _vals: np.ndarray = field(init=False, repr=False)
    _cum: np.ndarray = field(init=False, repr=False)
    _norm: float = field(init=False, repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 1 or vals.size < 1:
            raise ValueError("tabulated kernel needs a nonempty list of values")
        if not (math.isfinite(self.step) and self.step > 0):
            raise ValueError("tabulated step must be positive and finite")
        if not np.all(np.isfinite(vals)):
            raise ValueError("tabulated values must be finite")
        if np.any(vals < 0):
            raise ValueError("tabulated values must be nonnegative")
        object.__setattr__(self, "values", tuple(float(v) for v in vals))
        nodes = self.step * np.arange(vals.size)
        seg = 0.5 * self.step * (vals[1:] + vals[:-1])
        cum = np.concatenate(([0.0], np.cumsum(seg)))
        object.__setattr__(self, "_nodes", nodes)
        object.__setattr__(self, "_vals", vals)
        object.__setattr__(self, "_cum", cum)
        norm = float(cum[-1])
        _check_stability(norm)
        object.__setattr__(self, "_norm", norm)

    def __eq__(self, other):
        if not isinstance(other, TabulatedKernel):
            return NotImplemented
        return self.step == other.step and self.values == other.values

    def __hash__(self):
        return hash((self.step, self.values))

    @property
    def horizon(self) -> float:
        return float(self._nodes[-1])

    def _eval(self, t):
        return np.interp(t, self._nodes, self._vals, right=0.0)

    def cumulative(self, x):
        x = np.minimum(np.asarray(x, dtype=float), self.horizon)
        k = np.clip(np.floor(x / self.step).astype(int), 0, max(self._vals.size - 2, 0))
        if self._vals.size == 1:
            return np.zeros_like(x)
        dx = x - self._nodes[k]
        v0 = self._vals[k]
        slope = (self._vals[k + 1] - v0) / self.step
        return self._cum[k] + v0 * dx + 0.5 * slope * dx * dx

    def sample_offsets(self, rng, uppers):
        # rejection against the constant majorant max(values)
        uppers = np.minimum(np.asarray(uppers, dtype=float), self.horizon)
        bound = float(self._vals.max())
        out = np.empty(uppers.size)
        todo = np.arange(uppers.size)
        while todo.size:
            cand = rng.random(todo.size) * uppers[todo]
            ok = rng.random(todo.size) * bound <= self._eval(cand)
            out[todo[ok]] = cand[ok]
            todo = todo[~ok]
        return out

    @property
    def nonincreasing(self) -> bool:
        return bool(np.all(np.diff(self._vals) <= 0))

    def to_dict(self):
        return {"type": "tabulated", "step": self.step, "values": list(self.values)}


def zero_kernel() -> TabulatedKernel:
    return TabulatedKernel(step=1.0, values=(0.0, 0.0))


@dataclass(frozen=True)
class ModelParams:
    """Baseline intensity ``mu`` and excitation kernel of a Hawkes process."""

    mu: float
    kernel: Kernel

    def __post_init__(self):
        if not (math.isfinite(self.mu) and self.mu > 0):
            raise ValueError(f"baseline intensity mu must be positive, got {self.mu!r}")


def evaluate(kernel: Kernel, t):
    return kernel.evaluate(t)


def l1_norm(kernel: Kernel) -> float:
    return kernel.l1_norm


def numeric_l1_norm(kernel: Kernel, step: float, horizon: float) -> float:
    """Grid quadrature of ||Phi||_1 on [0, horizon], independent of closed forms.

    Uses trapezoid plus one Richardson step; the mass beyond ``horizon`` is ignored.
    """
    n = int(round(horizon / step))
    n += n % 2
    nodes = step * np.arange(n + 1)
    return _richardson_trapezoid(kernel.evaluate(nodes), step)


def kernel_from_dict(data: dict[str, Any]) -> Kernel:
    """Build a kernel from its JSON form, e.g. ``{"type": "exponential", "alpha": 1, "beta": 2}``."""
    if not isinstance(data, dict) or "type" not in data:
        raise ValueError("kernel description must be an object with a 'type' field")
    kind = data["type"]
    try:
        if kind == "exponential":
            return ExponentialKernel(float(data["alpha"]), float(data["beta"]))
        if kind in ("powerlaw", "power-law", "power_law"):
            return PowerLawKernel(float(data["alpha"]), float(data["c"]), float(data["gamma"]))
        if kind == "tabulated":
            return TabulatedKernel(float(data["step"]), tuple(float(v) for v in data["values"]))
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed {kind!r} kernel description: {exc}") from exc
    raise ValueError(f"unknown kernel type {kind!r}")


def load_kernel(path: str | Path) -> Kernel:
    with open(path) as fh:
        return kernel_from_dict(json.load(fh))
