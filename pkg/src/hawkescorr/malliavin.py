"""Hawkes functionals on finite configurations of the Poisson embedding.

A configuration is a finite list of atoms (t_i, theta_i) in time order.  Atom
k is accepted iff theta_k <= lambda_{t_k}, where the intensity only counts
accepted predecessors.  On top of that evaluation this module provides

* the pathwise derivative: the signed sum of a functional over all
  sub-configurations of n atoms,
* the coefficients c_n of the pseudo-chaotic expansion of X^zeta_t, computed
  two ways (full subset sum, and the reduced form through the last atom),
* their integral over the marks theta, exactly, against the product formula,
* expectations of lambda_t and X^zeta_t with atoms forced at given times,
* the truncated chaos series for E[X^zeta_t].

``zeta`` is either ``"one"`` (X = H) or ``"phi"`` (X = lambda - mu).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ConsistencyError
from .kernel import ModelParams
from .resolvent import Grid, ResolventTable, cumulative_trapezoid, trapezoid_convolve

__all__ = [
    "Atom",
    "Configuration",
    "Zeta",
    "ChaosExpansion",
    "accepted",
    "eval_intensity_config",
    "eval_X_config",
    "pathwise_derivative",
    "coefficient_c_n",
    "theta_integral_c_n",
    "shifted_mean_intensity",
    "shifted_mean_X",
    "expectation_via_chaos",
]

MAX_DERIVATIVE_ORDER = 20
_AGREEMENT_TOL = 1e-12


class Zeta(str, Enum):
    ONE = "one"
    PHI = "phi"


def _zeta(z) -> Zeta:
    try:
        return Zeta(z)
    except ValueError:
        raise ValueError(f"zeta must be 'one' or 'phi', got {z!r}") from None


def _zeta_value(zeta: Zeta, params: ModelParams, lag: float) -> float:
    return 1.0 if zeta is Zeta.ONE else params.kernel.evaluate(lag)


@dataclass(frozen=True)
class Atom:
    t: float
    theta: float

    def __post_init__(self):
        if not self.t > 0:
            raise ValueError(f"atom time must be positive, got {self.t!r}")
        if not self.theta >= 0:
            raise ValueError(f"atom mark must be nonnegative, got {self.theta!r}")


class Configuration(tuple):
    """Time-ordered tuple of atoms with distinct times."""

    def __new__(cls, atoms: Iterable[Atom | tuple] = ()):
        items = sorted((a if isinstance(a, Atom) else Atom(*a) for a in atoms), key=lambda a: a.t)
        for a, b in zip(items, items[1:]):
            if a.t == b.t:
                raise ValueError(f"two atoms share time {a.t!r}")
        return super().__new__(cls, items)

    @property
    def times(self) -> np.ndarray:
        return np.array([a.t for a in self], dtype=float)


def accepted(config: Sequence[Atom], params: ModelParams) -> list[bool]:
    """Acceptance flags, processing atoms in time order."""
    phi = params.kernel.evaluate
    flags: list[bool] = []
    kept: list[float] = []
    for atom in config:
        lam = params.mu + sum(phi(atom.t - s) for s in kept)
        ok = atom.theta <= lam
        flags.append(ok)
        if ok:
            kept.append(atom.t)
    return flags


def eval_intensity_config(config: Sequence[Atom], params: ModelParams, t: float) -> float:
    """lambda_t on the configuration: mu + sum of Phi(t - t_i) over accepted t_i < t."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    phi = params.kernel.evaluate
    total = params.mu
    for atom, ok in zip(config, accepted(config, params)):
        if ok and atom.t < t:
            total += phi(t - atom.t)
    return total


def eval_X_config(config: Sequence[Atom], params: ModelParams, zeta, t: float) -> float:
    """X^zeta_t on the configuration.

    zeta = one counts accepted atoms with t_k <= t (H is right-continuous);
    zeta = phi sums Phi(t - t_k) over accepted t_k < t (lambda is predictable).
    """
    z = _zeta(zeta)
    total = 0.0
    for atom, ok in zip(config, accepted(config, params)):
        if not ok:
            continue
        if z is Zeta.ONE and atom.t <= t:
            total += 1.0
        elif z is Zeta.PHI and atom.t < t:
            total += params.kernel.evaluate(t - atom.t)
    return total


def _subset_sum(functional: Callable[[Configuration], float], atoms: Sequence[Atom]):
    n = len(atoms)
    if n > MAX_DERIVATIVE_ORDER:
        raise ValueError(f"pathwise derivative limited to {MAX_DERIVATIVE_ORDER} atoms, got {n}")
    value = 0.0
    scale = 0.0
    for mask in range(1 << n):
        sub = Configuration(atoms[i] for i in range(n) if mask >> i & 1)
        term = functional(sub)
        sign = -1.0 if (n - len(sub)) % 2 else 1.0
        value = value + sign * term
        scale += float(np.sum(np.abs(term)))
    return value, scale


def pathwise_derivative(functional: Callable[[Configuration], float], atoms: Sequence[Atom]) -> float:
    """Sum over J subset of atoms of (-1)^{n-|J|} F(J)."""
    atoms = Configuration(atoms)
    return _subset_sum(functional, atoms)[0]


def _check_atoms(atoms, zeta: Zeta, t: float) -> Configuration:
    config = Configuration(atoms)
    if not config:
        raise ValueError("need at least one atom")
    last = config[-1].t
    if last > t or (zeta is Zeta.PHI and last >= t):
        raise ValueError(f"last atom time {last!r} must be <= t (< t for zeta=phi), t={t!r}")
    return config


def _reduced_coefficient(config: Configuration, params: ModelParams, zeta: Zeta, t: float):
    last = config[-1]
    lead = _zeta_value(zeta, params, t - last.t)

    def indicator(sub):
        return 1.0 if last.theta <= eval_intensity_config(sub, params, last.t) else 0.0

    value, scale = _subset_sum(indicator, config[:-1])
    return lead * value, abs(lead) * scale


def _acceptance_vector(sub: Configuration, config: Configuration, params: ModelParams) -> np.ndarray:
    """Indicator, per atom of ``config``, of being present and accepted in ``sub``."""
    out = np.zeros(len(config))
    for atom, ok in zip(sub, accepted(sub, params)):
        if ok:
            out[config.index(atom)] = 1.0
    return out


def coefficient_c_n(atoms: Sequence[Atom], params: ModelParams, zeta, t: float) -> float:
    """c_n^{zeta,t}(x_1..x_n), checked against its reduced form.

    Route (a) is the full n-fold pathwise derivative of X^zeta_t, taken atom
    by atom: X^zeta_t(J) = sum_k zeta(t - t_k) 1{k in J accepted}, so the
    subset sums are integers and weighting by zeta comes last.  Route (b) is
    zeta(t - t_n) times the (n-1)-fold derivative of 1{theta_n <= lambda_{t_n}}.
    """
    z = _zeta(zeta)
    config = _check_atoms(atoms, z, t)
    counts, _ = _subset_sum(lambda sub: _acceptance_vector(sub, config, params), config)
    weights = np.array([_zeta_value(z, params, t - a.t) for a in config])
    full = float(np.dot(weights, counts))
    reduced, scale = _reduced_coefficient(config, params, z, t)
    if abs(full - reduced) > _AGREEMENT_TOL * max(1.0, scale):
        raise ConsistencyError(f"c_n routes disagree: {full!r} vs {reduced!r}")
    return full


def _theta_integral_exact(config_times: Sequence[float], params: ModelParams, zeta: Zeta, t: float) -> float:
    """Integral of c_n over all marks, by exact piecewise-constant integration.

    The innermost mark uses int 1{theta <= a} dtheta = a, turning the indicator
    derivative into the derivative of lambda_{t_n}.  Each outer mark theta_k
    enters only through comparisons with lambda_{t_k}(K), K a sub-configuration
    of earlier atoms, so the integrand is constant between those breakpoints;
    it is evaluated at interval midpoints and must vanish past the largest.
    """
    times = list(config_times)
    n = len(times)
    lead = _zeta_value(zeta, params, t - times[-1])
    # theta_n is a placeholder; only marks of earlier atoms are read
    def innermost(thetas):
        prior = [Atom(times[i], thetas[i]) for i in range(n - 1)]
        value, _ = _subset_sum(lambda sub: eval_intensity_config(sub, params, times[-1]), prior)
        return lead * value

    def level(thetas):
        k = len(thetas)
        if k == n - 1:
            return innermost(thetas)
        prior = [Atom(times[i], thetas[i]) for i in range(k)]
        cuts = set()
        for mask in range(1 << k):
            sub = Configuration(prior[i] for i in range(k) if mask >> i & 1)
            cuts.add(eval_intensity_config(sub, params, times[k]))
        edges = [0.0] + sorted(cuts)
        total = 0.0
        for lo, hi in zip(edges, edges[1:]):
            if hi > lo:
                total += (hi - lo) * level(thetas + [0.5 * (lo + hi)])
        beyond = level(thetas + [edges[-1] + 1.0])
        if abs(beyond) > _AGREEMENT_TOL * max(1.0, abs(total)):
            raise ConsistencyError(f"c_n nonzero beyond its mark support ({beyond!r})")
        return total

    return level([])


def theta_integral_c_n(times: Sequence[float], params: ModelParams, zeta, t: float) -> float:
    """Integral of c_n^{zeta,t} over theta_1..theta_n.

    Returns the product form mu * zeta(t - t_n) * prod_{i>=2} Phi(t_i - t_{i-1}),
    after checking it against exact integration of the coefficient.
    """
    z = _zeta(zeta)
    ts = [float(x) for x in times]
    if not ts:
        raise ValueError("need at least one time")
    if any(b <= a for a, b in zip(ts, ts[1:])) or ts[0] <= 0:
        raise ValueError("times must be positive and strictly increasing")
    if ts[-1] > t or (z is Zeta.PHI and ts[-1] >= t):
        raise ValueError("last time must be <= t (< t for zeta=phi)")
    phi = params.kernel.evaluate
    closed = params.mu * _zeta_value(z, params, t - ts[-1])
    for a, b in zip(ts, ts[1:]):
        closed *= phi(b - a)
    exact = _theta_integral_exact(ts, params, z, t)
    if abs(exact - closed) > _AGREEMENT_TOL * max(1.0, abs(closed)):
        raise ConsistencyError(f"theta integral routes disagree: {exact!r} vs {closed!r}")
    return closed


def _forced_nodes(res: ResolventTable, forced_times: Sequence[float]) -> list[int]:
    ts = [float(x) for x in forced_times]
    if any(b <= a for a, b in zip(ts, ts[1:])):
        raise ValueError("forced times must be strictly increasing")
    return [res.index(x)[0] for x in ts]


def shifted_mean_intensity(params: ModelParams, res: ResolventTable, forced_times: Sequence[float],
                           t: float) -> float:
    """E[lambda_t] with atoms forced at ``forced_times``:

        mu (1 + I(t)) + sum_j Psi(t - t_j) 1{t >= t_j}
    """
    kt = res.index(t)[0]
    value = params.mu * (1.0 + float(res.cum[kt]))
    for kj in _forced_nodes(res, forced_times):
        if kt >= kj:
            value += float(res.psi[kt - kj])
    return value


def shifted_mean_X(params: ModelParams, res: ResolventTable, zeta, forced_times: Sequence[float],
                   t: float) -> float:
    """E[X^zeta_t] with atoms forced at times t_1 < ... < t_n < t:

        int_0^t zeta(t-u) phi(u) du + sum_i zeta(t - t_i),
        phi(u) = mu (1 + I(u)) + sum_j Psi(u - t_j) 1{u >= t_j}.

    Each shift term is integrated on [t_j, t] separately, since phi jumps at t_j.
    """
    z = _zeta(zeta)
    kt = res.index(t)[0]
    nodes_f = _forced_nodes(res, forced_times)
    if any(kj >= kt for kj in nodes_f):
        raise ValueError("forced times must be strictly below t")
    h = res.step
    if z is Zeta.ONE:
        weight = np.ones(kt + 1)
    else:
        weight = params.kernel.evaluate(h * np.arange(kt, -1, -1))  # zeta(t - u_k)
    value = params.mu * _trap(weight * (1.0 + res.cum[:kt + 1]), h)
    for kj in nodes_f:
        value += _trap(weight[kj:] * res.psi[:kt - kj + 1], h)
        value += float(weight[kj])
    return value


def _trap(values, h):
    return float(np.trapezoid(values, dx=h)) if len(values) > 1 else 0.0


@dataclass(frozen=True, eq=False)
class ChaosExpansion:
    value: float
    terms: np.ndarray
    truncation_bound: float


def expectation_via_chaos(params: ModelParams, t: float, zeta, N: int, grid: Grid | None = None) -> ChaosExpansion:
    """Truncated chaos series for E[X^zeta_t]:

        mu * sum_{n=1}^{N} int_0^t zeta(t-u) A_n(u) du,
        A_1 = 1,  A_n(u) = int_0^u Phi_{n-1}(r) dr,

    each simplex integral reduced to an iterated convolution.  The dropped
    tail is at most mu t ||Phi||^N / (1 - ||Phi||) for zeta = one and
    mu ||Phi||^{N+1} / (1 - ||Phi||) for zeta = phi.
    """
    z = _zeta(zeta)
    if int(N) != N or N < 1:
        raise ValueError("truncation order N must be a positive integer")
    if grid is None:
        grid = Grid.covering(t)
    kt = grid.index(t)[0]
    h = grid.step
    phi = params.kernel.evaluate(grid.nodes[:kt + 1])
    weight = np.ones(kt + 1) if z is Zeta.ONE else phi[::-1]
    terms = np.empty(int(N))
    terms[0] = params.mu * _trap(weight, h)
    phi_n = phi.copy()  # Phi_{n-1} for the n-th term
    for n in range(2, int(N) + 1):
        terms[n - 1] = params.mu * _trap(weight * cumulative_trapezoid(phi_n, h), h)
        if n < N:
            phi_n = trapezoid_convolve(phi, phi_n, h)
    norm = params.kernel.l1_norm
    if z is Zeta.ONE:
        bound = params.mu * t * norm ** N / (1.0 - norm)
    else:
        bound = params.mu * norm ** (N + 1) / (1.0 - norm)
    total = float(math.fsum(terms))
    return ChaosExpansion(total, terms, bound)
