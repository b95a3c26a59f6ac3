"""Exact simulation of Hawkes paths and Monte Carlo moment estimates.

Two independent simulators:

* ``simulate_hawkes``: immigration-birth (cluster) construction.  Immigrants
  are Poisson(mu) on [0, T]; an event at p spawns Poisson(int_0^{T-p} Phi)
  children at p + offset, offsets drawn from Phi restricted to [0, T-p].
* ``simulate_thinning``: Ogata thinning; needs a nonincreasing kernel so the
  intensity just after the current time dominates until the next event.

Each path i of a run with master seed ``seed`` draws from its own Philox
stream keyed on (seed, i), so results do not depend on how paths are split
across workers.  ``HAWKES_THREADS`` sets the worker count (default 1).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ._csv import write_rows
from .errors import HorizonError, UnsupportedKernelError
from .kernel import Kernel, ModelParams

__all__ = [
    "SimulatedPath",
    "McEstimate",
    "path_rng",
    "simulate_hawkes",
    "simulate_thinning",
    "simulate_shifted",
    "intensity_on_path",
    "sample_observables",
    "mc_moment_estimates",
    "mc_mean",
    "mc_covariance",
    "cluster_sizes",
    "write_paths_csv",
    "write_estimates_csv",
]

MC_QUANTITIES = (
    "mean_count",
    "mean_intensity",
    "cov_count",
    "cov_intensity",
    "cov_intensity_count",
    "cov_count_intensity",
)

_MASK64 = (1 << 64) - 1


def path_rng(seed: int, path_index: int) -> np.random.Generator:
    """Counter-based generator for path ``path_index`` of master ``seed``."""
    key = np.array([path_index & _MASK64, seed & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True, eq=False)
class SimulatedPath:
    events: np.ndarray
    horizon: float
    forced: np.ndarray = field(default=None)

    def __post_init__(self):
        ev = np.asarray(self.events, dtype=float)
        object.__setattr__(self, "events", ev)
        if self.forced is None:
            object.__setattr__(self, "forced", np.zeros(ev.size, dtype=bool))
        else:
            object.__setattr__(self, "forced", np.asarray(self.forced, dtype=bool))
        if self.forced.shape != ev.shape:
            raise ValueError("forced mask must match events")
        if ev.size and (ev[0] < 0 or ev[-1] > self.horizon):
            raise ValueError("events must lie in [0, T]")
        if np.any(np.diff(ev) < 0):
            raise ValueError("events must be sorted")

    def __len__(self):
        return self.events.size

    def count(self, t: float) -> int:
        """H_t: number of events in [0, t]."""
        return int(np.searchsorted(self.events, t, side="right"))

    def forced_times(self) -> np.ndarray:
        return self.events[self.forced]


@dataclass(frozen=True)
class McEstimate:
    value: float
    std_error: float
    n_paths: int
    seed: int

    def z_score(self, target: float) -> float:
        if self.std_error == 0:
            return 0.0 if self.value == target else math.inf
        return abs(self.value - target) / self.std_error


def _descendants(kernel: Kernel, roots: np.ndarray, T: float, rng: np.random.Generator):
    """All descendants (not the roots) on [0, T], with the index of their root."""
    out_t, out_root = [], []
    gen = np.asarray(roots, dtype=float)
    gen_root = np.arange(gen.size)
    while gen.size:
        counts = rng.poisson(kernel.cumulative(T - gen))
        total = int(counts.sum())
        if total == 0:
            break
        parents = np.repeat(gen, counts)
        uppers = T - parents
        children = np.minimum(parents + kernel.sample_offsets(rng, uppers), T)
        gen_root = np.repeat(gen_root, counts)
        gen = children
        out_t.append(children)
        out_root.append(gen_root)
    if not out_t:
        return np.empty(0), np.empty(0, dtype=int)
    return np.concatenate(out_t), np.concatenate(out_root)


def _branching(mu: float, kernel: Kernel, T: float, rng: np.random.Generator) -> np.ndarray:
    immigrants = rng.random(rng.poisson(mu * T)) * T
    kids, _ = _descendants(kernel, immigrants, T, rng)
    events = np.concatenate((immigrants, kids))
    events.sort(kind="stable")
    return events


def _check_T(T):
    if not (T > 0 and math.isfinite(T)):
        raise ValueError(f"horizon T must be positive and finite, got {T!r}")


def simulate_hawkes(params: ModelParams, T: float, seed: int, path_index: int = 0) -> SimulatedPath:
    """One Hawkes path on [0, T] by the cluster construction."""
    _check_T(T)
    rng = path_rng(seed, path_index)
    return SimulatedPath(_branching(params.mu, params.kernel, T, rng), float(T))


def simulate_shifted(params: ModelParams, T: float, forced_times: Sequence[float], seed: int,
                     path_index: int = 0) -> SimulatedPath:
    """Hawkes path with extra atoms forced at ``forced_times``.

    The path is a standard cluster path, plus the forced atoms, plus an
    independent descendant cluster rooted at each forced atom.  Forced atoms
    are always accepted.  The base path uses the same stream prefix as
    :func:`simulate_hawkes`, so with no forced times the two agree exactly.
    """
    _check_T(T)
    forced = np.asarray(forced_times, dtype=float).ravel()
    if forced.size:
        if np.any(np.diff(forced) <= 0):
            raise ValueError("forced times must be strictly increasing")
        if forced[0] <= 0 or forced[-1] > T:
            raise ValueError("forced times must lie in (0, T]")
    rng = path_rng(seed, path_index)
    base = _branching(params.mu, params.kernel, T, rng)
    kids, _ = _descendants(params.kernel, forced, T, rng)
    events = np.concatenate((base, forced, kids))
    flags = np.zeros(events.size, dtype=bool)
    flags[base.size:base.size + forced.size] = True
    order = np.argsort(events, kind="stable")
    return SimulatedPath(events[order], float(T), flags[order])


def simulate_thinning(params: ModelParams, T: float, seed: int, path_index: int = 0,
                      debug: bool = False) -> SimulatedPath:
    """One Hawkes path by thinning a dominating Poisson stream.

    With a nonincreasing kernel, mu + sum_{e <= u} Phi(u - e) bounds the
    intensity on (u, next event].  ``debug`` asserts that bound at every
    candidate.
    """
    _check_T(T)
    kernel = params.kernel
    if not kernel.nonincreasing:
        raise UnsupportedKernelError(
            "thinning needs a nonincreasing kernel; use simulate_hawkes for this kernel"
        )
    rng = path_rng(seed, path_index)
    mu = params.mu
    events: list[float] = []
    arr = np.empty(0)
    u = 0.0
    while True:
        bound = mu + (float(kernel.evaluate(u - arr).sum()) if arr.size else 0.0)
        u += rng.exponential(1.0 / bound)
        if u > T:
            break
        lam = mu + (float(kernel.evaluate(u - arr).sum()) if arr.size else 0.0)
        if debug:
            assert lam <= bound * (1 + 1e-12), (u, lam, bound)
        if rng.random() * bound <= lam:
            events.append(u)
            arr = np.asarray(events)
    return SimulatedPath(np.asarray(events, dtype=float), float(T))


def intensity_on_path(path: SimulatedPath, params: ModelParams, t: float) -> float:
    """lambda_t = mu + sum over events strictly before t of Phi(t - e)."""
    if t < 0 or t > path.horizon:
        raise HorizonError(f"t = {t!r} outside [0, {path.horizon!r}]")
    before = path.events[: int(np.searchsorted(path.events, t, side="left"))]
    if before.size == 0:
        return params.mu
    return params.mu + float(params.kernel.evaluate(t - before).sum())


def _path_row(events: np.ndarray, params: ModelParams, times: Sequence[float]) -> list[float]:
    # same quantities as SimulatedPath.count / intensity_on_path, minus validation
    ev_eval = params.kernel._eval
    row = [float(np.searchsorted(events, t, side="right")) for t in times]
    for t in times:
        before = events[: int(np.searchsorted(events, t, side="left"))]
        row.append(params.mu + float(ev_eval(t - before).sum()))
    return row


def _observables_chunk(args):
    params, T, times, seed, start, stop, forced, method = args
    rows = np.empty((stop - start, 2 * len(times)))
    for r, i in enumerate(range(start, stop)):
        if forced:
            path = simulate_shifted(params, T, forced, seed, i)
        elif method == "thinning":
            path = simulate_thinning(params, T, seed, i)
        else:
            path = simulate_hawkes(params, T, seed, i)
        rows[r] = _path_row(path.events, params, times)
    return rows


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("HAWKES_THREADS", "1")))
    except ValueError:
        return 1


def sample_observables(params: ModelParams, T: float, times: Sequence[float], n_paths: int,
                       seed: int, forced: Sequence[float] = (), method: str = "branching",
                       workers: int | None = None) -> np.ndarray:
    """Per-path samples, shape (n_paths, 2 * len(times)).

    Columns are H at each time, then lambda (left limit) at each time.
    """
    if method not in ("branching", "thinning"):
        raise ValueError(f"unknown simulation method {method!r}")
    times = [float(x) for x in times]
    if any(x < 0 or x > T for x in times):
        raise HorizonError("observation times must lie in [0, T]")
    forced = tuple(float(x) for x in forced)
    workers = _workers() if workers is None else max(1, int(workers))
    if workers == 1 or n_paths < 2 * workers:
        return _observables_chunk((params, T, times, seed, 0, n_paths, forced, method))
    bounds = np.linspace(0, n_paths, workers + 1).astype(int)
    jobs = [(params, T, times, seed, int(a), int(b), forced, method)
            for a, b in zip(bounds[:-1], bounds[1:])]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_observables_chunk, jobs))
    return np.vstack(parts)


def mc_mean(x: np.ndarray, seed: int = 0) -> McEstimate:
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 2:
        raise ValueError("need at least two paths")
    return McEstimate(float(x.mean()), float(x.std(ddof=1) / math.sqrt(n)), n, seed)


def mc_covariance(x: np.ndarray, y: np.ndarray, seed: int = 0) -> McEstimate:
    """Unbiased sample covariance; SE from the spread of centred products."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.size
    if n < 2:
        raise ValueError("need at least two paths")
    prod = (x - x.mean()) * (y - y.mean())
    value = float(prod.sum() / (n - 1))
    return McEstimate(value, float(prod.std(ddof=1) / math.sqrt(n)), n, seed)


def mc_moment_estimates(params: ModelParams, T: float, s: float, t: float, n_paths: int,
                        seed: int, method: str = "branching") -> dict[str, McEstimate]:
    """Monte Carlo counterparts of the closed-form moments at (s, t).

    ``mean_count`` and ``mean_intensity`` refer to time t.
    """
    if not 0 <= s <= t <= T:
        raise ValueError(f"need 0 <= s <= t <= T, got s={s!r}, t={t!r}, T={T!r}")
    if n_paths < 2:
        raise ValueError("n_paths must be at least 2")
    obs = sample_observables(params, T, (s, t), n_paths, seed, method=method)
    h_s, h_t, l_s, l_t = obs.T
    return {
        "mean_count": mc_mean(h_t, seed),
        "mean_intensity": mc_mean(l_t, seed),
        "cov_count": mc_covariance(h_s, h_t, seed),
        "cov_intensity": mc_covariance(l_s, l_t, seed),
        "cov_intensity_count": mc_covariance(l_s, h_t, seed),
        "cov_count_intensity": mc_covariance(h_s, l_t, seed),
    }


def cluster_sizes(kernel: Kernel, n_clusters: int, seed: int, horizon: float) -> np.ndarray:
    """Total progeny (root included) of ``n_clusters`` roots placed at time 0."""
    rng = path_rng(seed, 0)
    _, root = _descendants(kernel, np.zeros(n_clusters), horizon, rng)
    return 1 + np.bincount(root, minlength=n_clusters)


def write_paths_csv(paths: Iterable[SimulatedPath], path: str | Path) -> None:
    def rows():
        for pid, p in enumerate(paths):
            for e, f in zip(p.events, p.forced):
                yield pid, e, int(f)

    with open(path, "w", newline="") as fh:
        write_rows(fh, ("path_id", "event_time", "forced"), rows())


def write_estimates_csv(rows: Iterable[Sequence], path) -> None:
    """Rows of (quantity, s, t, mc_value, std_error, analytic, abs_z)."""
    header = ("quantity", "s", "t", "mc_value", "std_error", "analytic", "abs_z")
    if hasattr(path, "write"):
        write_rows(path, header, rows)
        return
    with open(path, "w", newline="") as fh:
        write_rows(fh, header, rows)
