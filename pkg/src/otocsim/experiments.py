"""Ensemble experiments: disorder averages, threshold scans, profile analysis.

All ensemble reductions run realization-by-realization in a deterministic
order (results are gathered by realization index before averaging), so
outputs are bitwise independent of the worker-thread count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .approx import DEFAULT_EPSILON, compute_lightcone
from .circuits import build_alternating_circuit, build_gated_circuit, draw_disorder
from .dense import dense_lightcone
from .exact import exact_lightcone, thread_count

#: default start of the late-time fit window
DEFAULT_FIT_START = 11.0 * math.pi / 4.0

#: singular-value gaps below this make the principal vector ill-defined
DEGENERATE_GAP = 1e-12


@dataclass(frozen=True)
class LightconeGrid:
    """OTOC magnitudes on a (time, site) grid, plus provenance metadata."""

    times: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] != times.shape[0]:
            raise ValueError("values must be (len(times), n_sites)")
        if np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @property
    def n_sites(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class EnsembleSpec:
    """Parameters of one disorder-ensemble computation."""

    n: int
    nu: float
    dt: float
    periods: int
    realizations: int = 1
    epsilon: float = DEFAULT_EPSILON
    base_seed: int = 0
    a_site: int | None = None
    engine: str = "approx"  # approx | gaussian | exact | oracle
    gates: tuple[tuple[int, int], ...] = ()  # (qubit, step) pairs, exact engine

    def __post_init__(self) -> None:
        if self.engine not in ("approx", "gaussian", "exact", "oracle"):
            raise ValueError(f"unknown engine {self.engine!r}")
        if self.n < 2 or self.periods < 1 or self.realizations < 1:
            raise ValueError("need n >= 2, periods >= 1, realizations >= 1")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        object.__setattr__(self, "gates", tuple((int(q), int(s)) for q, s in self.gates))

    @property
    def center(self) -> int:
        return self.a_site if self.a_site is not None else self.n // 2


def realization_grid(spec: EnsembleSpec, index: int) -> tuple[np.ndarray, np.ndarray]:
    """(times, values) for one disorder realization under the chosen engine."""
    if spec.engine in ("approx", "gaussian"):
        times, values, _ = compute_lightcone(
            spec.n,
            spec.nu,
            spec.dt,
            spec.periods,
            epsilon=spec.epsilon,
            a_site=spec.center,
            base_seed=spec.base_seed,
            realization=index,
            include_interactions=spec.engine == "approx",
        )
        return times, values
    disorder = draw_disorder(spec.n, spec.nu, spec.base_seed, index)
    if spec.engine == "exact":
        circuit = build_gated_circuit(
            spec.n, disorder.nu_values, spec.dt, steps=2 * spec.periods, gates=spec.gates
        )
        return exact_lightcone(circuit, a_site=spec.center)
    circuit, _ = build_alternating_circuit(
        spec.n, spec.nu, spec.dt, spec.periods, disorder=disorder
    )
    return dense_lightcone(circuit, a_site=spec.center)


def run_ensemble(spec: EnsembleSpec, threads: int | None = None) -> LightconeGrid:
    """Disorder-averaged OTOC grid (mean of magnitudes over realizations).

    Realizations are seeded independently and reduced in index order, so the
    result does not depend on the number of worker threads.
    """
    workers = thread_count(threads)
    indices = list(range(spec.realizations))
    if workers == 1 or spec.realizations == 1:
        results = [realization_grid(spec, i) for i in indices]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda i: realization_grid(spec, i), indices))
    times = results[0][0]
    for t, _ in results[1:]:
        if t.shape != times.shape or np.max(np.abs(t - times)) > 1e-12:
            raise ArithmeticError("realizations disagree on the time grid")
    stack = np.stack([v for _, v in results])
    mean = stack.sum(axis=0) / float(spec.realizations)
    meta = {
        "engine": spec.engine,
        "n": spec.n,
        "nu": spec.nu,
        "dt": spec.dt,
        "periods": spec.periods,
        "epsilon": spec.epsilon,
        "realizations": spec.realizations,
        "base_seed": spec.base_seed,
        "a_site": spec.center,
        "gates": [list(g) for g in spec.gates],
    }
    return LightconeGrid(times=times, values=mean, meta=meta)


@dataclass(frozen=True)
class EpsilonScan:
    """Replacement-threshold scan against the dense reference."""

    eps_values: np.ndarray
    errors: np.ndarray
    eps_star: float | None
    depth: float
    flat: bool


def optimize_epsilon(
    n: int,
    nu: float,
    dt: float,
    periods: int,
    eps_values: Sequence[float],
    realizations: int,
    base_seed: int = 0,
    a_site: int | None = None,
    threads: int | None = None,
) -> EpsilonScan:
    """Scan the replacement threshold against the dense reference.

    For each realization the dense grid is computed once and compared with the
    approximate grid at every threshold; the per-pixel root-mean-square error
    is averaged over realizations.  The optimum is the interior local
    minimizer of the averaged curve (endpoints excluded); when the curve has
    no interior local minimum the scan is flagged flat.
    """
    eps_arr = np.array([float(e) for e in eps_values])
    if eps_arr.ndim != 1 or len(eps_arr) < 3 or np.any(np.diff(eps_arr) <= 0):
        raise ValueError("need an increasing grid of at least three thresholds")
    center = a_site if a_site is not None else n // 2

    def one_realization(index: int) -> np.ndarray:
        disorder = draw_disorder(n, nu, base_seed, index)
        circuit, _ = build_alternating_circuit(n, nu, dt, periods, disorder=disorder)
        _, dense_vals = dense_lightcone(circuit, a_site=center)
        errs = np.empty(len(eps_arr))
        for k, eps in enumerate(eps_arr):
            _, approx_vals, _ = compute_lightcone(
                n, nu, dt, periods, epsilon=eps, a_site=center, disorder=disorder
            )
            diff = approx_vals - dense_vals
            errs[k] = np.linalg.norm(diff) / math.sqrt(diff.size)
        return errs

    workers = thread_count(threads)
    indices = list(range(realizations))
    if workers == 1 or realizations == 1:
        rows = [one_realization(i) for i in indices]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(one_realization, indices))
    curve = np.stack(rows).sum(axis=0) / float(realizations)

    interior = np.arange(1, len(curve) - 1)
    i_star = int(interior[np.argmin(curve[interior])])
    is_local_min = curve[i_star] <= curve[i_star - 1] and curve[i_star] <= curve[i_star + 1]
    span = float(curve.max() - curve.min())
    if is_local_min and span > 0:
        left_barrier = float(np.max(curve[: i_star + 1]) - curve[i_star])
        right_barrier = float(np.max(curve[i_star:]) - curve[i_star])
        depth = min(left_barrier, right_barrier) / span
    else:
        depth = 0.0
    if is_local_min:
        return EpsilonScan(eps_arr, curve, float(eps_arr[i_star]), depth, False)
    return EpsilonScan(eps_arr, curve, None, 0.0, True)


@dataclass(frozen=True)
class PrincipalVectorFit:
    """Leading SVD pair of a grid plus late-time fits of the time profile."""

    sigma1: float
    u1: np.ndarray
    v1: np.ndarray
    degenerate: bool
    fit_start: float
    slope_semilog: float | None = None
    intercept_semilog: float | None = None
    r2_semilog: float | None = None
    slope_linear: float | None = None
    intercept_linear: float | None = None
    r2_linear: float | None = None


def _least_squares(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_res = float(resid @ resid)
    centered = y - y.mean()
    ss_tot = float(centered @ centered)
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    return float(slope), float(intercept), float(r2)


def svd_principal_vector(
    grid: LightconeGrid, fit_start: float = DEFAULT_FIT_START
) -> PrincipalVectorFit:
    """Rank-one profile of a grid and fits of its time dependence.

    The leading left-singular vector (sign-fixed to nonnegative mean) is
    regressed against log10(t) and against t over the window t >= fit_start.
    A near-degenerate leading singular pair is reported without fitting.
    """
    u, s, vt = np.linalg.svd(grid.values, full_matrices=False)
    u1, v1 = u[:, 0], vt[0, :]
    if u1.mean() < 0:
        u1, v1 = -u1, -v1
    gap = float(s[0] - s[1]) if len(s) > 1 else float("inf")
    if gap < DEGENERATE_GAP:
        return PrincipalVectorFit(
            sigma1=float(s[0]), u1=u1, v1=v1, degenerate=True, fit_start=fit_start
        )
    mask = (grid.times >= fit_start) & (grid.times > 0)
    if int(mask.sum()) < 3:
        raise ValueError("fit window contains fewer than three samples")
    t_win, y_win = grid.times[mask], u1[mask]
    slope_l10, icpt_l10, r2_l10 = _least_squares(np.log10(t_win), y_win)
    slope_lin, icpt_lin, r2_lin = _least_squares(t_win, y_win)
    return PrincipalVectorFit(
        sigma1=float(s[0]),
        u1=u1,
        v1=v1,
        degenerate=False,
        fit_start=fit_start,
        slope_semilog=slope_l10,
        intercept_semilog=icpt_l10,
        r2_semilog=r2_l10,
        slope_linear=slope_lin,
        intercept_linear=icpt_lin,
        r2_linear=r2_lin,
    )


def asymptotic_value(grid: LightconeGrid, site: int) -> float:
    """Largest OTOC magnitude ever reached at a given site (1-based)."""
    if not 1 <= site <= grid.n_sites:
        raise ValueError(f"site {site} outside grid with {grid.n_sites} sites")
    return float(grid.values[:, site - 1].max())


def support_width(row: np.ndarray, threshold: float = 0.1) -> int:
    """Number of sites in a grid row with magnitude above the threshold."""
    return int(np.count_nonzero(np.asarray(row) > threshold))
