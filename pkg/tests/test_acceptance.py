"""End-to-end acceptance suite.

Each test covers one numbered criterion and reports a single PASS/FAIL line
(with the measured numbers) in the pytest terminal summary.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
import time

import numpy as np
import pytest

from otocsim.approx import compute_lightcone, lightcone_from_circuit
from otocsim.circuits import (
    build_alternating_circuit,
    build_gated_circuit,
    build_xy_generator,
    draw_disorder,
    exponentiate_generator,
    local_rotation_matrix,
)
from otocsim.cli import _fmt, write_grid
from otocsim.dense import dense_evolve, dense_otoc, pauli_matrix
from otocsim.exact import exact_lightcone, exact_otoc
from otocsim.experiments import (
    EnsembleSpec,
    EpsilonScan,
    LightconeGrid,
    asymptotic_value,
    optimize_epsilon,
    run_ensemble,
    support_width,
    svd_principal_vector,
)
from otocsim.gaussian import boundary_weight, gaussian_otoc
from otocsim.modes import modified_cauchy_binet

from .conftest import record_criterion
from .oracles import edge_weight_sum, modified_cauchy_binet_sum, random_orthogonal

PAGE_PLATEAU = 1.0 / math.sqrt(2.0)
DT = math.pi / 4.0


def philox(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed))


def random_gated_circuit(rng, n, g, nu, dt=DT, steps=4):
    nu_values = rng.uniform(-nu, nu, size=n)
    gates, attempts = [], 0
    while len(gates) < g and attempts < 200:
        attempts += 1
        step = int(rng.integers(1, steps + 1))
        qubit = int(rng.integers(1, n))
        if any(st == step and abs(q - qubit) <= 1 for q, st in gates):
            continue
        gates.append((qubit, step))
    return build_gated_circuit(n, nu_values, dt, steps, gates)


def grid_csv_bytes(grid: LightconeGrid, tmp_path, name: str) -> bytes:
    path = tmp_path / name
    write_grid(grid, path, "csv")
    return path.read_bytes()


def scan_csv_bytes(scan: EpsilonScan) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["epsilon", "error"])
    for e, err in zip(scan.eps_values, scan.errors):
        writer.writerow([_fmt(e), _fmt(err)])
    return buf.getvalue().encode()


def envelope_edges(row: np.ndarray, threshold: float = 0.1):
    above = np.flatnonzero(row > threshold)
    if len(above) == 0:
        return None
    return int(above[0]), int(above[-1])


# ---------------------------------------------------------------------------
# Shared expensive computations (reused by criteria 7, 8, and 10)


SCAN_NUS = (0.5, 2.0, 3.0, 4.0)
SCAN_EPS = [0.05 * k for k in range(1, 20)]
SCAN_KW = dict(realizations=25, base_seed=42)
SCAN_PERIODS = 80

ENSEMBLE_NUS = (0.0, 0.5, 2.0)


def ensemble_spec(nu: float) -> EnsembleSpec:
    return EnsembleSpec(
        n=30, nu=nu, dt=DT, periods=8, realizations=100,
        epsilon=0.2, base_seed=5, engine="approx",
    )


GATED_N = 30
GATED_SEED = 1234
GATED_STEPS = 16
GATED_GATES = ((17, 6), (17, 12))  # qubit pair (17, 18) at t = 3*pi/2 and 3*pi


def build_two_gate_circuit():
    disorder = draw_disorder(GATED_N, 10.0, GATED_SEED, 0)
    return build_gated_circuit(GATED_N, disorder.nu_values, DT, GATED_STEPS, GATED_GATES)


@pytest.fixture(scope="session")
def epsilon_scans():
    scans = {}
    elapsed = -time.time()
    for nu in SCAN_NUS:
        scans[nu] = optimize_epsilon(
            6, nu, DT, SCAN_PERIODS, SCAN_EPS, threads=1, **SCAN_KW
        )
    elapsed += time.time()
    return scans, elapsed


@pytest.fixture(scope="session")
def transition_ensembles():
    grids = {}
    elapsed = -time.time()
    for nu in ENSEMBLE_NUS:
        grids[nu] = run_ensemble(ensemble_spec(nu), threads=1)
    elapsed += time.time()
    return grids, elapsed


@pytest.fixture(scope="session")
def gated_lightcones():
    circuit = build_two_gate_circuit()
    t0 = time.time()
    times_e, values_e = exact_lightcone(circuit)
    exact_seconds = time.time() - t0
    times_a, values_a, state = lightcone_from_circuit(circuit, epsilon=0.2)
    return {
        "times_exact": times_e,
        "values_exact": values_e,
        "exact_seconds": exact_seconds,
        "times_approx": times_a,
        "values_approx": values_a,
        "state": state,
    }


# ---------------------------------------------------------------------------
# Criteria


def test_criterion_01_exact_engine_matches_dense_reference():
    rng = philox(101)
    budget = 600.0
    t0 = time.time()
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(2, 7))
        g = int(rng.integers(0, 4))
        nu = float(rng.uniform(0.0, 5.0))
        circuit = random_gated_circuit(rng, n, g, nu)
        u_total = dense_evolve(circuit)
        center = n // 2
        probe = "I" * (center - 1) + "X" + "I" * (n - center)
        probe_mat = pauli_matrix(probe)
        for s in range(1, n + 1):
            evolving = "I" * (s - 1) + "Z" + "I" * (n - s)
            got = exact_otoc(circuit, probe, evolving)
            want = dense_otoc(u_total, probe_mat, pauli_matrix(evolving))
            worst = max(worst, abs(got - want))
    elapsed = time.time() - t0
    passed = worst <= 1e-8 and elapsed <= budget
    record_criterion(
        1,
        passed,
        f"max |exact - dense| = {worst:.2e} over 200 random gated circuits "
        f"(target <= 1e-8) in {elapsed:.0f}s (budget {budget:.0f}s)",
    )
    assert worst <= 1e-8
    assert elapsed <= budget


def test_criterion_02_free_engine_matches_dense_reference():
    rng = philox(202)
    worst = 0.0
    circuits = 0
    for k in range(21):
        n = int(rng.integers(2, 9))
        nu = float(rng.uniform(0.0, 4.0))
        dt = float(rng.uniform(0.2, 1.0))
        periods = int(rng.integers(1, 3))
        circuit, _ = build_alternating_circuit(
            n, nu, dt, periods, base_seed=k, include_interactions=False
        )
        u = np.eye(2 * n)
        for layer in circuit.layers:
            u = exponentiate_generator(layer.generator) @ u
        u_dense = dense_evolve(circuit)
        if k % 2 == 0:  # mix in a non-layer matchgate: a local Z rotation
            site = int(rng.integers(1, n + 1))
            u = local_rotation_matrix(site, 2 * n) @ u
            from scipy.linalg import expm

            z = pauli_matrix("I" * (site - 1) + "Z" + "I" * (n - site))
            u_dense = expm(-1j * math.pi / 4 * z) @ u_dense
        circuits += 1
        for a in range(1, n + 1):
            b_mat = pauli_matrix("I" * (a - 1) + "X" + "I" * (n - a))
            alpha = tuple(range(1, 2 * a))
            for s in range(1, n + 1):
                a_mat = pauli_matrix("I" * (s - 1) + "Z" + "I" * (n - s))
                got = gaussian_otoc(u, alpha, (2 * s - 1, 2 * s))
                want = dense_otoc(u_dense, a_mat, b_mat)
                worst = max(worst, abs(got - want))
    passed = worst <= 1e-10 and circuits >= 20
    record_criterion(
        2,
        passed,
        f"max |free-engine - dense| = {worst:.2e} over {circuits} matchgate-only "
        f"circuits, all site pairs, n up to 8 (target <= 1e-10)",
    )
    assert circuits >= 20
    assert worst <= 1e-10


def test_criterion_03_pinned_block_determinant_identity():
    rng = philox(303)
    worst = 0.0
    checked = 0
    parity_mixed = 0
    for m in (4, 6, 8, 10):
        for _ in range(5):
            u1 = random_orthogonal(m, rng)
            u2 = random_orthogonal(m, rng)
            cut_l = int(rng.integers(0, m // 2))
            cut_r = int(rng.integers(cut_l + 2, m + 1))
            b_left = tuple(range(1, cut_l + 1))
            b_right = tuple(range(cut_r + 1, m + 1))
            middle = list(range(cut_l + 1, cut_r + 1))
            for n_s, n_sp in itertools.product((0, 1, 2), repeat=2):
                if n_s > len(middle) or n_sp > len(middle):
                    continue
                s_rows = tuple(sorted(rng.choice(middle, size=n_s, replace=False)))
                s_cols = tuple(sorted(rng.choice(middle, size=n_sp, replace=False)))
                ka = int(rng.integers(n_sp, m + 1))
                kg = ka - n_sp + n_s
                if kg > m:
                    continue
                alpha = tuple(sorted(rng.choice(m, size=ka, replace=False) + 1))
                gamma = tuple(sorted(rng.choice(m, size=kg, replace=False) + 1))
                got = modified_cauchy_binet(
                    u1, u2, alpha, gamma, s_cols, s_rows, b_left, b_right
                )
                want = modified_cauchy_binet_sum(
                    u1, u2, alpha, gamma, s_cols, s_rows, b_left, b_right
                )
                worst = max(worst, abs(got - want))
                checked += 1
                if (n_s + n_sp) % 2 == 1 and b_left:
                    parity_mixed += 1
    passed = worst <= 1e-10 and checked >= 100 and parity_mixed > 0
    record_criterion(
        3,
        passed,
        f"block determinant vs exhaustive subset sum: max dev = {worst:.2e} over "
        f"{checked} cases on orthogonal pairs up to 10x10 "
        f"({parity_mixed} opposite-parity sign-flip cases; target <= 1e-10)",
    )
    assert checked >= 100
    assert parity_mixed > 0
    assert worst <= 1e-10


def test_criterion_04_edge_weight_two_determinant_form():
    rng = philox(404)
    worst = 0.0
    checked = 0
    for n in range(2, 7):
        for trial in range(3):
            nu = float(rng.uniform(0.0, 5.0))
            dt = float(rng.uniform(0.3, 1.0))
            circuit, _ = build_alternating_circuit(
                n, nu, dt, periods=2, base_seed=40 + trial, include_interactions=False
            )
            u = np.eye(2 * n)
            for layer in circuit.layers:
                u = exponentiate_generator(layer.generator) @ u
            a = max(1, n // 2)
            alpha = tuple(range(1, 2 * a))  # X at the center: odd size
            mid = n // 2
            for s in range(1, n + 1):
                got_sq = boundary_weight(u, alpha, s, n) ** 2
                want_parts = []
                if s >= mid:
                    want_parts.append(edge_weight_sum(u, alpha, s, n, "right"))
                if s <= mid:
                    want_parts.append(edge_weight_sum(u, alpha, s, n, "left"))
                want_sq = max(want_parts)
                worst = max(worst, abs(got_sq - want_sq))
                checked += 1
    passed = worst <= 1e-10
    record_criterion(
        4,
        passed,
        f"squared edge weight, closed form vs exhaustive sum: max dev = {worst:.2e} "
        f"over {checked} (circuit, site) cases with n <= 6 (target <= 1e-10)",
    )
    assert worst <= 1e-10


def test_criterion_05_threshold_scan_has_interior_minimum(epsilon_scans):
    scans, elapsed = epsilon_scans
    budget = 1800.0
    details = []
    ok = elapsed <= budget
    for nu in (2.0, 3.0, 4.0):
        scan = scans[nu]
        in_range = (
            not scan.flat
            and scan.eps_star is not None
            and 0.15 <= scan.eps_star <= 0.45
        )
        ok = ok and in_range
        details.append(f"nu={nu:g}: eps*={scan.eps_star}")
    shallow = scans[0.5].depth < 0.10
    ok = ok and shallow
    details.append(f"nu=0.5: depth={scans[0.5].depth:.3f}")
    record_criterion(
        5,
        ok,
        f"{'; '.join(details)} (minimizers must lie in [0.15, 0.45]; weak-disorder "
        f"depth < 0.10) in {elapsed:.0f}s (budget {budget:.0f}s)",
    )
    for nu in (2.0, 3.0, 4.0):
        assert not scans[nu].flat
        assert 0.15 <= scans[nu].eps_star <= 0.45
    assert scans[0.5].depth < 0.10
    assert elapsed <= budget


def test_criterion_06_two_gate_lightcone_envelope(gated_lightcones):
    data = gated_lightcones
    exact_seconds = data["exact_seconds"]
    assert np.allclose(data["times_exact"], data["times_approx"])
    worst_dev = 0
    rows = 0
    for row_e, row_a in zip(data["values_exact"], data["values_approx"]):
        edges_e = envelope_edges(row_e)
        edges_a = envelope_edges(row_a)
        rows += 1
        if edges_e is None and edges_a is None:
            continue
        if edges_e is None or edges_a is None:
            worst_dev = GATED_N
            continue
        worst_dev = max(
            worst_dev, abs(edges_e[0] - edges_a[0]), abs(edges_e[1] - edges_a[1])
        )
    passed = exact_seconds <= 60.0 and worst_dev <= 2
    record_criterion(
        6,
        passed,
        f"exact n=30 two-gate grid in {exact_seconds:.1f}s (budget 60s); "
        f"replacement-engine envelope within {worst_dev} site(s) of exact over "
        f"{rows} time slices (allowed 2)",
    )
    assert exact_seconds <= 60.0
    assert worst_dev <= 2


def test_criterion_07_disorder_transition_at_fixed_site(transition_ensembles):
    grids, elapsed = transition_ensembles
    budget = 3600.0
    site = 25
    values = {nu: asymptotic_value(grids[nu], site) for nu in ENSEMBLE_NUS}
    clean_ok = abs(values[0.0] - PAGE_PLATEAU) <= 0.05
    weak_ok = abs(values[0.5] - PAGE_PLATEAU) <= 0.05
    strong_ok = values[2.0] < PAGE_PLATEAU - 0.05
    passed = clean_ok and weak_ok and strong_ok and elapsed <= budget
    record_criterion(
        7,
        passed,
        f"site-25 plateau: nu=0 -> {values[0.0]:.4f}, nu=0.5 -> {values[0.5]:.4f} "
        f"(within 0.05 of {PAGE_PLATEAU:.4f}); nu=2 -> {values[2.0]:.4f} "
        f"(< {PAGE_PLATEAU - 0.05:.4f}) in {elapsed:.0f}s (budget {budget:.0f}s)",
    )
    assert clean_ok, values
    assert weak_ok, values
    assert strong_ok, values
    assert elapsed <= budget


def test_criterion_08_log_time_spreading_fits(transition_ensembles):
    grids, _ = transition_ensembles
    fit_strong = svd_principal_vector(grids[2.0])
    fit_clean = svd_principal_vector(grids[0.0])
    strong_ok = fit_strong.r2_semilog >= 0.95
    gap = fit_clean.r2_linear - fit_clean.r2_semilog
    clean_ok = gap >= 0.10
    passed = strong_ok and clean_ok
    record_criterion(
        8,
        passed,
        f"nu=2 log-time fit R^2 = {fit_strong.r2_semilog:.3f} (needs >= 0.95); "
        f"nu=0 linear-over-log R^2 gap = {gap:.3f} (needs >= 0.10; the clean "
        f"cone saturates the chain before the fit window, so both fits track "
        f"a flat trace and the gap stays small)",
    )
    assert strong_ok
    assert clean_ok, (
        f"disorder-free gap {gap:.3f} < 0.10: once the ballistic front has "
        f"crossed the whole chain before the fit window opens, linear and "
        f"log-time fits describe the saturated trace equally well"
    )


def test_criterion_09_no_interaction_support_stops_growing():
    spec = EnsembleSpec(
        n=40, nu=1.0, dt=DT, periods=16, realizations=25,
        epsilon=0.2, base_seed=11, engine="gaussian",
    )
    grid = run_ensemble(spec, threads=1)
    widths = np.array([support_width(row) for row in grid.values])
    quarter = len(widths) // 4
    second = float(widths[quarter: 2 * quarter].mean())
    final = float(widths[3 * quarter:].mean())
    growth = final - second
    passed = growth < 2.0
    record_criterion(
        9,
        passed,
        f"interaction-free support width: second quarter {second:.1f} sites, "
        f"final quarter {final:.1f} sites, growth {growth:.2f} (< 2 required)",
    )
    assert growth < 2.0


def test_criterion_10_thread_count_leaves_output_bytes_unchanged(
    epsilon_scans, transition_ensembles, gated_lightcones, tmp_path
):
    scans, _ = epsilon_scans
    grids, _ = transition_ensembles
    mismatches = []

    for nu in SCAN_NUS:
        rerun = optimize_epsilon(6, nu, DT, SCAN_PERIODS, SCAN_EPS, threads=2, **SCAN_KW)
        if scan_csv_bytes(scans[nu]) != scan_csv_bytes(rerun):
            mismatches.append(f"threshold scan nu={nu:g}")

    for nu in ENSEMBLE_NUS:
        rerun = run_ensemble(ensemble_spec(nu), threads=2)
        a = grid_csv_bytes(grids[nu], tmp_path, f"ens_{nu}_t1.csv")
        b = grid_csv_bytes(rerun, tmp_path, f"ens_{nu}_t2.csv")
        if a != b:
            mismatches.append(f"ensemble nu={nu:g}")

    circuit = build_two_gate_circuit()
    times_e, values_e = exact_lightcone(circuit)
    _, values_a, _ = lightcone_from_circuit(circuit, epsilon=0.2)
    first = grid_csv_bytes(
        LightconeGrid(times=times_e, values=values_e, meta={}), tmp_path, "exact2.csv"
    )
    prev = grid_csv_bytes(
        LightconeGrid(
            times=gated_lightcones["times_exact"],
            values=gated_lightcones["values_exact"],
            meta={},
        ),
        tmp_path,
        "exact1.csv",
    )
    if first != prev:
        mismatches.append("two-gate exact grid")
    if not np.array_equal(values_a, gated_lightcones["values_approx"]):
        mismatches.append("two-gate replacement grid")

    passed = not mismatches
    record_criterion(
        10,
        passed,
        "scan curves, ensembles, and two-gate grids byte-identical across thread "
        "counts" if passed else f"outputs differ: {', '.join(mismatches)}",
    )
    assert not mismatches
