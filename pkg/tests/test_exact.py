"""Exact configuration-series engine vs the dense reference."""

from __future__ import annotations

import numpy as np
import pytest

import otocsim.exact as exact_mod
from otocsim.circuits import build_gated_circuit, draw_disorder
from otocsim.dense import dense_evolve, dense_lightcone, dense_otoc, pauli_matrix
from otocsim.exact import (
    MAX_EXACT_GATES,
    ComplexityBudgetError,
    exact_lightcone,
    exact_otoc,
    thread_count,
)
from otocsim.gaussian import gaussian_otoc


def random_circuit(rng, n, g, nu, dt=0.6, steps=4):
    nu_values = rng.uniform(-nu, nu, size=n)
    gates = []
    attempts = 0
    while len(gates) < g and attempts < 200:
        attempts += 1
        step = int(rng.integers(1, steps + 1))
        qubit = int(rng.integers(1, n))
        if any(st == step and abs(q - qubit) <= 1 for q, st in gates):
            continue
        gates.append((qubit, step))
    return build_gated_circuit(n, nu_values, dt, steps, gates)


def strings(n, a, s):
    a_string = "I" * (a - 1) + "X" + "I" * (n - a)
    b_string = "I" * (s - 1) + "Z" + "I" * (n - s)
    return a_string, b_string


class TestAgainstDense:
    @pytest.mark.parametrize("g", [0, 1, 2, 3])
    def test_matches_dense_reference(self, g, rng):
        # Volume coverage lives in the acceptance suite; keep the three-gate
        # series (the most expensive path) to a couple of probe sites here.
        trials = 2 if g == 3 else 4
        for trial in range(trials):
            n = int(rng.integers(2, 6))
            nu = float(rng.uniform(0, 4))
            circuit = random_circuit(rng, n, g, nu)
            u_total = dense_evolve(circuit)
            a = n // 2
            sites = range(1, n + 1) if g < 3 else [1, n]
            for s in sites:
                a_string, b_string = strings(n, a, s)
                got = exact_otoc(circuit, b_string, a_string)
                want = dense_otoc(u_total, pauli_matrix(b_string), pauli_matrix(a_string))
                assert got == pytest.approx(want, abs=1e-9), (n, g, s)

    def test_gateless_circuit_equals_free_formula(self, rng):
        from otocsim.circuits import exponentiate_generator

        n = 5
        circuit = random_circuit(rng, n, 0, 2.0)
        u = np.eye(2 * n)
        for layer in circuit.layers:
            u = exponentiate_generator(layer.generator) @ u
        a, s = 2, 4
        a_string, b_string = strings(n, a, s)
        got = exact_otoc(circuit, a_string, b_string)
        want = gaussian_otoc(u, tuple(range(1, 2 * a)), (2 * s - 1, 2 * s))
        assert got == pytest.approx(want, abs=1e-12)

    def test_lightcone_matches_dense_grid(self, rng):
        n = 5
        circuit = random_circuit(rng, n, 2, 3.0)
        times_e, values_e = exact_lightcone(circuit, a_site=3)
        times_d, values_d = dense_lightcone(circuit, a_site=3)
        assert np.allclose(times_e, times_d)
        assert np.max(np.abs(values_e - values_d)) < 1e-9

    def test_probe_string_validation(self, rng):
        circuit = random_circuit(rng, 4, 1, 1.0)
        with pytest.raises(ValueError):
            exact_otoc(circuit, "IXI", "ZIII")


class TestBudget:
    def test_gate_budget_guard(self, rng):
        n = 8
        nu_values = rng.uniform(-1, 1, size=n)
        gates = [(1, 1), (3, 1), (5, 1), (7, 1), (2, 2), (4, 2), (6, 2)]
        circuit = build_gated_circuit(n, nu_values, 0.5, 2, gates)
        assert circuit.gate_count == 7 > MAX_EXACT_GATES
        with pytest.raises(ComplexityBudgetError):
            exact_otoc(circuit, "I" * 7 + "X", "Z" + "I" * 7)
        with pytest.raises(ComplexityBudgetError):
            exact_lightcone(circuit)

    def test_budget_override(self, rng):
        circuit = random_circuit(rng, 4, 2, 1.0)
        with pytest.raises(ComplexityBudgetError):
            exact_otoc(circuit, "XIII", "ZIII", max_gates=1)


class TestNumericalPaths:
    def test_low_rank_fallback_agrees(self, rng, monkeypatch):
        """Forcing the rank-revealing fallback must not change any value."""
        n = 5
        circuit = random_circuit(rng, n, 2, 2.5)
        baseline = exact_lightcone(circuit, a_site=3)[1]
        monkeypatch.setattr(exact_mod, "SCHUR_MIN_SINGULAR", np.inf)
        forced = exact_lightcone(circuit, a_site=3)[1]
        assert np.max(np.abs(baseline - forced)) < 1e-9

    def test_values_clamped_to_unit_interval(self, rng):
        circuit = random_circuit(rng, 6, 2, 4.0)
        _, values = exact_lightcone(circuit, a_site=3)
        assert np.all(values >= 0.0)
        assert np.all(values <= 1.0 + 1e-12)


class TestThreadCount:
    def test_env_override(self, monkeypatch):
        monkeypatch.setenv("OTOCSIM_THREADS", "3")
        assert thread_count() == 3
        assert thread_count(default=8) == 3

    def test_default_argument(self, monkeypatch):
        monkeypatch.delenv("OTOCSIM_THREADS", raising=False)
        assert thread_count(default=2) == 2
        assert thread_count() >= 1
