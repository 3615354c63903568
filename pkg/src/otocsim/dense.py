"""Dense Hilbert-space reference engine for small systems.

Builds explicit 2^n-dimensional matrices and evaluates OTO correlators
directly from their definition.  Used to validate the determinantal engines;
guarded to small qubit counts.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy.linalg import expm

from .circuits import Circuit, GaussianLayer, InteractionLayer
from .modes import validate_mode_tuple

MAX_DENSE_QUBITS = 12
MAX_AMPLITUDE_QUBITS = 6

_I2 = np.eye(2, dtype=complex)
_PAULI = {
    "I": _I2,
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def pauli_matrix(letters: str) -> np.ndarray:
    """Dense matrix of a Pauli string; the first letter acts on qubit 1."""
    out = np.array([[1.0 + 0.0j]])
    for ch in letters:
        out = np.kron(out, _PAULI[ch])
    return out


def majorana_mode_matrix(mu: int, n: int) -> np.ndarray:
    """Dense matrix of Majorana mode ``mu`` (1-based) on ``n`` qubits."""
    if not 1 <= mu <= 2 * n:
        raise ValueError(f"mode {mu} outside [1, {2 * n}]")
    j, rem = divmod(mu - 1, 2)
    letters = "Z" * j + ("X" if rem == 0 else "Y") + "I" * (n - j - 1)
    return pauli_matrix(letters)


def configuration_matrix(config, n: int) -> np.ndarray:
    """Dense ordered product of Majorana modes."""
    config = validate_mode_tuple(config, 2 * n)
    out = np.eye(2**n, dtype=complex)
    for mu in config:
        out = out @ majorana_mode_matrix(mu, n)
    return out


def _quadratic_form_matrix(h: np.ndarray, n: int) -> np.ndarray:
    """Dense matrix of sum_{mu,nu} h[mu,nu] c_mu c_nu."""
    dim = 2**n
    out = np.zeros((dim, dim), dtype=complex)
    modes = [majorana_mode_matrix(mu, n) for mu in range(1, 2 * n + 1)]
    for a in range(2 * n):
        for b in range(2 * n):
            if h[a, b] != 0.0:
                out += h[a, b] * (modes[a] @ modes[b])
    return out


def dense_layer_unitary(layer, n: int) -> np.ndarray:
    """Dense unitary of one circuit layer on ``n`` qubits."""
    if isinstance(layer, GaussianLayer):
        gen = layer.generator
        if gen.nu_values is not None:
            # Build from the spin Hamiltonian so this path stays independent
            # of the quadratic-form bookkeeping used by the fermionic engines.
            h_spin = _dense_xy_hamiltonian(gen.nu_values, n)
            return expm(-1j * gen.duration * h_spin)
        return expm(gen.duration * _quadratic_form_matrix(gen.h, n))
    if isinstance(layer, InteractionLayer):
        u = np.eye(2**n, dtype=complex)
        for j in layer.positions:
            zz = pauli_matrix("I" * (j - 1) + "ZZ" + "I" * (n - j - 1))
            u = (np.cos(np.pi / 4) * np.eye(2**n) - 1j * np.sin(np.pi / 4) * zz) @ u
        return u
    raise TypeError(f"unknown layer type {type(layer)!r}")


def _dense_xy_hamiltonian(nu_values, n: int) -> np.ndarray:
    dim = 2**n
    h = np.zeros((dim, dim), dtype=complex)
    for j in range(1, n):
        for p in ("X", "Y"):
            h += pauli_matrix("I" * (j - 1) + p + p + "I" * (n - j - 1))
    for j in range(1, n + 1):
        h += nu_values[j - 1] * pauli_matrix("I" * (j - 1) + "Z" + "I" * (n - j))
    return h


def dense_evolve(circuit: Circuit) -> np.ndarray:
    """Total circuit unitary, first layer applied first (rightmost factor)."""
    if circuit.n > MAX_DENSE_QUBITS:
        raise ValueError(
            f"dense evolution limited to {MAX_DENSE_QUBITS} qubits, got {circuit.n}"
        )
    u = np.eye(2**circuit.n, dtype=complex)
    for layer in circuit.layers:
        u = dense_layer_unitary(layer, circuit.n) @ u
    return u


def dense_otoc(u_total: np.ndarray, a_mat: np.ndarray, b_mat: np.ndarray) -> float:
    """OTO correlator of A against the evolved B(t) = U B U^dagger.

    Evaluates both the commutator-Frobenius form and the trace form and
    insists they agree to 1e-10; a mismatch signals an internal inconsistency
    (non-unitary input or non-Pauli normalization).
    """
    d = a_mat.shape[0]
    b_t = u_total @ b_mat @ u_total.conj().T
    comm = a_mat @ b_t - b_t @ a_mat
    from_comm = float(np.linalg.norm(comm, "fro") / np.sqrt(4 * d))
    tr = np.trace(a_mat @ b_t @ a_mat @ b_t) / d
    c2 = 0.5 * (1.0 - tr.real)
    if abs(tr.imag) > 1e-10:
        raise ArithmeticError(f"OTOC trace has imaginary part {tr.imag:.3e}")
    from_trace = float(np.sqrt(max(c2, 0.0)))
    if abs(from_comm - from_trace) > 1e-10:
        raise ArithmeticError(
            f"OTOC forms disagree: {from_comm!r} vs {from_trace!r}"
        )
    return from_comm


def dense_majorana_amplitudes(
    u_total: np.ndarray, alpha, n: int, orientation: str = "heisenberg"
) -> dict[tuple[int, ...], complex]:
    """Expansion of a conjugated configuration over all configurations.

    For ``orientation="heisenberg"`` expands U C_alpha U^dagger; for
    ``"schrodinger"`` expands U^dagger C_alpha U.  Returns a dict mapping
    configurations to complex coefficients (entries below 1e-12 dropped).
    """
    if n > MAX_AMPLITUDE_QUBITS:
        raise ValueError(
            f"amplitude expansion limited to {MAX_AMPLITUDE_QUBITS} qubits, got {n}"
        )
    c_alpha = configuration_matrix(alpha, n)
    if orientation == "heisenberg":
        x = u_total @ c_alpha @ u_total.conj().T
    elif orientation == "schrodinger":
        x = u_total.conj().T @ c_alpha @ u_total
    else:
        raise ValueError(f"unknown orientation {orientation!r}")
    d = 2**n
    out: dict[tuple[int, ...], complex] = {}
    for k in range(2 * n + 1):
        for config in itertools.combinations(range(1, 2 * n + 1), k):
            coeff = complex(np.trace(configuration_matrix(config, n).conj().T @ x) / d)
            if abs(coeff) > 1e-12:
                out[config] = coeff
    return out


def dense_lightcone(circuit: Circuit, a_site: int, times_per_row: bool = True):
    """Reference OTOC grid: evolve X at ``a_site`` and probe Z at every site.

    Returns (times, values) with one row per stroboscopic step (a Gaussian
    layer plus any immediately following interaction layers), preceded by a
    t = 0 row.  ``times`` are cumulative Gaussian durations.
    """
    n = circuit.n
    if n > MAX_DENSE_QUBITS:
        raise ValueError(f"dense lightcone limited to {MAX_DENSE_QUBITS} qubits")
    x_mat = pauli_matrix("I" * (a_site - 1) + "X" + "I" * (n - a_site))
    z_mats = [pauli_matrix("I" * (s - 1) + "Z" + "I" * (n - s)) for s in range(1, n + 1)]

    rows = []
    times = []
    u = np.eye(2**n, dtype=complex)

    def record(t: float) -> None:
        rows.append([dense_otoc(u, z, x_mat) for z in z_mats])
        times.append(t)

    t = 0.0
    chunks = _stroboscopic_chunks(circuit.layers)
    for pre in chunks.pop(0):
        u = dense_layer_unitary(pre, n) @ u
    record(t)
    for chunk in chunks:
        for layer in chunk:
            if isinstance(layer, GaussianLayer):
                t += layer.generator.duration
            u = dense_layer_unitary(layer, n) @ u
        record(t)
    return np.array(times), np.array(rows)


def _stroboscopic_chunks(layers):
    """Group layers into [pre-chunk, step, step, ...].

    Each step holds exactly one Gaussian layer plus the interaction layers
    immediately following it; leading interaction layers (rare) form the
    pre-chunk applied before the t = 0 row.
    """
    chunks: list[list] = [[]]
    for layer in layers:
        if isinstance(layer, GaussianLayer):
            chunks.append([layer])
        else:
            chunks[-1].append(layer)
    return chunks
