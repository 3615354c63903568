"""Exact OTOC evaluation by summing over interaction-gate configurations.

Each interaction gate either leaves a Majorana configuration invariant (even
overlap with the gate's four modes) or maps it to the complementary odd
overlap with a phase of +/- i.  Recording the gate action on four ancilla
mode slots turns the full Heisenberg evolution into one enlarged
single-particle matrix; the OTO correlator then becomes a sum of minors of a
symmetric kernel over pairs of per-gate overlap configurations.  Cost grows
as 16**(2 g), so the gate count is guarded.
"""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .circuits import Circuit, GaussianLayer, InteractionLayer, exponentiate_generator
from .modes import interaction_image, jordan_wigner_encode, validate_mode_tuple

#: configuration sums beyond this many gates are refused
MAX_EXACT_GATES = 6

#: pair batches are evaluated in fixed-size chunks (fixed => reproducible sums)
DET_CHUNK = 16384

#: assembled matrices must stay orthogonal to this tolerance
ASSEMBLY_ORTHO_TOL = 1e-9


class ComplexityBudgetError(RuntimeError):
    """Raised when a requested exact summation is too large to attempt."""


@dataclass
class AssembledEvolution:
    """Single-particle record of a circuit with gate actions on ancilla slots.

    ``matrix`` has shape (4g + 2n, 4g + 2n): the first 4g rows/columns are
    ancilla mode slots (most recent gate first), the rest the system modes.
    """

    matrix: np.ndarray
    n_system: int
    gate_count: int
    gate_sites: tuple[int, ...] = ()

    @property
    def ancilla_count(self) -> int:
        return 4 * self.gate_count

    def check(self) -> None:
        m = self.matrix
        drift = np.max(np.abs(m @ m.T - np.eye(m.shape[0])))
        if drift > ASSEMBLY_ORTHO_TOL:
            raise ArithmeticError(f"assembled matrix drifted from orthogonality by {drift:.3e}")


def new_assembly(n: int) -> AssembledEvolution:
    return AssembledEvolution(matrix=np.eye(2 * n), n_system=n, gate_count=0)


def absorb_gaussian(state: AssembledEvolution, u_layer: np.ndarray) -> AssembledEvolution:
    """Right-multiply the system block by a Gaussian layer's matrix."""
    q = state.ancilla_count
    if u_layer.shape != (2 * state.n_system,) * 2:
        raise ValueError("layer matrix size does not match the system")
    m = state.matrix.copy()
    m[:, q:] = m[:, q:] @ u_layer
    return AssembledEvolution(m, state.n_system, state.gate_count, state.gate_sites)


def extend_with_interaction(state: AssembledEvolution, j: int) -> AssembledEvolution:
    """Append one interaction gate on qubits (j, j+1) to the record.

    Four new ancilla slots are prepended.  Their rows pick out the gate's four
    current modes; the gate's columns are rerouted through the new slots so
    that later layers act on fresh modes.
    """
    n = state.n_system
    if not 1 <= j <= n - 1:
        raise ValueError(f"gate position {j} outside chain of {n} sites")
    q = state.ancilla_count
    m_tot = m_old = state.matrix.shape[0]
    gate_cols = [q + 2 * j - 2 + off for off in range(4)]  # 0-based current modes
    other_cols = [c for c in range(m_tot) if c not in gate_cols]

    m_new = np.zeros((m_old + 4, m_old + 4))
    for r, c in enumerate(gate_cols):
        m_new[r, 4 + c] = 1.0
    m_new[4:, 0:4] = state.matrix[:, gate_cols]
    m_new[np.ix_(range(4, 4 + m_old), [4 + c for c in other_cols])] = state.matrix[:, other_cols]
    out = AssembledEvolution(
        m_new, n, state.gate_count + 1, state.gate_sites + (j,)
    )
    out.check()
    return out


def assemble_circuit(circuit: Circuit, max_gates: int = MAX_EXACT_GATES) -> AssembledEvolution:
    """Fold a whole circuit into one assembled evolution record."""
    _guard_gate_count(circuit.gate_count, max_gates)
    state = new_assembly(circuit.n)
    for layer in circuit.layers:
        if isinstance(layer, GaussianLayer):
            state = absorb_gaussian(state, exponentiate_generator(layer.generator))
        elif isinstance(layer, InteractionLayer):
            for j in layer.positions:
                state = extend_with_interaction(state, j)
        else:
            raise TypeError(f"unknown layer type {type(layer)!r}")
    return state


def _guard_gate_count(g: int, max_gates: int) -> None:
    limit = min(max_gates, MAX_EXACT_GATES)
    if g > limit:
        raise ComplexityBudgetError(
            f"exact summation over {g} gates needs ~16**(2*{g}) = {16 ** (2 * g):.1e} "
            f"terms; the configured limit is {limit} gates"
        )


@dataclass
class KernelMatrix:
    """Symmetric kernel whose minors are the series terms.

    Row/column layout: 4g primal gate slots, then 4g image gate slots, then
    2n system modes.
    """

    k: np.ndarray
    gate_count: int
    n_system: int

    @property
    def q(self) -> int:
        return 4 * self.gate_count


def build_kernel(state: AssembledEvolution, eta: Sequence[int]) -> KernelMatrix:
    """Kernel combining the assembled matrix with the probe's sign diagonal.

    ``eta`` is the probe configuration on system modes.  The probe enters as
    the diagonal R = (-1)**|eta| (1 - 2 P_eta) conjugated by the system block.
    """
    n, q = state.n_system, state.ancilla_count
    eta = validate_mode_tuple(eta, 2 * n)
    m = state.matrix
    signs = np.full(2 * n, (-1.0) ** len(eta))
    for e in eta:
        signs[e - 1] *= -1.0
    sys_block = m[:, q:]
    k_dim = q + m.shape[0]
    k = np.zeros((k_dim, k_dim))
    k[:q, q:] = m[:, :q].T
    k[q:, :q] = m[:, :q]
    k[q:, q:] = (sys_block * signs) @ sys_block.T
    return KernelMatrix(k=k, gate_count=state.gate_count, n_system=n)


# ---------------------------------------------------------------------------
# Configuration enumeration


@dataclass
class _SideTable:
    """Per-bucket arrays describing one side of the configuration sum.

    ``cols``: indices of the chosen gate modes in the kernel's primal block.
    ``rows``: indices of the gate images in the kernel's image block.
    ``sign``: the per-side real factor i**phase * (-1)**(#odd gates) * (-1)**|B|
              split into (phase power, parity bits) so pairs combine exactly.
    """

    cols: np.ndarray
    rows: np.ndarray
    ipow: np.ndarray
    size_parity: np.ndarray
    odd_count: np.ndarray


def _gate_tables(g: int) -> dict[tuple[int, int], _SideTable]:
    """Enumerate all per-gate overlap choices, bucketed by index-tuple sizes.

    Gate blocks sit at modes (4b+1 .. 4b+4) for b = 0..g-1.  For each of the
    16**g assignments we record the primal column indices (kernel block 1),
    the image row indices (kernel block 2, offset 4g), the exact phase power
    of i, the size parity, and the number of odd-overlap gates.
    """
    per_block = []
    for b in range(g):
        q_modes = tuple(range(4 * b + 1, 4 * b + 5))
        options = []
        for mask in range(16):
            beta = tuple(q_modes[i] for i in range(4) if mask >> i & 1)
            ipow, image = interaction_image(beta, q_modes, orientation="heisenberg")
            cols = tuple(mu - 1 for mu in beta)
            rows = tuple(4 * g + mu - 1 for mu in image)
            options.append((cols, rows, ipow, len(beta) % 2))
        per_block.append(options)

    buckets: dict[tuple[int, int], list] = {}
    for combo in itertools.product(*per_block) if g else [()]:
        cols: tuple[int, ...] = ()
        rows: tuple[int, ...] = ()
        ipow = 0
        odd = 0
        for c, r, p, o in combo:
            cols += c
            rows += r
            ipow = (ipow + p) % 4
            odd += o
        buckets.setdefault((len(cols), len(rows)), []).append((cols, rows, ipow, odd))

    out = {}
    for key, entries in buckets.items():
        a, b = key
        out[key] = _SideTable(
            cols=np.array([e[0] for e in entries], dtype=np.intp).reshape(len(entries), a),
            rows=np.array([e[1] for e in entries], dtype=np.intp).reshape(len(entries), b),
            ipow=np.array([e[2] for e in entries], dtype=np.int64),
            size_parity=np.array([len(e[0]) % 2 for e in entries], dtype=np.int64),
            odd_count=np.array([e[3] for e in entries], dtype=np.int64),
        )
    return out


_TABLE_CACHE: dict[int, dict[tuple[int, int], _SideTable]] = {}


def _cached_tables(g: int) -> dict[tuple[int, int], _SideTable]:
    if g not in _TABLE_CACHE:
        _TABLE_CACHE[g] = _gate_tables(g)
    return _TABLE_CACHE[g]


def _batched_dets(mats: np.ndarray) -> np.ndarray:
    if mats.shape[-1] == 0:
        return np.ones(mats.shape[:-2])
    return np.linalg.det(mats)


@dataclass
class _PairTemplate:
    """Precomputed index/weight arrays for one bucket pair.

    ``rows_base`` and ``cols_base`` hold the gate-dependent part of the minor
    index tuples; the evolving configuration's indices are appended per call.
    ``deficit`` is |image| - |primal| of the bucket: the kernel's zero block
    makes every minor vanish identically when -deficit exceeds the evolving
    configuration's size, so such templates are skipped at call time.
    """

    rows_base: np.ndarray
    cols_base: np.ndarray
    weights: np.ndarray
    deficit: int


def _pair_templates(g: int) -> list[_PairTemplate]:
    """All contributing bucket pairs with signs folded into per-pair weights.

    Terms pair a primal-side assignment B (columns) with an image-side
    assignment B' (rows); only pairs yielding square minors contribute.  The
    kernel is symmetric and the weights depend symmetrically on (B, B'), so
    only ordered bucket pairs are kept, with off-diagonal pairs doubled.
    """
    tables = _cached_tables(g)
    keys = sorted(tables.keys())
    out: list[_PairTemplate] = []
    for ka in keys:  # bucket of B (primal side)
        ta = tables[ka]
        for kb in keys:  # bucket of B' (image side)
            if kb < ka:
                continue  # mirrored bucket handled by doubling
            if ka[1] - ka[0] != kb[1] - kb[0]:
                continue  # non-square minors vanish identically
            tb = tables[kb]
            n_a, n_b = len(ta.ipow), len(tb.ipow)
            if ka == kb:
                ii, jj = np.triu_indices(n_a)
                pair_weight = np.where(ii == jj, 1.0, 2.0)
            else:
                ii, jj = np.meshgrid(np.arange(n_a), np.arange(n_b), indexing="ij")
                ii, jj = ii.ravel(), jj.ravel()
                pair_weight = np.full(ii.shape, 2.0)

            ipow_tot = (ta.ipow[ii] + tb.ipow[jj]) % 4
            if np.any(ipow_tot % 2):
                raise ArithmeticError("configuration pair with imaginary weight")
            phase_sign = 1.0 - (ipow_tot % 4 == 2) * 2.0
            sa, sb = ta.size_parity[ii], tb.size_parity[jj]
            parity_sign = 1.0 - ((sa + sb + sa * sb) % 2) * 2.0
            odd_sign = 1.0 - (ta.odd_count[ii] % 2) * 2.0
            weights = pair_weight * phase_sign * parity_sign * odd_sign

            # minor rows: [B' primal slots, images of B]; columns mirrored.
            rows_base = np.concatenate([tb.cols[jj], ta.rows[ii]], axis=1)
            cols_base = np.concatenate([ta.cols[ii], tb.rows[jj]], axis=1)
            out.append(_PairTemplate(rows_base, cols_base, weights, ka[1] - ka[0]))
    return out


_TEMPLATE_CACHE_PAIRS: dict[int, list[_PairTemplate]] = {}


def _cached_templates(g: int) -> list[_PairTemplate]:
    if g not in _TEMPLATE_CACHE_PAIRS:
        _TEMPLATE_CACHE_PAIRS[g] = _pair_templates(g)
    return _TEMPLATE_CACHE_PAIRS[g]


def _series_sum(
    kernels: np.ndarray,
    g: int,
    alpha_rows: Sequence[int],
    alpha_cols: Sequence[int],
    skip_la: int | None = None,
) -> np.ndarray:
    """Evaluate the configuration sum for a stack of kernels.

    ``kernels`` has shape (S, D, D) (e.g. one kernel per probe site); the
    returned array holds, per kernel, the real number 1 - 2 C^2.  Chunks of
    fixed size are reduced with exact summation in a fixed order, so results
    are independent of threading and batching.  ``skip_la`` is the evolving
    configuration size used for the vanishing-minor skip; it defaults to the
    number of appended rows, but callers that fold the configuration into the
    kernel beforehand pass the original size.
    """
    n_k, dim = kernels.shape[0], kernels.shape[-1]
    flat_kernels = kernels.reshape(n_k, dim * dim)
    alpha_rows = np.asarray(alpha_rows, dtype=np.intp)
    alpha_cols = np.asarray(alpha_cols, dtype=np.intp)
    la = len(alpha_rows)
    if skip_la is None:
        skip_la = la
    totals = [[] for _ in range(n_k)]

    for tpl in _cached_templates(g):
        if tpl.deficit < -skip_la:
            continue  # zero block larger than the minor admits: all terms vanish
        p, r0 = tpl.rows_base.shape
        c0 = tpl.cols_base.shape[1]
        rows = np.empty((p, r0 + la), dtype=np.intp)
        rows[:, :r0] = tpl.rows_base
        rows[:, r0:] = alpha_rows
        cols = np.empty((p, c0 + la), dtype=np.intp)
        cols[:, :c0] = tpl.cols_base
        cols[:, c0:] = alpha_cols
        for start in range(0, p, DET_CHUNK):
            sl = slice(start, start + DET_CHUNK)
            flat = rows[sl, :, None] * dim + cols[sl, None, :]
            sub = np.take(flat_kernels, flat, axis=1, mode="clip")
            dets = _batched_dets(sub)
            contrib = dets @ tpl.weights[sl]
            for s_idx in range(n_k):
                totals[s_idx].append(float(contrib[s_idx]))

    return np.array([math.fsum(parts) for parts in totals])


def _otoc_from_assembly(state: AssembledEvolution, alpha: Sequence[int], eta: Sequence[int]) -> float:
    kernel = build_kernel(state, eta)
    value = _series_values(kernel.k[None, :, :], state, alpha)[0]
    return value


#: fold the evolving configuration into the kernel only when its own block is
#: at least this far from singular (relative smallest singular value)
SCHUR_MIN_SINGULAR = 1e-4


def _series_values(kernels: np.ndarray, state: AssembledEvolution, alpha: Sequence[int]) -> np.ndarray:
    """Map stacked kernels to OTOC values for the evolving configuration alpha.

    Every minor of the series shares the evolving configuration's rows and
    columns, so that block is folded into the kernel once per probe (a Schur
    complement), shrinking every determinant to gate-set size.  Kernels whose
    configuration block is near singular fall back to appending the rows
    explicitly, which is slower but unconditionally stable.
    """
    n, q = state.n_system, state.ancilla_count
    alpha = validate_mode_tuple(alpha, 2 * n)
    idx = np.array([2 * q + a - 1 for a in alpha], dtype=np.intp)
    la = len(idx)
    g = state.gate_count
    n_k = kernels.shape[0]
    raw = np.empty(n_k)

    if la == 0:
        raw[:] = _series_sum(kernels, g, [], [])
        return _clamped_sqrt(raw)

    fold_ids, fold_kernels, fold_dets = [], [], []
    append_ids = []
    for s_idx in range(n_k):
        k = kernels[s_idx]
        block = k[np.ix_(idx, idx)]
        sing = np.linalg.svd(block, compute_uv=False)
        if sing[-1] >= SCHUR_MIN_SINGULAR * max(sing[0], 1.0):
            folded = k - k[:, idx] @ np.linalg.solve(block, k[idx, :])
            fold_ids.append(s_idx)
            fold_kernels.append(folded)
            fold_dets.append(float(np.linalg.det(block)))
        else:
            append_ids.append(s_idx)

    if fold_ids:
        partial = _series_sum(np.stack(fold_kernels), g, [], [], skip_la=la)
        for pos, s_idx in enumerate(fold_ids):
            raw[s_idx] = fold_dets[pos] * partial[pos]
    if append_ids:
        partial = _series_sum(kernels[append_ids], g, idx, idx)
        for pos, s_idx in enumerate(append_ids):
            raw[s_idx] = partial[pos]
    return _clamped_sqrt(raw)


def _clamped_sqrt(raw: np.ndarray) -> np.ndarray:
    c2 = (1.0 - raw) / 2.0
    c2 = np.clip(c2, 0.0, 1.0)
    return np.sqrt(c2)


def exact_otoc(
    circuit: Circuit,
    a_string: str,
    b_string: str,
    max_gates: int = MAX_EXACT_GATES,
) -> float:
    """OTO correlator of Pauli string A against the circuit-evolved string B.

    Both operators are given as Pauli strings over the circuit's qubits
    (e.g. ``"IIXIII"``).  B is evolved through the circuit; A is the static
    probe.  Exact up to floating point for any gate count within the guard.
    """
    enc_a = jordan_wigner_encode(a_string)
    enc_b = jordan_wigner_encode(b_string)
    if len(a_string) != circuit.n or len(b_string) != circuit.n:
        raise ValueError("operator strings must match the circuit's qubit count")
    state = assemble_circuit(circuit, max_gates)
    return float(_otoc_from_assembly(state, enc_b.config, enc_a.config))


def exact_lightcone(
    circuit: Circuit,
    a_site: int | None = None,
    max_gates: int = MAX_EXACT_GATES,
) -> tuple[np.ndarray, np.ndarray]:
    """OTOC grid: evolve X at ``a_site`` and probe Z at every site.

    Returns (times, values) with a t = 0 row followed by one row per
    stroboscopic step (Gaussian layer plus immediately following gates).
    """
    n = circuit.n
    _guard_gate_count(circuit.gate_count, max_gates)
    if a_site is None:
        a_site = n // 2
    if not 1 <= a_site <= n:
        raise ValueError(f"site {a_site} outside chain")

    state = new_assembly(n)
    t = 0.0

    chunks: list[list] = [[]]
    for layer in circuit.layers:
        if isinstance(layer, GaussianLayer):
            chunks.append([layer])
        else:
            chunks[-1].append(layer)
    for layer in chunks.pop(0):
        for j in layer.positions:
            state = extend_with_interaction(state, j)

    # X at a_site is the filled configuration (1, ..., 2 a_site - 1): the
    # encoding's Z-string occupies every mode below the site's first mode.
    alpha = tuple(range(1, 2 * a_site))
    times = [0.0]
    rows = [_series_values(_stacked_site_kernels(state), state, alpha)]
    for chunk in chunks:
        for layer in chunk:
            if isinstance(layer, GaussianLayer):
                t += layer.generator.duration
                state = absorb_gaussian(state, exponentiate_generator(layer.generator))
            else:
                for j in layer.positions:
                    state = extend_with_interaction(state, j)
        kernels = _stacked_site_kernels(state)
        rows.append(_series_values(kernels, state, alpha))
        times.append(t)
    return np.array(times), np.array(rows)


def _stacked_site_kernels(state: AssembledEvolution) -> np.ndarray:
    """Kernels for probes Z_s at every site, sharing the common structure.

    The probe only changes the system sign diagonal, which for Z_s flips the
    two modes (2s-1, 2s); all kernels are the base (probe-free) kernel minus
    a rank-2 correction, assembled in one vectorized pass.
    """
    n, q = state.n_system, state.ancilla_count
    m = state.matrix
    sys_block = m[:, q:]
    k_dim = q + m.shape[0]
    base = np.zeros((k_dim, k_dim))
    base[:q, q:] = m[:, :q].T
    base[q:, :q] = m[:, :q]
    g_full = sys_block @ sys_block.T
    kernels = np.repeat(base[None, :, :], n, axis=0)
    for s in range(1, n + 1):
        v = sys_block[:, 2 * s - 2 : 2 * s]
        kernels[s - 1, q:, q:] = g_full - 2.0 * (v @ v.T)
    return kernels


def thread_count(default: int | None = None) -> int:
    """Worker count for parallel loops, from OTOCSIM_THREADS or the CPU count."""
    env = os.environ.get("OTOCSIM_THREADS")
    if env:
        return max(1, int(env))
    if default is not None:
        return default
    return max(1, os.cpu_count() or 1)
