"""Circuit model: free-fermion layer generators, interaction layers, disorder.

A circuit is a sequence of layers acting on an n-qubit chain.  Gaussian layers
are generated by a quadratic Majorana form and act on operators through a
single-particle orthogonal matrix; interaction layers apply the diagonal
two-qubit gate exp(-i pi/4 Z_j Z_{j+1}) on disjoint qubit pairs.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.linalg import expm

#: Scale relating the quadratic generator to the single-particle matrix:
#: a layer L = exp(c^T h c) maps modes as L c L^dagger = exp(SCALE * h) c.
#: Pinned by regression against the dense engine; do not change.
GENERATOR_EXPONENT_SCALE = -4.0

#: Orthogonality drift above this triggers re-projection onto the orthogonal
#: group (via SVD); drift beyond ORTHO_ERROR_TOL is an input error.
ORTHO_PROJECT_TOL = 1e-12
ORTHO_ERROR_TOL = 1e-8


@dataclass(frozen=True)
class GaussianGenerator:
    """Antisymmetric quadratic form h (per unit time) plus a duration.

    ``nu_values`` records the transverse-field profile when the generator came
    from the XY chain; generic generators leave it as None.
    """

    h: np.ndarray
    duration: float = 1.0
    nu_values: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        h = np.asarray(self.h, dtype=float)
        if h.ndim != 2 or h.shape[0] != h.shape[1] or h.shape[0] % 2 != 0:
            raise ValueError(f"generator must be square with even size, got {h.shape}")
        if np.max(np.abs(h + h.T)) > 1e-12:
            raise ValueError("generator matrix must be antisymmetric")
        object.__setattr__(self, "h", h)

    @property
    def mode_count(self) -> int:
        return self.h.shape[0]


@dataclass(frozen=True)
class GaussianLayer:
    generator: GaussianGenerator


@dataclass(frozen=True)
class InteractionLayer:
    """Diagonal two-qubit gates on pairs (j, j+1) for each listed position j."""

    positions: tuple[int, ...]

    def __post_init__(self) -> None:
        pos = tuple(int(p) for p in self.positions)
        if any(p < 1 for p in pos):
            raise ValueError(f"gate positions must be >= 1, got {pos}")
        if len(set(pos)) != len(pos):
            raise ValueError(f"duplicate gate positions {pos}")
        touched = set()
        for p in pos:
            if p in touched or p + 1 in touched:
                raise ValueError(f"overlapping gates in layer {pos}")
            touched.update((p, p + 1))
        object.__setattr__(self, "positions", pos)


@dataclass(frozen=True)
class Circuit:
    n: int
    layers: tuple

    def __post_init__(self) -> None:
        for layer in self.layers:
            if isinstance(layer, GaussianLayer):
                if layer.generator.mode_count != 2 * self.n:
                    raise ValueError("Gaussian layer size does not match circuit")
            elif isinstance(layer, InteractionLayer):
                if any(p + 1 > self.n for p in layer.positions):
                    raise ValueError("interaction gate exceeds chain length")
            else:
                raise TypeError(f"unknown layer type {type(layer)!r}")

    @property
    def gate_count(self) -> int:
        return sum(
            len(layer.positions)
            for layer in self.layers
            if isinstance(layer, InteractionLayer)
        )


@dataclass(frozen=True)
class DisorderRealization:
    """One draw of the random transverse fields nu_j ~ U[-strength, strength]."""

    nu_values: tuple[float, ...]
    strength: float
    base_seed: int
    index: int


def draw_disorder(n: int, strength: float, base_seed: int, index: int = 0) -> DisorderRealization:
    """Deterministically draw a disorder realization.

    Uses a counter-based generator keyed on (base_seed, index) so realization
    ``index`` is reproducible independently of how many others were drawn and
    of any threading.
    """
    bitgen = np.random.Philox(key=np.uint64(base_seed) + (np.uint64(index) << np.uint64(20)))
    rng = np.random.Generator(bitgen)
    values = tuple(float(v) for v in rng.uniform(-strength, strength, size=n))
    return DisorderRealization(values, float(strength), int(base_seed), int(index))


def build_xy_generator(
    n: int, nu_values: Sequence[float], duration: float = 1.0
) -> GaussianGenerator:
    """Quadratic generator of the XY chain with transverse fields.

    The spin Hamiltonian sum_j (X_j X_{j+1} + Y_j Y_{j+1}) + sum_j nu_j Z_j
    maps to -i H = c^T h c with hopping entries coupling modes (2j, 2j+1) and
    (2j-1, 2j+2) and on-site entries coupling (2j-1, 2j).
    """
    nu = [float(v) for v in nu_values]
    if len(nu) != n:
        raise ValueError(f"need {n} field values, got {len(nu)}")
    h = np.zeros((2 * n, 2 * n))

    def add(a: int, b: int, val: float) -> None:
        h[a - 1, b - 1] += val / 2.0
        h[b - 1, a - 1] -= val / 2.0

    for j in range(1, n):
        add(2 * j, 2 * j + 1, -1.0)       # from X_j X_{j+1} + Y_j Y_{j+1}
        add(2 * j - 1, 2 * j + 2, 1.0)
    for j in range(1, n + 1):
        add(2 * j - 1, 2 * j, -nu[j - 1])  # from nu_j Z_j
    return GaussianGenerator(h=h, duration=float(duration), nu_values=tuple(nu))


def exponentiate_generator(generator: GaussianGenerator) -> np.ndarray:
    """Single-particle matrix of a Gaussian layer acting on operators.

    Returns exp(GENERATOR_EXPONENT_SCALE * duration * h), which is orthogonal
    for antisymmetric h.  Numerical drift from orthogonality beyond
    ``ORTHO_PROJECT_TOL`` is repaired by projecting onto the nearest
    orthogonal matrix; drift beyond ``ORTHO_ERROR_TOL`` raises.
    """
    u = expm(GENERATOR_EXPONENT_SCALE * generator.duration * generator.h)
    drift = np.max(np.abs(u @ u.T - np.eye(u.shape[0])))
    if drift > ORTHO_ERROR_TOL:
        raise ArithmeticError(f"layer matrix drifted from orthogonality by {drift:.3e}")
    if drift > ORTHO_PROJECT_TOL:
        w, _, vt = np.linalg.svd(u)
        u = w @ vt
    return u


def fswap_matrix(j: int, k: int, mode_count: int) -> np.ndarray:
    """Single-particle matrix of the fermionic swap of qubits j and k.

    Exchanges mode pairs (2j-1, 2j) and (2k-1, 2k); on single-mode operators
    the swap is a clean permutation with no sign.
    """
    if j == k or min(j, k) < 1 or 2 * max(j, k) > mode_count:
        raise ValueError(f"invalid swap ({j}, {k}) for {mode_count} modes")
    u = np.eye(mode_count)
    for off in (1, 0):
        a, b = 2 * j - off - 1, 2 * k - off - 1
        u[[a, b]] = u[[b, a]]
    return u


def local_rotation_matrix(s: int, mode_count: int) -> np.ndarray:
    """Single-particle matrix of the local rotation exp(-i pi/4 Z_s).

    In operator conjugation it maps c_{2s-1} -> c_{2s} and c_{2s} -> -c_{2s-1}.
    """
    if s < 1 or 2 * s > mode_count:
        raise ValueError(f"invalid site {s} for {mode_count} modes")
    u = np.eye(mode_count)
    a = 2 * s - 2
    u[a, a] = 0.0
    u[a + 1, a + 1] = 0.0
    u[a, a + 1] = 1.0
    u[a + 1, a] = -1.0
    return u


def build_alternating_circuit(
    n: int,
    nu: float,
    dt: float,
    periods: int,
    base_seed: int = 0,
    realization: int = 0,
    include_interactions: bool = True,
    disorder: DisorderRealization | None = None,
) -> tuple[Circuit, DisorderRealization]:
    """Brickwork circuit: free layer, odd-bond gates, free layer, even-bond gates.

    Each period contributes two Gaussian layers of duration ``dt``, generated
    by the same disordered XY chain, each followed by a maximal layer of
    non-overlapping interaction gates (odd bonds after the first, even bonds
    after the second).  With ``include_interactions=False`` only the Gaussian
    layers remain.
    """
    if disorder is None:
        disorder = draw_disorder(n, nu, base_seed, realization)
    gen = build_xy_generator(n, disorder.nu_values, duration=dt)
    odd = tuple(j for j in range(1, n) if j % 2 == 1)
    even = tuple(j for j in range(1, n) if j % 2 == 0)
    layers: list = []
    for _ in range(periods):
        layers.append(GaussianLayer(gen))
        if include_interactions and odd:
            layers.append(InteractionLayer(odd))
        layers.append(GaussianLayer(gen))
        if include_interactions and even:
            layers.append(InteractionLayer(even))
    return Circuit(n=n, layers=tuple(layers)), disorder


def build_gated_circuit(
    n: int,
    nu_values: Sequence[float],
    dt: float,
    steps: int,
    gates: Sequence[tuple[int, int]],
) -> Circuit:
    """Circuit of ``steps`` Gaussian layers with gates at chosen layer indices.

    ``gates`` lists (qubit, step) pairs: the gate on (qubit, qubit+1) is
    applied right after Gaussian layer ``step`` (1-based).  Multiple gates at
    one step become one interaction layer and must not overlap.
    """
    gen = build_xy_generator(n, nu_values, duration=dt)
    by_step: dict[int, list[int]] = {}
    for qubit, step in gates:
        if not 1 <= step <= steps:
            raise ValueError(f"gate step {step} outside [1, {steps}]")
        by_step.setdefault(int(step), []).append(int(qubit))
    layers: list = []
    for k in range(1, steps + 1):
        layers.append(GaussianLayer(gen))
        if k in by_step:
            layers.append(InteractionLayer(tuple(sorted(by_step[k]))))
    return Circuit(n=n, layers=tuple(layers))


def circuit_to_dict(circuit: Circuit) -> dict:
    """JSON-ready description of a circuit."""
    layers = []
    for layer in circuit.layers:
        if isinstance(layer, GaussianLayer):
            gen = layer.generator
            entry: dict = {"type": "gaussian", "duration": gen.duration}
            if gen.nu_values is not None:
                entry["nu_values"] = list(gen.nu_values)
            else:
                entry["h"] = gen.h.tolist()
            layers.append(entry)
        else:
            layers.append({"type": "interaction", "positions": list(layer.positions)})
    return {"n": circuit.n, "layers": layers}


def circuit_from_dict(doc: dict) -> Circuit:
    """Inverse of :func:`circuit_to_dict`."""
    n = int(doc["n"])
    layers: list = []
    for entry in doc["layers"]:
        if entry["type"] == "gaussian":
            if "nu_values" in entry:
                gen = build_xy_generator(n, entry["nu_values"], duration=entry["duration"])
            else:
                gen = GaussianGenerator(
                    h=np.array(entry["h"], dtype=float), duration=float(entry["duration"])
                )
            layers.append(GaussianLayer(gen))
        elif entry["type"] == "interaction":
            layers.append(InteractionLayer(tuple(entry["positions"])))
        else:
            raise ValueError(f"unknown layer type {entry['type']!r}")
    return Circuit(n=n, layers=tuple(layers))


def with_duration(generator: GaussianGenerator, duration: float) -> GaussianGenerator:
    """Copy of a generator with a different duration."""
    return replace(generator, duration=float(duration))
