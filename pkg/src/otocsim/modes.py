"""Majorana mode bookkeeping: Pauli encoding, minors, and summation identities.

Modes are 1-based: qubit j carries modes (2j-1, 2j).  A *configuration* is a
strictly increasing tuple of modes and stands for the ordered product of the
corresponding Majorana operators.  Phases are tracked exactly as integer
powers of i (0..3), never as floating-point complex numbers.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

#: determinants with absolute value below this are snapped to exact zero
DET_ZERO_TOL = 1e-13

# Single-qubit Pauli multiplication table: (a, b) -> (power of i, letter)
# with a @ b == i**power * letter.
_PAULI_PRODUCT = {
    ("I", "I"): (0, "I"), ("I", "X"): (0, "X"), ("I", "Y"): (0, "Y"), ("I", "Z"): (0, "Z"),
    ("X", "I"): (0, "X"), ("X", "X"): (0, "I"), ("X", "Y"): (1, "Z"), ("X", "Z"): (3, "Y"),
    ("Y", "I"): (0, "Y"), ("Y", "X"): (3, "Z"), ("Y", "Y"): (0, "I"), ("Y", "Z"): (1, "X"),
    ("Z", "I"): (0, "Z"), ("Z", "X"): (1, "Y"), ("Z", "Y"): (3, "X"), ("Z", "Z"): (0, "I"),
}


@dataclass(frozen=True)
class PauliObservable:
    """A Pauli string written as i**phase_power times a Majorana configuration."""

    phase_power: int
    config: tuple[int, ...]

    def __post_init__(self) -> None:
        validate_mode_tuple(self.config)
        k = len(self.config)
        # Hermiticity of a Pauli string forces the phase to cancel the
        # reordering sign of the configuration product.
        if (self.phase_power - k * (k - 1) // 2) % 2 != 0:
            raise ValueError(
                f"phase_power {self.phase_power} incompatible with Hermiticity "
                f"for a configuration of size {k}"
            )

    @property
    def phase(self) -> complex:
        return 1j ** (self.phase_power % 4)


def validate_mode_tuple(modes: Sequence[int], mode_count: int | None = None) -> tuple[int, ...]:
    """Check that ``modes`` is strictly increasing, positive, in range."""
    t = tuple(int(m) for m in modes)
    for a, b in zip(t, t[1:]):
        if a >= b:
            raise ValueError(f"mode tuple {t} is not strictly increasing")
    if t and t[0] < 1:
        raise ValueError(f"mode tuple {t} contains a mode below 1")
    if mode_count is not None and t and t[-1] > mode_count:
        raise ValueError(f"mode tuple {t} exceeds mode count {mode_count}")
    return t


def _letters(pauli_string: str | Sequence[str]) -> list[str]:
    letters = list(pauli_string)
    bad = [ch for ch in letters if ch not in "IXYZ"]
    if bad:
        raise ValueError(f"invalid Pauli letters {bad!r}")
    if not letters:
        raise ValueError("empty Pauli string")
    return letters


def jordan_wigner_encode(pauli_string: str | Sequence[str]) -> PauliObservable:
    """Encode a Pauli string (letter list, qubit 1 first) into Majorana form.

    Returns the unique ``PauliObservable`` with ``i**phase_power * C_config``
    equal to the string.  Example: ``"Z"`` encodes to phase_power 3 and
    configuration (1, 2).
    """
    letters = _letters(pauli_string)
    n = len(letters)
    # Walk from the top qubit down; `parity_above` counts modes already chosen
    # on higher qubits, which act as a Z on every lower site.
    config: list[int] = []
    parity_above = 0
    for j in range(n, 0, -1):
        letter = letters[j - 1]
        odd = parity_above % 2 == 1
        if letter == "I":
            picks = (2 * j - 1, 2 * j) if odd else ()
        elif letter == "Z":
            picks = () if odd else (2 * j - 1, 2 * j)
        elif letter == "X":
            picks = (2 * j,) if odd else (2 * j - 1,)
        else:  # "Y"
            picks = (2 * j - 1,) if odd else (2 * j,)
        config.extend(picks)
        parity_above += len(picks)
    config.sort()

    # Multiply out the configuration symbolically to recover the exact phase.
    power, product = _config_as_pauli(tuple(config), n)
    if product != letters:
        raise AssertionError("internal error: encode/decode mismatch")
    return PauliObservable(phase_power=(-power) % 4, config=tuple(config))


def _config_as_pauli(config: tuple[int, ...], n: int) -> tuple[int, list[str]]:
    """Express C_config as i**power times a Pauli letter list."""
    letters = ["I"] * n
    power = 0
    for mu in config:
        j, rem = divmod(mu - 1, 2)  # 0-based qubit, rem 0 -> X, 1 -> Y
        term = ["Z"] * j + ["X" if rem == 0 else "Y"] + ["I"] * (n - j - 1)
        for k in range(n):
            p, letter = _PAULI_PRODUCT[(letters[k], term[k])]
            power = (power + p) % 4
            letters[k] = letter
    return power, letters


def jordan_wigner_decode(observable: PauliObservable, n_qubits: int) -> str:
    """Decode a Majorana-form observable back to its Pauli string."""
    config = validate_mode_tuple(observable.config, 2 * n_qubits)
    power, letters = _config_as_pauli(config, n_qubits)
    if (power + observable.phase_power) % 4 != 0:
        raise ValueError("observable phase is not that of a Hermitian Pauli string")
    return "".join(letters)


def minor(u: np.ndarray, rows: Sequence[int], cols: Sequence[int]) -> float:
    """Determinant of the 1-based (rows, cols) submatrix of ``u``.

    The empty minor is 1.  Values with magnitude below ``DET_ZERO_TOL`` are
    snapped to exact zero so that sums over structurally vanishing terms do
    not accumulate noise.
    """
    r = validate_mode_tuple(rows, u.shape[0])
    c = validate_mode_tuple(cols, u.shape[1])
    if len(r) != len(c):
        raise ValueError(f"non-square minor: {len(r)} rows vs {len(c)} columns")
    if not r:
        return 1.0
    sub = u[np.ix_([i - 1 for i in r], [j - 1 for j in c])]
    det = float(np.linalg.det(sub))
    return 0.0 if abs(det) < DET_ZERO_TOL else det


def cauchy_binet(u1: np.ndarray, u2: np.ndarray, alpha: Sequence[int], gamma: Sequence[int]) -> float:
    """Sum of det(u1[alpha, beta]) det(u2[beta, gamma]) over all beta.

    Evaluated in closed form as the (alpha, gamma) minor of ``u1 @ u2``.
    """
    if u1.shape[1] != u2.shape[0]:
        raise ValueError("inner dimensions do not match")
    return minor(u1 @ u2, alpha, gamma)


def _as_sorted_tuple(x: Iterable[int]) -> tuple[int, ...]:
    return tuple(sorted(int(v) for v in x))


def modified_cauchy_binet(
    u1: np.ndarray,
    u2: np.ndarray,
    alpha: Sequence[int],
    gamma: Sequence[int],
    s_cols: Sequence[int],
    s_rows: Sequence[int],
    b_left: Sequence[int],
    b_right: Sequence[int],
) -> float:
    """Closed form for a Cauchy-Binet sum with pinned middle-block subsets.

    Evaluates ``sum over beta_l within b_left, beta_r within b_right of
    det(u1[alpha, (beta_l, s_cols, beta_r)]) * det(u2[(beta_l, s_rows, beta_r),
    gamma])`` as a single block determinant.  ``s_cols`` pins columns of
    ``u1``; ``s_rows`` pins rows of ``u2``.  Both pinned sets must lie in the
    middle block, i.e. strictly between ``b_left`` and ``b_right``.

    The closed form is ``(-1)**(|s_rows|*|s_cols|) * det(M)`` with

        M = [[ 0,                u2[s_rows, gamma]        ],
             [ u1[alpha, s_cols], u1[alpha, b] @ w[b, gamma] ]]

    where ``b = b_left + b_right`` and ``w`` equals ``u2`` with the rows in
    ``b_left`` sign-flipped when ``|s_rows| + |s_cols|`` is odd.
    """
    m_inner = u1.shape[1]
    if u2.shape[0] != m_inner:
        raise ValueError("inner dimensions do not match")
    alpha = validate_mode_tuple(alpha, u1.shape[0])
    gamma = validate_mode_tuple(gamma, u2.shape[1])
    b_left = validate_mode_tuple(b_left, m_inner)
    b_right = validate_mode_tuple(b_right, m_inner)
    s_cols = validate_mode_tuple(s_cols, m_inner)
    s_rows = validate_mode_tuple(s_rows, m_inner)

    background = set(b_left) | set(b_right)
    middle = [k for k in range(1, m_inner + 1) if k not in background]
    if not set(s_cols) <= set(middle) or not set(s_rows) <= set(middle):
        raise ValueError("pinned sets must lie outside the background blocks")
    if middle:
        lo, hi = middle[0], middle[-1]
        if any(b > lo for b in b_left) or any(b < hi for b in b_right):
            raise ValueError("b_left must lie left of, b_right right of, the middle block")
    if len(alpha) - len(s_cols) != len(gamma) - len(s_rows):
        raise ValueError("pinned sizes incompatible with square minors")

    n_s, n_sp = len(s_rows), len(s_cols)
    b_all = _as_sorted_tuple(background)
    w = np.array(u2, dtype=float, copy=True)
    if (n_s + n_sp) % 2 == 1 and b_left:
        w[[i - 1 for i in b_left], :] *= -1.0

    idx = lambda t: [i - 1 for i in t]  # noqa: E731 - tiny local helper
    top_right = u2[np.ix_(idx(s_rows), idx(gamma))] if n_s and gamma else np.zeros((n_s, len(gamma)))
    bottom_left = u1[np.ix_(idx(alpha), idx(s_cols))] if alpha and n_sp else np.zeros((len(alpha), n_sp))
    if b_all:
        bottom_right = u1[np.ix_(idx(alpha), idx(b_all))] @ w[np.ix_(idx(b_all), idx(gamma))]
    else:
        bottom_right = np.zeros((len(alpha), len(gamma)))

    size = n_s + len(alpha)
    if size != n_sp + len(gamma):
        raise ValueError("block matrix is not square")
    block = np.zeros((size, size))
    block[:n_s, n_sp:] = top_right
    block[n_s:, :n_sp] = bottom_left
    block[n_s:, n_sp:] = bottom_right
    det = float(np.linalg.det(block)) if size else 1.0
    if abs(det) < DET_ZERO_TOL:
        det = 0.0
    return ((-1.0) ** (n_s * n_sp)) * det


def interaction_image(
    beta: Sequence[int],
    q: Sequence[int],
    orientation: str = "heisenberg",
) -> tuple[int, tuple[int, ...]]:
    """Image of a configuration under conjugation by the diagonal two-qubit gate.

    ``q`` must be the four contiguous modes (2j-1 .. 2j+2) of the gate's qubit
    pair, starting at an odd mode.  ``beta`` is a sub-configuration of ``q``.
    Even-size ``beta`` is invariant with trivial phase.  Odd-size ``beta``
    maps to its complement in ``q`` with phase +/- i:

    * ``orientation="heisenberg"``: the gate acts as G C G^dagger (operator
      evolved forward), phase +i * (-1)**(sum of beta).
    * ``orientation="schrodinger"``: the gate acts as G^dagger C G, phase
      -i * (-1)**(sum of beta).

    Returns (power of i, image configuration).
    """
    q = validate_mode_tuple(q)
    if len(q) != 4 or q[0] % 2 == 0 or q != tuple(range(q[0], q[0] + 4)):
        raise ValueError(f"gate modes {q} must be four contiguous modes starting odd")
    beta = validate_mode_tuple(beta)
    if not set(beta) <= set(q):
        raise ValueError(f"configuration {beta} not supported on gate modes {q}")
    if len(beta) % 2 == 0:
        return 0, beta
    image = tuple(sorted(set(q) - set(beta)))
    sign_power = 2 * (sum(beta) % 2)  # (-1)**sum as a power of i
    if orientation == "heisenberg":
        return (1 + sign_power) % 4, image
    if orientation == "schrodinger":
        return (3 + sign_power) % 4, image
    raise ValueError(f"unknown orientation {orientation!r}")


def all_subconfigurations(q: Sequence[int]) -> list[tuple[int, ...]]:
    """All 2^|q| sub-tuples of a mode tuple, in subset-size then lex order."""
    q = validate_mode_tuple(q)
    out = []
    for k in range(len(q) + 1):
        out.extend(itertools.combinations(q, k))
    return out
