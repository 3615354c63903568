"""Free-fermion OTOC evaluation and operator-boundary weights.

For an operator whose Heisenberg evolution stays Gaussian, conjugation is a
single orthogonal matrix ``u`` acting on mode space, and both the OTO
correlator and the operator weight collected at a lightcone edge reduce to
small determinants.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .modes import validate_mode_tuple

#: single-particle matrices further than this from orthogonal are rejected
ORTHOGONALITY_TOL = 1e-8

#: squared edge weights may undershoot zero by at most this before raising
NEGATIVE_WEIGHT_TOL = 1e-9


def _check_orthogonal(u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ValueError(f"single-particle matrix must be square, got {u.shape}")
    drift = np.max(np.abs(u @ u.T - np.eye(u.shape[0])))
    if drift > ORTHOGONALITY_TOL:
        raise ValueError(f"single-particle matrix not orthogonal (drift {drift:.3e})")
    return u


def gaussian_otoc(u: np.ndarray, alpha: Sequence[int], eta: Sequence[int]) -> float:
    """OTO correlator of a Gaussian-evolved configuration against a probe.

    ``u`` is the single-particle matrix of the evolution, ``alpha`` the
    initial configuration of the evolving operator (rows of ``u``), and
    ``eta`` the configuration of the static probe.  Closed form:

        C^2 = 1/2 * (1 + (-1)**(|alpha| |eta| + 1)
                       * det( u[alpha, :] (1 - 2 P_eta) u[alpha, :]^T ))
    """
    u = _check_orthogonal(u)
    m = u.shape[0]
    alpha = validate_mode_tuple(alpha, m)
    eta = validate_mode_tuple(eta, m)
    if not alpha:
        return 0.0
    rows = u[[a - 1 for a in alpha], :]
    signs = np.ones(m)
    signs[[e - 1 for e in eta]] = -1.0
    d = np.linalg.det((rows * signs) @ rows.T)
    c2 = 0.5 * (1.0 + ((-1.0) ** (len(alpha) * len(eta) + 1)) * d)
    c2 = min(max(c2, 0.0), 1.0)
    return float(np.sqrt(c2))


@dataclass(frozen=True)
class BoundaryProfile:
    """Edge weights b_s for s = 1..n of an evolving odd-parity operator."""

    values: np.ndarray
    n: int

    @property
    def mid(self) -> int:
        return self.n // 2


def _edge_block_dets(
    alpha_rows: np.ndarray, pinned: list[int], background: list[int]
) -> float:
    """Pinned block determinant for one edge-mode variant.

    The block determinant collapses the free sum over background modes; the
    caller negates it (the closed form's sign prefactor is (-1) because the
    pinned sets always have odd size).
    """
    k = alpha_rows.shape[0]
    p = len(pinned)
    bg = alpha_rows[:, background] if background else np.zeros((k, 0))
    g_bg = bg @ bg.T
    pin = alpha_rows[:, pinned]
    block = np.zeros((p + k, p + k))
    block[:p, p:] = pin.T
    block[p:, :p] = pin
    block[p:, p:] = g_bg
    return float(np.linalg.det(block))


def boundary_weight(u: np.ndarray, alpha: Sequence[int], s: int, n: int) -> float:
    """Operator weight b_s collected at the lightcone edge site ``s``.

    ``u`` may live on an extended mode set (system modes 1..2n first, ancilla
    modes after); ``alpha`` is the initial configuration of the evolving
    operator and must have odd size.  Sites right of the chain midpoint use
    the right-edge closed form, sites left of it the left-edge form, and the
    midpoint takes the larger of the two.
    """
    u = _check_orthogonal(u)
    m = u.shape[0]
    if not 1 <= s <= n or 2 * n > m:
        raise ValueError(f"site {s} / system size {n} invalid for {m} modes")
    alpha = validate_mode_tuple(alpha, m)
    if len(alpha) % 2 == 0:
        raise ValueError("edge weights require an odd-size evolving configuration")
    rows = u[[a - 1 for a in alpha], :]
    mid = n // 2
    vals = []
    if s >= mid:
        vals.append(_right_edge_sq(rows, s, n, m))
    if s <= mid:
        vals.append(_left_edge_sq(rows, s, n, m))
    return float(np.sqrt(max(vals)))


def _right_edge_sq(rows: np.ndarray, s: int, n: int, m: int) -> float:
    background = list(range(0, 2 * s - 2)) + list(range(2 * n, m))
    total = 0.0
    for edge in (2 * s - 2, 2 * s - 1):  # 0-based modes 2s-1, 2s
        total -= _edge_block_dets(rows, [edge], background)
    return _clamp_sq(total)


def _left_edge_sq(rows: np.ndarray, s: int, n: int, m: int) -> float:
    background = list(range(2 * s, m))
    total = 0.0
    for edge in (2 * s - 2, 2 * s - 1):
        pinned = list(range(0, 2 * s - 2)) + [edge]
        total -= _edge_block_dets(rows, pinned, background)
    return _clamp_sq(total)


def _clamp_sq(value: float) -> float:
    if value < -NEGATIVE_WEIGHT_TOL:
        raise ArithmeticError(f"squared edge weight is negative: {value:.3e}")
    return max(value, 0.0)


def boundary_profile(u: np.ndarray, alpha: Sequence[int], n: int) -> BoundaryProfile:
    """Edge weights at every site, sharing work across the chain.

    Background Gram matrices grow cumulatively from each end, so the whole
    profile costs little more than the most expensive single site.
    """
    u = _check_orthogonal(u)
    m = u.shape[0]
    alpha = validate_mode_tuple(alpha, m)
    if len(alpha) % 2 == 0:
        raise ValueError("edge weights require an odd-size evolving configuration")
    rows = u[[a - 1 for a in alpha], :]
    k = rows.shape[0]
    mid = n // 2

    anc = rows[:, 2 * n:]
    g_anc = anc @ anc.T

    values = np.zeros(n)

    # Right-edge weights for s = mid..n; background = modes < 2s-1 plus ancillas.
    g_right = g_anc.copy()
    for x in range(0, 2 * mid - 2):
        g_right += np.outer(rows[:, x], rows[:, x])
    for s in range(mid, n + 1):
        total = 0.0
        for edge in (2 * s - 2, 2 * s - 1):
            pin = rows[:, [edge]]
            block = np.zeros((1 + k, 1 + k))
            block[0, 1:] = pin[:, 0]
            block[1:, 0] = pin[:, 0]
            block[1:, 1:] = g_right
            total -= np.linalg.det(block)
        values[s - 1] = max(values[s - 1], _clamp_sq(total))
        if s < n:
            for x in (2 * s - 2, 2 * s - 1):
                g_right += np.outer(rows[:, x], rows[:, x])

    # Left-edge weights for s = 1..mid; background = modes > 2s plus ancillas.
    g_left = g_anc.copy()
    for x in range(2 * mid, 2 * n):
        g_left += np.outer(rows[:, x], rows[:, x])
    for s in range(mid, 0, -1):
        total = 0.0
        for edge in (2 * s - 2, 2 * s - 1):
            pinned = list(range(0, 2 * s - 2)) + [edge]
            p = len(pinned)
            pin = rows[:, pinned]
            block = np.zeros((p + k, p + k))
            block[:p, p:] = pin.T
            block[p:, :p] = pin
            block[p:, p:] = g_left
            total -= np.linalg.det(block)
        values[s - 1] = max(values[s - 1], _clamp_sq(total))
        if s > 1:
            for x in (2 * s - 2, 2 * s - 1):
                g_left += np.outer(rows[:, x], rows[:, x])

    return BoundaryProfile(values=np.sqrt(values), n=n)
