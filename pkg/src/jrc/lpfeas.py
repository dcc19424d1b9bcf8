"""Feasibility of the multiplier-divergence system.

A multiplier window diverges when no point is approached non-increasingly
by the sequence, i.e. the system ``||x - w[i+1]|| <= ||x - w[i]||`` over
consecutive window pairs has no solution.  Each quadratic inequality
linearizes exactly (the ``||x||^2`` terms cancel), leaving a small dense
``A x <= b`` system over free variables, decided here by a phase-1
simplex with Bland's rule: guaranteed finite, no cycling, no objective.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

FEAS_TOL = 1e-9
VACUOUS_TOL = 1e-12


@dataclass(frozen=True)
class LinearSystem:
    """Rows of coefficient vector and right-hand side, all of sense <=."""

    coeffs: np.ndarray
    rhs: np.ndarray

    @property
    def num_rows(self) -> int:
        return int(self.coeffs.shape[0])

    @property
    def dim(self) -> int:
        return int(self.coeffs.shape[1]) if self.coeffs.ndim == 2 else 0


@dataclass(frozen=True)
class Feasibility:
    feasible: bool
    witness: Optional[np.ndarray] = None


def linearize_window(window: Sequence[np.ndarray]) -> LinearSystem:
    """One row per consecutive pair: ``2 (w[i] - w[i+1]) . x <=
    ||w[i]||^2 - ||w[i+1]||^2`` (the quadratic terms cancel exactly)."""
    if len(window) < 2:
        raise ValueError("window must contain at least two multiplier iterates")
    points = [np.asarray(w, dtype=np.float64) for w in window]
    dim = points[0].shape[0]
    rows = []
    rhs = []
    for a, b in zip(points, points[1:]):
        rows.append(2.0 * (a - b))
        rhs.append(float(a @ a - b @ b))
    return LinearSystem(np.array(rows, dtype=np.float64), np.array(rhs, dtype=np.float64))


def _phase1_simplex(A: np.ndarray, b: np.ndarray) -> Optional[np.ndarray]:
    """Solve min sum(artificials) for A x <= b with x free; return a
    witness x when the residual optimum is (numerically) zero."""
    m, n = A.shape

    # free variables split into plus/minus parts, one slack per row;
    # rows with negative rhs are negated and receive an artificial
    neg = b < 0
    A2 = np.where(neg[:, None], -A, A)
    b2 = np.where(neg, -b, b)
    art_rows = np.nonzero(neg)[0]
    n_art = len(art_rows)
    width = 2 * n + m + n_art

    T = np.zeros((m, width + 1))
    T[:, :n] = A2
    T[:, n : 2 * n] = -A2
    for i in range(m):
        T[i, 2 * n + i] = -1.0 if neg[i] else 1.0
    for j, i in enumerate(art_rows):
        T[i, 2 * n + m + j] = 1.0
    T[:, -1] = b2

    basis = np.empty(m, dtype=np.int64)
    art_of = {int(i): 2 * n + m + j for j, i in enumerate(art_rows)}
    for i in range(m):
        basis[i] = art_of.get(i, 2 * n + i)

    cost = np.zeros(width)
    cost[2 * n + m :] = 1.0

    max_pivots = 50 * (width + m + 1)
    for _ in range(max_pivots):
        # reduced costs under the current basis (price out basic columns)
        y = cost[basis]
        reduced = cost - y @ T[:, :width]
        entering = -1
        for j in range(width):  # Bland: smallest eligible index
            if reduced[j] < -VACUOUS_TOL:
                entering = j
                break
        if entering < 0:
            break
        ratios = []
        for i in range(m):
            if T[i, entering] > VACUOUS_TOL:
                ratios.append((T[i, -1] / T[i, entering], int(basis[i]), i))
        if not ratios:
            return None  # unbounded phase-1 cannot happen; defensive
        ratios.sort()
        _, _, leave = min(ratios, key=lambda r: (r[0], r[1]))
        piv = T[leave, entering]
        T[leave] /= piv
        for i in range(m):
            if i != leave and T[i, entering] != 0.0:
                T[i] -= T[i, entering] * T[leave]
        basis[leave] = entering

    residual = float(sum(T[i, -1] for i in range(m) if basis[i] >= 2 * n + m))
    if residual > FEAS_TOL:
        return None
    x = np.zeros(n)
    for i in range(m):
        j = basis[i]
        if j < n:
            x[j] += T[i, -1]
        elif j < 2 * n:
            x[j - n] -= T[i, -1]
    return x


def is_feasible(system: LinearSystem) -> Feasibility:
    """Exact-up-to-tolerance verdict with a witness when feasible."""
    if system.num_rows == 0:
        return Feasibility(True, np.zeros(system.dim))

    # normalize rows; drop vacuous ones, catch trivially impossible ones
    keep_rows = []
    keep_rhs = []
    for row, rhs in zip(system.coeffs, system.rhs):
        scale = float(np.max(np.abs(row)))
        if scale <= VACUOUS_TOL:
            if rhs < -VACUOUS_TOL:
                return Feasibility(False)
            continue
        keep_rows.append(row / scale)
        keep_rhs.append(rhs / scale)
    if not keep_rows:
        return Feasibility(True, np.zeros(system.dim))

    A = np.array(keep_rows)
    b = np.array(keep_rhs)

    # only coordinates the rows actually touch matter; the rest are free
    active = np.nonzero(np.any(np.abs(A) > VACUOUS_TOL, axis=0))[0]
    x_active = _phase1_simplex(A[:, active], b)
    if x_active is None:
        return Feasibility(False)
    witness = np.zeros(system.dim)
    witness[active] = x_active
    return Feasibility(True, witness)


def window_diverges(window: Sequence[np.ndarray]) -> bool:
    """True when the window's divergence-detection system is infeasible."""
    if len(window) < 2:
        return False
    return not is_feasible(linearize_window(window)).feasible
