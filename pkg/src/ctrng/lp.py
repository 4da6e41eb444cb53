"""Guessing probability over behaviors with bounded signaling.

The feasible set is the polytope of all 16-entry tables ``P(ab|xy) >= 0``
that are normalized per input pair, reach a prescribed Bell value, and
whose marginals move by at most ``delta`` under the distant input.  The
linear programs are tiny (16 variables), so they are solved with a dense
two-phase tableau simplex that also returns a dual certificate.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .bell import CHSH, BellExpression, Behavior

PIVOT_TOL = 1e-11
FEAS_TOL = 1e-9
GAP_TOL = 1e-9
CS_TOL = 1e-8


class LPError(RuntimeError):
    """Simplex failure or a certificate that does not check out."""


class LPInfeasible(LPError):
    pass


class LPUnbounded(LPError):
    pass


class LPCycling(LPError):
    pass


@dataclass
class LPProblem:
    """``max c.x`` subject to ``A_eq x = b_eq``, ``A_ub x <= b_ub`` and ``x >= 0``."""

    c: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray
    A_ub: np.ndarray
    b_ub: np.ndarray

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        n = self.c.size
        self.A_eq = np.asarray(self.A_eq, dtype=float).reshape(-1, n)
        self.b_eq = np.asarray(self.b_eq, dtype=float).ravel()
        self.A_ub = np.asarray(self.A_ub, dtype=float).reshape(-1, n)
        self.b_ub = np.asarray(self.b_ub, dtype=float).ravel()
        if self.A_eq.shape[0] != self.b_eq.size or self.A_ub.shape[0] != self.b_ub.size:
            raise ValueError("constraint matrix and right-hand side sizes differ")

    @property
    def n(self) -> int:
        return self.c.size

    def standard_form(self):
        """Return ``(A, b, c)`` for ``A [x; s] = b`` with slacks ``s >= 0`` on the ub rows."""
        me, mu = self.A_eq.shape[0], self.A_ub.shape[0]
        A = np.zeros((me + mu, self.n + mu))
        A[:me, : self.n] = self.A_eq
        A[me:, : self.n] = self.A_ub
        A[me:, self.n :] = np.eye(mu)
        b = np.concatenate([self.b_eq, self.b_ub])
        c = np.concatenate([self.c, np.zeros(mu)])
        return A, b, c


@dataclass
class LPSolution:
    x: np.ndarray
    value: float
    y_eq: np.ndarray
    y_ub: np.ndarray
    basis: tuple
    iterations: int
    duality_gap: float
    dual_infeasibility: float
    cs_residual: float
    used_bland: bool

    @property
    def dual_value(self) -> float:
        return self.value + self.duality_gap


class _Tableau:
    """Dense tableau ``[A | b]`` with an explicit basis list."""

    def __init__(self, T: np.ndarray, basis: list[int]):
        self.T = T
        self.basis = basis

    def pivot(self, r: int, k: int, obj: np.ndarray) -> None:
        T = self.T
        T[r] /= T[r, k]
        col = T[:, k].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])
        obj -= obj[k] * T[r]
        self.basis[r] = k


def _run(tab: _Tableau, obj: np.ndarray, allowed: np.ndarray, rule: str, max_iter: int):
    """Pivot until no allowed column has a positive reduced cost.

    ``obj`` holds the reduced costs in its first entries and minus the
    objective value in the last.  Returns ``(iterations, used_bland)``.
    """
    T = tab.T
    m = T.shape[0]
    bland = rule == "bland"
    degenerate = 0
    switch_after = 2 * (m + T.shape[1])
    for it in range(max_iter):
        red = np.where(allowed, obj[:-1], 0.0)
        cand = np.flatnonzero(red > FEAS_TOL)
        if cand.size == 0:
            return it, bland
        k = int(cand[0]) if bland else int(cand[np.argmax(red[cand])])
        col = T[:, k]
        rows = np.flatnonzero(col > PIVOT_TOL)
        if rows.size == 0:
            raise LPUnbounded(f"column {k} has no positive entry")
        ratios = T[rows, -1] / col[rows]
        best = ratios.min()
        ties = rows[ratios <= best + 1e-12 * (1.0 + abs(best))]
        r = int(min(ties, key=lambda i: tab.basis[i]))
        degenerate = degenerate + 1 if best <= FEAS_TOL else 0
        if not bland and degenerate > switch_after:
            bland = True
        tab.pivot(r, k, obj)
    raise LPCycling(f"simplex did not terminate in {max_iter} pivots (Bland fallback={bland})")


def simplex_solve(p: LPProblem, rule: str = "dantzig", max_iter: int | None = None) -> LPSolution:
    """Two-phase dense simplex with a verified dual certificate.

    Parameters
    ----------
    p : LPProblem
    rule : {"dantzig", "bland"}
        Entering-variable rule.  Dantzig pricing switches to Bland's rule
        after a long run of degenerate pivots.
    max_iter : int, optional
        Pivot limit per phase.

    Returns
    -------
    LPSolution
        Primal optimum ``x`` and multipliers ``y_eq`` (free) and
        ``y_ub >= 0`` with ``c <= A_eq^T y_eq + A_ub^T y_ub``.

    Raises
    ------
    LPInfeasible, LPUnbounded, LPCycling
    LPError
        If the recovered certificate has a duality gap above ``1e-9``
        relative to ``1 + |value|``.
    """
    if rule not in ("dantzig", "bland"):
        raise ValueError(f"unknown pricing rule {rule!r}")
    A, b, c = p.standard_form()
    m, N = A.shape
    me = p.A_eq.shape[0]
    if max_iter is None:
        max_iter = 50 * (m + N) + 100

    sign = np.where(b < 0, -1.0, 1.0)
    As, bs = A * sign[:, None], b * sign
    # slack columns of unflipped ub rows form part of the starting basis
    basis, art_rows = [], []
    for i in range(m):
        if i >= me and sign[i] > 0:
            basis.append(p.n + i - me)
        else:
            basis.append(-1)
            art_rows.append(i)
    na = len(art_rows)
    T = np.zeros((m, N + na + 1))
    T[:, :N] = As
    T[:, -1] = bs
    for j, i in enumerate(art_rows):
        T[i, N + j] = 1.0
        basis[i] = N + j
    tab = _Tableau(T, basis)
    iters, bland_used = 0, False

    if na:
        obj = np.zeros(N + na + 1)
        obj[N : N + na] = -1.0
        for i in art_rows:
            obj += T[i]
        allowed = np.ones(N + na, dtype=bool)
        it, bl = _run(tab, obj, allowed, rule, max_iter)
        iters += it
        bland_used |= bl
        # obj[-1] equals the remaining sum of artificials
        if obj[-1] > FEAS_TOL * (1.0 + np.abs(bs).max(initial=0.0)):
            raise LPInfeasible(f"phase one ended with infeasibility {obj[-1]:.3e}")
        # drive zero-level artificials out of the basis, dropping redundant rows
        keep = np.ones(m, dtype=bool)
        for r in range(m):
            if tab.basis[r] >= N:
                row = tab.T[r, :N]
                nz = np.flatnonzero(np.abs(row) > 1e-9)
                if nz.size:
                    tab.pivot(r, int(nz[0]), obj)
                else:
                    keep[r] = False
        tab.T = np.delete(tab.T[keep], np.s_[N : N + na], axis=1)
        tab.basis = [bv for bv, k in zip(tab.basis, keep) if k]
    else:
        keep = np.ones(m, dtype=bool)

    obj = np.zeros(N + 1)
    obj[:N] = c
    for r, bv in enumerate(tab.basis):
        obj -= c[bv] * tab.T[r]
    it, bl = _run(tab, obj, np.ones(N, dtype=bool), rule, max_iter)
    iters += it
    bland_used |= bl

    # recover primal and dual from the original data for accuracy
    rows = np.flatnonzero(keep)
    B = A[np.ix_(rows, tab.basis)]
    z = np.zeros(N)
    z[tab.basis] = np.linalg.solve(B, b[rows])
    z = np.maximum(z, 0.0)
    y = np.zeros(m)
    y[rows] = np.linalg.solve(B.T, c[tab.basis])
    red = A.T @ y - c
    dual_inf = float(max(0.0, -red.min(initial=0.0)))
    value = float(c @ z)
    gap = float(b @ y - value)
    cs = float(max(np.abs(z * red).max(initial=0.0), np.abs(y * (A @ z - b)).max(initial=0.0)))
    scale = 1.0 + abs(value)
    if abs(gap) > GAP_TOL * scale or dual_inf > GAP_TOL * scale:
        raise LPError(f"dual certificate failed: gap={gap:.3e}, dual infeasibility={dual_inf:.3e}")
    return LPSolution(
        x=z[: p.n].copy(),
        value=value,
        y_eq=y[:me].copy(),
        y_ub=y[me:].copy(),
        basis=tuple(tab.basis),
        iterations=iters,
        duality_gap=gap,
        dual_infeasibility=dual_inf,
        cs_residual=cs,
        used_bland=bland_used,
    )


# signaling-bounded behaviors ------------------------------------------------

TARGETS = tuple(itertools.product(range(2), repeat=4))


def _flat(a, b, x, y) -> int:
    return ((a * 2 + b) * 2 + x) * 2 + y


def behavior_lp(I: float, delta: float, target, expr: BellExpression = CHSH,
                bell_inequality: bool = False) -> LPProblem:
    """LP maximizing ``P(target)`` over behaviors with Bell value ``I`` and signaling ``<= delta``.

    With ``bell_inequality`` the Bell constraint becomes ``value >= I``.
    """
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    c = np.zeros(16)
    c[_flat(*target)] = 1.0
    A_eq, b_eq, A_ub, b_ub = [], [], [], []
    for x, y in itertools.product(range(2), repeat=2):
        row = np.zeros(16)
        for a, b in itertools.product(range(2), repeat=2):
            row[_flat(a, b, x, y)] = 1.0
        A_eq.append(row)
        b_eq.append(1.0)
    bell = expr.coeffs.reshape(-1)
    if bell_inequality:
        A_ub.append(-bell)
        b_ub.append(-I)
    else:
        A_eq.append(bell.copy())
        b_eq.append(I)
    # Alice's marginal under a change of y, then Bob's under a change of x
    for a, x in itertools.product(range(2), repeat=2):
        row = np.zeros(16)
        for b in range(2):
            row[_flat(a, b, x, 0)] += 1.0
            row[_flat(a, b, x, 1)] -= 1.0
        A_ub += [row, -row]
        b_ub += [delta, delta]
    for b, y in itertools.product(range(2), repeat=2):
        row = np.zeros(16)
        for a in range(2):
            row[_flat(a, b, 0, y)] += 1.0
            row[_flat(a, b, 1, y)] -= 1.0
        A_ub += [row, -row]
        b_ub += [delta, delta]
    return LPProblem(c, A_eq, b_eq, A_ub, b_ub)


class LPBound(NamedTuple):
    value: float
    behavior: Behavior
    table: np.ndarray  # table[a, b, x, y] = optimum for that target


def p_star_lp(I: float, delta: float, *, expr: BellExpression = CHSH,
              bell_inequality: bool = False, rule: str = "dantzig") -> LPBound:
    """Largest single-outcome probability among behaviors with signaling ``<= delta``.

    Every one of the 16 targets ``(a, b, x, y)`` is solved; the headline
    value is their maximum and ``table`` keeps all of them so ties are
    visible.

    Raises
    ------
    LPInfeasible
        If ``|I|`` exceeds the algebraic maximum of the expression.
    LPError
        If a complementary-slackness residual exceeds ``1e-8``.
    """
    lim = float(np.abs(expr.coeffs).reshape(2, 2, 2, 2).max(axis=(0, 1)).sum())
    if abs(I) > lim + 1e-12:
        raise LPInfeasible(f"Bell value {I} is outside [-{lim}, {lim}]")
    table = np.zeros((2, 2, 2, 2))
    best, best_x = -np.inf, None
    for t in TARGETS:
        sol = simplex_solve(behavior_lp(I, delta, t, expr, bell_inequality), rule=rule)
        if sol.cs_residual > CS_TOL:
            raise LPError(f"complementary slackness residual {sol.cs_residual:.3e} at target {t}")
        table[t] = sol.value
        if sol.value > best + 1e-12:
            best, best_x = sol.value, sol.x
    p = best_x.reshape(2, 2, 2, 2)
    p = p / p.sum(axis=(0, 1), keepdims=True)
    return LPBound(float(best), Behavior(p), table)


def argmax_targets(table: np.ndarray, tol: float = 1e-9) -> list[tuple]:
    """All targets whose optimum is within ``tol`` of the maximum."""
    top = table.max()
    return [t for t in TARGETS if table[t] >= top - tol]
