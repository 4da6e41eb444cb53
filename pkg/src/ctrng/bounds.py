"""Upper bounds on the guessing probability ``P*_xy(I, chi)``.

Three families live here:

* closed forms: the no-cross-talk CHSH ceiling, the shifted bound
  ``P*(I - gamma chi, 0) + chi`` and the signaling bound;
* relaxation bounds, where every number returned is the certified side of
  a conic solve;
* :class:`ZeroCurve`, a memoized grid of cross-talk-free relaxation values
  that can be plugged into the shifted bound.

All guessing-probability bounds are clipped to ``[1/4, 1]``.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import sdp
from .bell import CHSH, BellExpression, Behavior, signaling_delta
from .ncpoly import MonomialSet, max_bell_given_chi, min_chi_program, parse_level, randomness_program

TSIRELSON = 2.0 * math.sqrt(2.0)
P_MIN = 0.25
SDP_TOL = 1e-6
TSIRELSON_MARGIN = 1e-6
DEFAULT_LEVEL = "L1+XY"


class BoundError(RuntimeError):
    """A relaxation could not be solved to a certified optimum."""


def _clip(p: float) -> float:
    return float(min(1.0, max(P_MIN, p)))


def _level(level) -> MonomialSet:
    if isinstance(level, MonomialSet):
        return level
    return parse_level(level)


# closed forms ---------------------------------------------------------------


def closed_form_chsh_zero(I: float) -> float:
    """``1/2 + sqrt(2 - I^2/4) / 2``, a certified ceiling for ``chi = 0``.

    Values ``I <= 2`` give 1.  Bell values beyond Tsirelson's bound are
    rejected since no quantum behavior reaches them.
    """
    if I > TSIRELSON + 1e-12:
        raise ValueError(f"I={I} exceeds Tsirelson's bound {TSIRELSON}")
    if I <= 2.0:
        return 1.0
    return _clip(0.5 + 0.5 * math.sqrt(max(0.0, 2.0 - I * I / 4.0)))


def bound_shifted(I: float, chi: float, gamma: float = CHSH.gamma,
                  zero_curve: Callable[[float], float] | None = None) -> float:
    """Cross-talk bound from the cross-talk-free curve.

    Returns ``min(1, zero_curve(max(I - gamma chi, 2)) + chi)``.  The
    shifted argument is also capped at Tsirelson's bound: a Bell value no
    quantum behavior reaches leaves the curve's last value as a valid
    ceiling.

    Parameters
    ----------
    I : float
        Bell value.
    chi : float
        Cross-talk budget.
    gamma : float
        Coefficient mass of the Bell expression (16 for CHSH).
    zero_curve : callable, optional
        Nonincreasing map ``I -> P*(I, 0)``.  Defaults to
        :func:`closed_form_chsh_zero`.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if not 0.0 <= chi <= 1.0:
        raise ValueError("chi must lie in [0, 1]")
    f = zero_curve or closed_form_chsh_zero
    arg = min(max(I - gamma * chi, 2.0), TSIRELSON)
    return _clip(f(arg) + chi)


def bound_signaling(I: float, delta: float) -> float:
    """Guessing probability bound for behaviors with signaling ``<= delta``."""
    if not -4.0 - 1e-12 <= I <= 4.0 + 1e-12:
        raise ValueError("CHSH value must lie in [-4, 4]")
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    if I <= 2.0:
        return 1.0
    return _clip(max(2.0 - I / 2.0, 1.5 - I / 4.0 + 2.0 * delta))


# relaxation bounds ----------------------------------------------------------


@dataclass
class SDPBound:
    """Certified relaxation value with the reports behind it.

    ``reports`` and ``problems`` are keyed by target; each report can be
    rechecked with ``sdp.validate_certificate(problems[t], reports[t])``.
    """

    value: float
    primal: float
    level: str
    target: tuple
    reports: dict = field(default_factory=dict)
    problems: dict = field(default_factory=dict)


def _solve(prob, tol: float) -> tuple[sdp.SolveReport, sdp.ConicProblem]:
    cp = sdp.ConicProblem.from_relaxation(prob)
    try:
        r = sdp.solve(cp, tol=tol)
    except sdp.SolverError as exc:
        raise BoundError(f"{prob.kind} relaxation failed: {exc}") from exc
    if not r.ok:
        raise BoundError(f"{prob.kind} relaxation ended with status {r.status}")
    return r, cp


def setting_targets(x: int, y: int) -> tuple[tuple, tuple]:
    """Representatives ``(correlated, anticorrelated)`` of the outcomes at ``(x, y)``.

    Flipping both outputs maps the CHSH expression and every cross-talk
    constraint to itself, so ``(a, b)`` and ``(1-a, 1-b)`` share one
    optimum.
    """
    c = x & y
    return (0, c, x, y), (0, 1 - c, x, y)


def sdp_p_star(I: float, chi: float, setting=(0, 0), level=DEFAULT_LEVEL, *,
               screen_level="L1", tol: float = SDP_TOL,
               expr: BellExpression = CHSH, bell_inequality: bool = False) -> SDPBound:
    """Certified relaxation bound on ``max_ab P(ab|xy)``.

    The anticorrelated target is first bounded at the cheaper
    ``screen_level``; any relaxation bounds the quantum value, so that
    screen is kept whenever it does not exceed the correlated result.
    """
    lv = _level(level)
    if chi == 0.0 and I > TSIRELSON + 1e-9:
        raise ValueError(f"I={I} exceeds Tsirelson's bound; no cross-talk-free behavior")
    if chi == 0.0 and I > TSIRELSON - TSIRELSON_MARGIN:
        # no interior point at the boundary; the value is nonincreasing in I
        # above 2, so a point just inside bounds it
        I = TSIRELSON - TSIRELSON_MARGIN
    if I <= 2.0:
        # the local deterministic box already reaches probability one
        return SDPBound(1.0, 1.0, lv.describe(), setting_targets(*setting)[0])
    corr, anti = setting_targets(*setting)
    r, cp = _solve(randomness_program(I, chi, corr, lv, expr=expr,
                                      bell_inequality=bell_inequality), tol)
    reports, problems = {corr: r}, {corr: cp}
    best, primal, target = r.certified_bound, r.primal_objective, corr
    lv_anti = _level(screen_level) if screen_level is not None else lv
    ra, cpa = _solve(randomness_program(I, chi, anti, lv_anti, expr=expr,
                                        bell_inequality=bell_inequality), tol)
    if ra.certified_bound > best and lv_anti != lv:
        ra, cpa = _solve(randomness_program(I, chi, anti, lv, expr=expr,
                                            bell_inequality=bell_inequality), tol)
    reports[anti], problems[anti] = ra, cpa
    if ra.certified_bound > best:
        best, primal, target = ra.certified_bound, ra.primal_objective, anti
    return SDPBound(_clip(best), primal, lv.describe(), target, reports, problems)


def sdp_max_bell(chi: float, level="L1", tol: float = SDP_TOL,
                 expr: BellExpression = CHSH) -> SDPBound:
    """Certified upper bound on the Bell value reachable with cross-talk ``chi``."""
    lv = _level(level)
    r, _ = _solve(max_bell_given_chi(chi, lv, expr=expr), tol)
    return SDPBound(r.certified_bound, r.primal_objective, lv.describe(), (), {"max": r})


@dataclass
class ChiEstimate:
    """Device-independent lower bound on the cross-talk of a behavior."""

    value: float
    simple: float
    method: str
    level: str
    reports: list = field(default_factory=list)


def chi_lower_bound_simple(p: Behavior) -> float:
    """``delta / 2N`` from the observed signaling."""
    n = p.p.shape[0]
    return signaling_delta(p) / (2.0 * n)


def sdp_min_chi(p: Behavior, level: str | MonomialSet = "L1+XY:scalar", *,
                pin_tolerance: float = 0.0, tol: float = SDP_TOL,
                bisect_tol: float = 1e-4) -> ChiEstimate:
    """Certified lower bound on the cross-talk needed to produce ``p``.

    With the scalar localizing set the cross-talk is a decision variable
    and one solve suffices.  Richer localizing sets keep the program
    linear only for fixed ``chi``; the bound is then found by bisection
    on shift feasibility, keeping the largest ``chi`` certified
    infeasible.
    """
    lv = _level(level)
    simple = chi_lower_bound_simple(p)
    if lv.localizing_kind == "scalar":
        r, _ = _solve(min_chi_program(p, lv, pin_tolerance=pin_tolerance), tol)
        val = max(0.0, r.certified_bound)
        return ChiEstimate(val, simple, "direct", lv.describe(), [r])
    reports = []

    def infeasible(chi: float) -> bool:
        r, _ = _solve(min_chi_program(p, lv, pin_tolerance=pin_tolerance, chi=chi), tol)
        reports.append(r)
        return r.certified_bound > 0.0

    lo, hi = 0.0, 1.0
    if not infeasible(lo):
        return ChiEstimate(0.0, simple, "bisection", lv.describe(), reports)
    while hi - lo > bisect_tol:
        mid = 0.5 * (lo + hi)
        if infeasible(mid):
            lo = mid
        else:
            hi = mid
    return ChiEstimate(lo, simple, "bisection", lv.describe(), reports)


# cross-talk-free curve ------------------------------------------------------


class ZeroCurve:
    """Memoized grid of certified ``chi = 0`` relaxation bounds.

    Each target's relaxation value, with the Bell constraint read as
    ``value >= I``, is concave and nonincreasing in ``I``.  Between grid
    points ``I_k <= I <= I_{k+1}`` the correlated target therefore lies
    below the extension of the chord through ``I_{k-1}, I_k`` and below
    the extension of the chord through ``I_{k+1}, I_{k+2}``.  Each chord
    joins a certified upper value at its inner end to a primal lower
    value at its outer end, so the interpolant stays a valid upper bound.
    The anticorrelated target uses the value at ``I_k`` (monotonicity
    only), and the curve is the larger of the two.  Grid points cluster
    quadratically near ``I = 2`` where the curve is steepest.

    Parameters
    ----------
    level : str or MonomialSet
        Relaxation level of the grid.
    steps : int
        Number of grid points on ``[2, 2 sqrt 2]``.
    setting : tuple
        Input pair ``(x, y)``.
    """

    def __init__(self, level="L2r", steps: int = 25, setting=(0, 0), tol: float = SDP_TOL):
        if steps < 2:
            raise ValueError("a curve needs at least two grid points")
        self.level = _level(level)
        self.steps = steps
        self.setting = tuple(setting)
        self.tol = tol
        self._grid: dict | None = None
        self._lock = threading.Lock()

    def grid(self) -> dict:
        """Arrays ``I``, ``upper``, ``lower`` (correlated) and ``anti``; built on first use."""
        with self._lock:
            if self._grid is None:
                self._grid = self._build()
        return self._grid

    def _build(self) -> dict:
        # the right end has no interior point; stay just inside it
        t = np.linspace(0.0, 1.0, self.steps)
        Is = 2.0 + (TSIRELSON - TSIRELSON_MARGIN - 2.0) * t**2
        corr, anti = setting_targets(*self.setting)
        up, lo, up_a = [1.0], [1.0], [1.0]
        for I in Is[1:]:
            rc, _ = _solve(randomness_program(float(I), 0.0, corr, self.level,
                                              bell_inequality=True), self.tol)
            ra, _ = _solve(randomness_program(float(I), 0.0, anti, self.level,
                                              bell_inequality=True), self.tol)
            up.append(min(1.0, rc.certified_bound))
            lo.append(min(up[-1], rc.primal_objective) - 10 * self.tol)
            up_a.append(min(1.0, ra.certified_bound))
        grid = {"I": Is, "upper": np.array(up), "lower": np.array(lo),
                "anti": np.array(up_a)}
        for v in grid.values():
            v.setflags(write=False)
        return grid

    def __call__(self, I: float) -> float:
        g = self.grid()
        Is, up, lo = g["I"], g["upper"], g["lower"]
        if I > TSIRELSON + 1e-9:
            raise ValueError(f"I={I} exceeds Tsirelson's bound")
        if I <= Is[0]:
            return 1.0
        k = min(int(np.searchsorted(Is, I, side="right")) - 1, len(Is) - 1)
        val = up[k]
        if k >= 1:
            slope = (up[k] - lo[k - 1]) / (Is[k] - Is[k - 1])
            val = min(val, up[k] + slope * (I - Is[k]))
        if k + 2 < len(Is):
            slope = (lo[k + 2] - up[k + 1]) / (Is[k + 2] - Is[k + 1])
            val = min(val, up[k + 1] + slope * (I - Is[k + 1]))
        return _clip(max(val, g["anti"][k]))


class ClosedFormCurve:
    def __call__(self, I: float) -> float:
        return closed_form_chsh_zero(I)


def zero_curve(kind: str = "sdp", **kw):
    """Cross-talk-free curve by name: ``"sdp"`` (memoized grid) or ``"closed"``."""
    if kind == "closed":
        return ClosedFormCurve()
    if kind == "sdp":
        return ZeroCurve(**kw)
    raise ValueError(f"unknown zero curve {kind!r}")
