"""Dense primal-dual interior-point solver for block SDPs with free variables.

Problems are stated over a free vector ``y``::

    maximise   c @ y + c0
    subject to E y = e
               F_j(y) = F_j0 + sum_i y_i F_ji  >= 0   for every block j

The multiplier problem is::

    minimise   sum_j <F_j0, X_j> + e @ lam + c0
    subject to F*(X) - E^T lam = -c,   X_j >= 0

and any multiplier ``(X, lam)`` with ``X >= 0`` gives the upper bound
``<F0, X> + e @ lam + c0 + sum_i B_i |r_i|`` on the objective of every
feasible ``y`` with ``|y_i| <= B_i``, where ``r = c + F*(X) - E^T lam``.
Moments of norm-one operators satisfy ``|y_i| <= 1``, which makes the
correction term rigorous for the quantum problem without an exactly
feasible multiplier.

The iteration is an infeasible-start path-following method with the
Nesterov-Todd search direction and Mehrotra predictor-corrector steps.
Equalities are eliminated up front by a null-space parametrization
``y = y0 + N z``, so the Newton system only sees the cone constraints.
Schur complements are assembled densely, Jacobi-scaled and factored by
Cholesky, and every solve is polished by iterative refinement.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .linalg import herm_eigs
from .ncpoly import CONST, RelaxationProblem

log = logging.getLogger(__name__)

OPTIMAL = "optimal"
PRIMAL_INFEASIBLE = "primal-infeasible"
DUAL_INFEASIBLE = "dual-infeasible"
MAX_ITERATIONS = "max-iterations"

MAX_PSD_DIM = 2000
REFINE = 4
STEP_FRACTION = 0.98
CENTRALITY = 1e-2
STALL_ITERATIONS = 15
MAX_SCHUR_ENTRIES = 60_000_000


class SolverError(RuntimeError):
    """The KKT system could not be solved (step-size failure).

    ``report`` holds the best iterate reached before the failure, when any.
    """

    report = None


class CertificateError(RuntimeError):
    """A multiplier certificate failed independent revalidation."""


class ProblemTooLarge(ValueError):
    pass


@dataclass
class ConicBlock:
    name: str
    dim: int
    rows: np.ndarray
    cols: np.ndarray
    vars: np.ndarray
    coefs: np.ndarray

    def matrix(self, y: np.ndarray, with_const: bool = True) -> np.ndarray:
        """Dense ``F(y)`` (or its linear part) by direct accumulation."""
        s = np.zeros((self.dim, self.dim))
        const = self.vars == CONST
        vals = np.where(const, 1.0 if with_const else 0.0, y[np.maximum(self.vars, 0)])
        np.add.at(s, (self.rows, self.cols), self.coefs * vals)
        return s + np.triu(s, 1).T

    def adjoint(self, x: np.ndarray, n: int) -> np.ndarray:
        """``F*(X)_i = <F_i, X>`` by direct accumulation."""
        out = np.zeros(n)
        lin = self.vars != CONST
        w = np.where(self.rows == self.cols, 1.0, 2.0)
        np.add.at(out, self.vars[lin], (self.coefs * w * x[self.rows, self.cols])[lin])
        return out

    def constant_inner(self, x: np.ndarray) -> float:
        const = self.vars == CONST
        w = np.where(self.rows == self.cols, 1.0, 2.0)
        return float(np.sum((self.coefs * w * x[self.rows, self.cols])[const]))


@dataclass
class ConicProblem:
    """Linear conic problem in the free-variable form above.

    ``sense`` records the original direction; ``c`` is always the
    objective of the original problem, and minimisation is handled by the
    solver via negation.
    """

    n: int
    c: np.ndarray
    c0: float
    E: sp.csr_matrix
    e: np.ndarray
    blocks: list[ConicBlock]
    sense: str = "max"
    var_bounds: np.ndarray | None = None
    names: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.e = np.asarray(self.e, dtype=float)
        if self.var_bounds is None:
            self.var_bounds = np.ones(self.n)
        if self.c.shape != (self.n,) or self.E.shape[1] != self.n or self.E.shape[0] != self.e.size:
            raise ValueError("inconsistent problem dimensions")
        if not self.blocks:
            raise ValueError("at least one PSD block is required")
        if not np.all(np.isfinite(self.c)):
            raise ValueError("objective must be finite")
        for b in self.blocks:
            if b.rows.size and (b.rows.max() >= b.dim or b.cols.max() >= b.dim):
                raise ValueError(f"block {b.name} has entries outside its dimension")

    @property
    def psd_dim(self) -> int:
        return sum(b.dim for b in self.blocks)

    @classmethod
    def from_relaxation(cls, prob: RelaxationProblem) -> "ConicProblem":
        n = prob.n_vars
        c = np.zeros(n)
        for k, v in prob.objective.items():
            c[k] += v
        rows, cols, vals = [], [], []
        e = []
        for r, (coeffs, rhs) in enumerate(prob.equalities):
            for k, v in coeffs.items():
                rows.append(r)
                cols.append(k)
                vals.append(v)
            e.append(rhs)
        E = sp.csr_matrix((vals, (rows, cols)), shape=(len(e), n))
        blocks = [
            ConicBlock(b.name, b.dim, np.asarray(b.rows, dtype=int), np.asarray(b.cols, dtype=int),
                       np.asarray(b.vars, dtype=int), np.asarray(b.coefs, dtype=float))
            for b in prob.blocks
        ]
        return cls(n=n, c=c, c0=prob.objective_const, E=E, e=np.asarray(e, dtype=float),
                   blocks=blocks, sense=prob.sense, names=list(prob.variables))

    def scaled(self, objective: float = 1.0) -> "ConicProblem":
        return ConicProblem(self.n, self.c * objective, self.c0 * objective, self.E, self.e,
                            self.blocks, self.sense, self.var_bounds, self.names)


@dataclass
class SolveReport:
    status: str
    primal_objective: float
    dual_objective: float
    gap: float
    residuals: dict
    certified_bound: float | None
    iterations: int
    wall_time: float
    sense: str
    y: np.ndarray | None = None
    X: list[np.ndarray] | None = None
    lam: np.ndarray | None = None
    history: list[dict] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL

    def to_dict(self, arrays: bool = False) -> dict:
        d = {
            "status": self.status,
            "sense": self.sense,
            "primal_objective": self.primal_objective,
            "dual_objective": self.dual_objective,
            "gap": self.gap,
            "residuals": self.residuals,
            "certified_bound": self.certified_bound,
            "iterations": self.iterations,
            "wall_time": self.wall_time,
        }
        if arrays:
            d["y"] = None if self.y is None else self.y.tolist()
            d["X"] = None if self.X is None else [x.tolist() for x in self.X]
            d["lam"] = None if self.lam is None else self.lam.tolist()
        return d

    def to_json(self, arrays: bool = False) -> str:
        return json.dumps(self.to_dict(arrays))


class _BlockOps:
    """Solver-side view of one block: ``F(z) = unsvec(g0 + G z)``.

    ``G`` acts on the reduced variable ``z`` with ``y = y0 + N z``, so
    equality constraints never reach the Newton system.
    """

    def __init__(self, b: ConicBlock, n: int, y0: np.ndarray | None = None,
                 N: np.ndarray | None = None):
        self.dim = b.dim
        keys = b.rows * b.dim + b.cols
        ukeys, inv = np.unique(keys, return_inverse=True)
        self.R = ukeys // b.dim
        self.C = ukeys % b.dim
        nu = ukeys.size
        lin = b.vars != CONST
        G = sp.csr_matrix((b.coefs[lin], (inv[lin], b.vars[lin])), shape=(nu, n))
        self.g0 = np.zeros(nu)
        np.add.at(self.g0, inv[~lin], b.coefs[~lin])
        if N is not None:
            self.g0 = self.g0 + G @ y0
            G = np.asarray(G @ N)
        self.G = G
        self.GT = G.T.tocsr() if sp.issparse(G) else np.ascontiguousarray(G.T)
        self.w = np.where(self.R == self.C, 1.0, 2.0)
        self.s = np.where(self.R == self.C, 0.5, 1.0)

    def unsvec(self, v: np.ndarray) -> np.ndarray:
        m = np.zeros((self.dim, self.dim))
        m[self.R, self.C] = v
        m[self.C, self.R] = v
        return m

    def op(self, z: np.ndarray, const: bool = True) -> np.ndarray:
        v = self.G @ z
        if const:
            v = v + self.g0
        return self.unsvec(v)

    def adj(self, x: np.ndarray) -> np.ndarray:
        return self.GT @ (self.w * x[self.R, self.C])

    def const_inner(self, x: np.ndarray) -> float:
        return float(np.dot(self.g0, self.w * x[self.R, self.C]))

    def schur(self, x: np.ndarray, winv: np.ndarray) -> np.ndarray:
        """``M[i, j] = <F_i, sym(X F_j W)>`` for this block."""
        R, C = self.R, self.C
        if self.dim == 1:
            k = np.array([[x[0, 0] * winv[0, 0]]])
        else:
            xcr = x[np.ix_(C, R)]
            wcr = winv[np.ix_(C, R)]
            k = (xcr * wcr.T + x[np.ix_(C, C)] * winv[np.ix_(R, R)].T
                 + x[np.ix_(R, R)] * winv[np.ix_(C, C)].T + xcr.T * wcr)
            k *= np.outer(self.s, self.s)
        return self.GT @ (self.GT @ k.T).T


def _sym(a):
    return 0.5 * (a + a.T)


def _max_step(x: np.ndarray, dx: np.ndarray) -> float:
    """Largest alpha <= 1e6 keeping ``x + alpha dx`` PSD (x PD)."""
    if x.shape[0] == 1:
        return -x[0, 0] / dx[0, 0] if dx[0, 0] < 0 else 1e6
    try:
        L = np.linalg.cholesky(x)
    except np.linalg.LinAlgError:
        return 0.0
    Li = sla.solve_triangular(L, np.eye(x.shape[0]), lower=True)
    m = Li @ dx @ Li.T
    lmin = np.linalg.eigvalsh(_sym(m))[0]
    return -1.0 / lmin if lmin < 0 else 1e6


def _step(blocks, steps) -> float:
    return min([1.0] + [_max_step(b, d) for b, d in zip(blocks, steps)])


def _centrality(X, S, dims) -> float:
    """Smallest eigenvalue of ``X S`` over ``mu``; ``nan`` if a block is not PD."""
    mu = sum(float(np.sum(x * s)) for x, s in zip(X, S)) / dims
    worst = np.inf
    for x, s in zip(X, S):
        if x.shape[0] == 1:
            if not (x[0, 0] > 0.0 and s[0, 0] > 0.0):
                return np.nan
            worst = min(worst, x[0, 0] * s[0, 0])
            continue
        try:
            L = np.linalg.cholesky(x)
            np.linalg.cholesky(s)
        except np.linalg.LinAlgError:
            return np.nan
        worst = min(worst, float(np.linalg.eigvalsh(L.T @ s @ L)[0]))
    return worst / mu if mu > 0 else np.nan


def _advance_central(X, dX, ap, S, dS, ad, dims, tries: int = 12):
    """Take the step, shortening it until iterates stay PD and roughly centred."""
    floor = min(CENTRALITY, 0.5 * _centrality(X, S, dims))
    for _ in range(tries):
        Xn = [_sym(x + ap * d) for x, d in zip(X, dX)]
        Sn = [_sym(s + ad * d) for s, d in zip(S, dS)]
        if _centrality(Xn, Sn, dims) >= floor:
            return Xn, Sn, ap, ad
        ap *= 0.8
        ad *= 0.8
    return None, None, 0.0, 0.0


def _independent_rows(E: np.ndarray, e: np.ndarray, tol: float = 1e-10):
    """Drop linearly dependent equality rows; detect inconsistency."""
    if E.shape[0] == 0:
        return E, e, True
    q, r, piv = sla.qr(E.T, mode="economic", pivoting=True)
    d = np.abs(np.diag(r))
    rank = int(np.sum(d > tol * max(1.0, d[0])))
    keep = np.sort(piv[:rank])
    Ek, ek = E[keep], e[keep]
    ysol, *_ = np.linalg.lstsq(Ek, ek, rcond=None)
    consistent = np.max(np.abs(E @ ysol - e), initial=0.0) <= 1e-8 * (1 + np.max(np.abs(e)))
    return Ek, ek, consistent


def solve(p: ConicProblem, tol: float = 1e-7, max_iter: int = 200, *,
          allow_large: bool = False, record_history: bool = False) -> SolveReport:
    """Solve ``p``; the certified bound is emitted only for optimal status."""
    t0 = time.perf_counter()
    if p.psd_dim > MAX_PSD_DIM and not allow_large:
        raise ProblemTooLarge(f"total PSD dimension {p.psd_dim} exceeds {MAX_PSD_DIM}")
    units = max(b.dim * (b.dim + 1) // 2 for b in p.blocks)
    if units * units > MAX_SCHUR_ENTRIES or p.n * p.n > MAX_SCHUR_ENTRIES:
        raise ProblemTooLarge(f"dense Schur complement too large ({p.n} variables, "
                              f"{units} block entries)")
    sign = 1.0 if p.sense == "max" else -1.0
    c_full = sign * p.c
    Ed, ed, consistent = _independent_rows(p.E.toarray(), p.e)
    hist: list[dict] = []

    def report(status, z, X, it, res, pobj, dobj):
        y = lam = bound = None
        if z is not None:
            y = y0 + N @ z if N is not None else z
        if X is not None:
            fx = sum(b.adjoint(x, p.n) for b, x in zip(p.blocks, X))
            lam = np.linalg.lstsq(Ed.T, c_full + fx, rcond=None)[0] if Ed.shape[0] else np.zeros(0)
        if status == OPTIMAL:
            bound = certified_bound(p, X, lam, Ed, ed)
        return SolveReport(status=status, primal_objective=sign * pobj + p.c0,
                           dual_objective=sign * dobj + p.c0,
                           gap=abs(pobj - dobj), residuals=res,
                           certified_bound=bound, iterations=it,
                           wall_time=time.perf_counter() - t0, sense=p.sense,
                           y=y, X=X, lam=lam, history=hist)

    y0 = N = None
    if not consistent:
        return report(PRIMAL_INFEASIBLE, None, None, 0, {}, np.nan, np.nan)
    if Ed.shape[0]:
        # parametrise the affine solution set y = y0 + N z
        y0 = np.linalg.lstsq(Ed, ed, rcond=None)[0]
        N = sla.null_space(Ed)
    ops = [_BlockOps(b, p.n, y0, N) for b in p.blocks]
    c = N.T @ c_full if N is not None else c_full
    cconst = float(c_full @ y0) if N is not None else 0.0
    n = c.size
    dims = sum(o.dim for o in ops)

    if n == 0:
        z = np.zeros(0)
        mins = [float(np.linalg.eigvalsh(o.op(z))[0]) for o in ops]
        X = [np.zeros((o.dim, o.dim)) for o in ops]
        status = OPTIMAL if min(mins) >= -tol else PRIMAL_INFEASIBLE
        return report(status, z, X, 0, {}, cconst, cconst)

    fnorm = max([1.0] + [float(np.max(np.abs(o.g0), initial=0.0)) for o in ops])
    cnorm = 1.0 + float(np.max(np.abs(c), initial=0.0))
    # Gram matrix of the block maps, used to repair the dual residual of each
    # direction when the Schur solve is inaccurate
    gram = np.zeros((n, n))
    for o in ops:
        gw = o.G.multiply(o.w[:, None]) if sp.issparse(o.G) else o.G * o.w[:, None]
        gram += np.asarray(o.GT @ gw.toarray() if sp.issparse(gw) else o.GT @ gw)
    try:
        gram_f = sla.cho_factor(gram, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise SolverError("block maps are linearly dependent") from exc
    z = np.zeros(n)
    X = [np.eye(o.dim) * cnorm for o in ops]
    S = [np.eye(o.dim) * (1.0 + fnorm) for o in ops]
    best = None
    since_best = 0

    for it in range(max_iter + 1):
        rp = [o.op(z) - s for o, s in zip(ops, S)]
        rd = -c - sum(o.adj(x) for o, x in zip(ops, X))
        pobj = float(c @ z) + cconst
        dobj = sum(o.const_inner(x) for o, x in zip(ops, X)) + cconst
        mu = sum(float(np.sum(x * s)) for x, s in zip(X, S)) / dims
        pinf = max(float(np.max(np.abs(r))) for r in rp) / (1.0 + fnorm)
        dinf = float(np.max(np.abs(rd))) / cnorm
        rgap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        res = {"primal_infeasibility": pinf, "dual_infeasibility": dinf,
               "relative_gap": rgap, "mu": mu}
        if record_history:
            hist.append({"iteration": it, "primal": sign * pobj + p.c0,
                         "dual": sign * dobj + p.c0, **res})
        log.debug("it %d pobj %.10g dobj %.10g pinf %.2e dinf %.2e gap %.2e", it, pobj, dobj,
                  pinf, dinf, rgap)
        # dobj - pobj = <X, S> + <X, rp> + rd . z with <X, S> >= 0
        slack = abs(sum(float(np.sum(x * r)) for x, r in zip(X, rp))) + abs(float(rd @ z))
        if pobj - dobj > slack + 1e-9 * (1.0 + abs(pobj) + abs(dobj)):
            raise SolverError(f"weak duality violated at iteration {it}")
        if pinf <= tol and dinf <= tol and rgap <= tol:
            return report(OPTIMAL, z, X, it, res, pobj, dobj)
        merit = max(pinf, dinf, rgap)
        if best is None or merit < 0.9 * best[0]:
            best = (merit, z, X, it, res, pobj, dobj)
            since_best = 0
        else:
            since_best += 1
        xnorm = max(float(np.max(np.abs(x))) for x in X)
        znorm = float(np.max(np.abs(z)))
        if xnorm > 1e10 and dobj < -1e8 * (1.0 + abs(pobj)):
            return report(PRIMAL_INFEASIBLE, z, X, it, res, pobj, dobj)
        if znorm > 1e10 and pobj > 1e8 * (1.0 + abs(dobj)):
            return report(DUAL_INFEASIBLE, z, X, it, res, pobj, dobj)
        if it == max_iter or since_best >= STALL_ITERATIONS:
            break
        try:
            z, X, S = _nt_step(ops, c, z, X, S, rp, rd, mu, dims, gram_f)
        except SolverError as exc:
            exc.report = report(MAX_ITERATIONS, *best[1:])
            raise

    return report(MAX_ITERATIONS, *best[1:])


def _nt_step(ops, c, z, X, S, rp, rd, mu, dims, gram_f):
    """One Mehrotra predictor-corrector step along the Nesterov-Todd direction."""
    n = z.size
    # scaling: R^T S R = R^-1 X R^-T = diag(lam), W = R R^T satisfies W S W = X
    Rs, Ris, Ws, lams = [], [], [], []
    for x, s in zip(X, S):
        try:
            lx = np.linalg.cholesky(x)
            ls = np.linalg.cholesky(s)
        except np.linalg.LinAlgError as exc:
            raise SolverError("iterate lost definiteness") from exc
        _, sv, vt = np.linalg.svd(ls.T @ lx)
        Rs.append((lx @ vt.T) / np.sqrt(sv))
        Ris.append((np.sqrt(sv)[:, None] * vt)
                   @ sla.solve_triangular(lx, np.eye(x.shape[0]), lower=True))
        Ws.append(_sym(Rs[-1] @ Rs[-1].T))
        lams.append(sv)
    M = np.zeros((n, n))
    for o, w in zip(ops, Ws):
        M += o.schur(w, w)
    M = _sym(M)
    # Jacobi scaling separates the O(1/mu) and O(mu) curvature directions
    dsc = 1.0 / np.sqrt(np.maximum(np.diag(M), 1e-300))
    Ms = M * np.outer(dsc, dsc)
    fac = None
    for reg in (0.0, 1e-14, 1e-12, 1e-10, 1e-8, 1e-6):
        try:
            fac = sla.cho_factor(Ms + reg * np.eye(n), lower=True, check_finite=False)
            break
        except np.linalg.LinAlgError:
            continue
    if fac is None:
        raise SolverError("Schur complement is not positive definite")

    def msolve(r):
        return dsc * sla.cho_solve(fac, dsc * r, check_finite=False)

    def schur_apply(dz):
        return sum(o.adj(w @ o.op(dz, const=False) @ w) for o, w in zip(ops, Ws))

    def direction(rc):
        """Newton direction for the scaled complementarity target ``rc``."""
        T = [r @ (q * (2.0 / (lm[:, None] + lm[None, :]))) @ r.T
             for r, q, lm in zip(Rs, rc, lams)]
        rhs = sum(o.adj(_sym(t - w @ r @ w)) for o, t, w, r in zip(ops, T, Ws, rp)) - rd
        dz = msolve(rhs)
        rn_prev = np.inf
        for _ in range(REFINE):
            r1 = rhs - schur_apply(dz)
            rn = float(np.max(np.abs(r1)))
            if rn < 1e-15 * (1.0 + float(np.max(np.abs(rhs)))) or rn > 0.5 * rn_prev:
                break
            rn_prev = rn
            dz = dz + msolve(r1)
        dS = [o.op(dz, const=False) + r for o, r in zip(ops, rp)]
        dX = [_sym(t - w @ ds @ w) for t, w, ds in zip(T, Ws, dS)]
        ad = _step(S, dS)
        ap = _step(X, dX)
        # an inexact Schur solve leaves a dual residual; remove it by the
        # least-norm correction unless that blocks the step
        err = rd - sum(o.adj(d) for o, d in zip(ops, dX))
        v = sla.cho_solve(gram_f, err, check_finite=False)
        dXr = [d + o.op(v, const=False) for o, d in zip(ops, dX)]
        apr = _step(X, dXr)
        if apr >= 0.5 * ap:
            dX, ap = dXr, apr
        return dz, dX, dS, ap, ad

    base = [-np.diag(lm * lm) for lm in lams]
    dz, dX, dS, ap, ad = direction(base)
    mu_aff = sum(float(np.sum((x + ap * dx) * (s + ad * ds)))
                 for x, dx, s, ds in zip(X, dX, S, dS)) / dims
    sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3)) if mu > 0 else 0.0
    corr = []
    for b, ri, r, dx, ds in zip(base, Ris, Rs, dX, dS):
        prod = (ri @ dx @ ri.T) @ (r.T @ ds @ r)
        corr.append(b + sigma * mu * np.eye(b.shape[0]) - _sym(prod))
    dz, dX, dS, ap, ad = direction(corr)
    ap = min(1.0, STEP_FRACTION * ap)
    ad = min(1.0, STEP_FRACTION * ad)
    log.debug("steps ap %.3e ad %.3e sigma %.2e", ap, ad, sigma)
    if ap < 1e-12 and ad < 1e-12:
        raise SolverError("step length collapsed to zero")
    X, S, ap, ad = _advance_central(X, dX, ap, S, dS, ad, dims)
    if X is None:
        raise SolverError("iterate left the PSD cone")
    return z + ad * dz, X, S


def certified_bound(p: ConicProblem, X, lam, Ed=None, ed=None) -> float:
    """Rigorous bound on the original objective from a multiplier ``(X, lam)``.

    Upper bound for maximisation problems, lower bound for minimisation.
    ``X`` is projected onto the PSD cone first; the remaining equality
    residual is charged against the variable bounds.
    """
    sign = 1.0 if p.sense == "max" else -1.0
    if Ed is None:
        Ed, ed = p.E.toarray(), p.e
    Xp = []
    for x in X:
        w, v = np.linalg.eigh(_sym(x))
        Xp.append((v * np.clip(w, 0.0, None)) @ v.T)
    fx = sum(b.adjoint(x, p.n) for b, x in zip(p.blocks, Xp))
    r = sign * p.c + fx - Ed.T @ lam
    val = sum(b.constant_inner(x) for b, x in zip(p.blocks, Xp)) + float(ed @ lam)
    val += float(np.sum(p.var_bounds * np.abs(r)))
    return sign * val + p.c0


@dataclass
class CertificateCheck:
    min_eigenvalues: list[float]
    residual_inf: float
    bound: float
    reported_bound: float | None


def validate_certificate(p: ConicProblem, r: SolveReport, tol: float = 1e-7) -> CertificateCheck:
    """Recheck a report's multiplier with plain dense arithmetic.

    Raises :class:`CertificateError` if the multiplier is not PSD, violates
    the dual equalities by more than ``10 * tol`` (relative), or implies a
    bound different from the reported one.
    """
    if r.X is None or r.lam is None:
        raise CertificateError("report carries no multiplier")
    if len(r.X) != len(p.blocks):
        raise CertificateError("multiplier has the wrong number of blocks")
    sign = 1.0 if p.sense == "max" else -1.0
    Ed = p.E.toarray()
    if r.lam.size != Ed.shape[0]:
        # the solver dropped dependent equality rows; rebuild them the same way
        Ed, ed, _ = _independent_rows(Ed, p.e)
        if r.lam.size != Ed.shape[0]:
            raise CertificateError("multiplier has the wrong number of equality entries")
    else:
        ed = p.e
    mins = []
    scale = 0.0
    for blk, x in zip(p.blocks, r.X):
        x = np.asarray(x)
        if x.shape != (blk.dim, blk.dim):
            raise CertificateError(f"block {blk.name} has the wrong shape")
        ev = herm_eigs(x, tol=1e-9 * max(1.0, float(np.max(np.abs(x)))))
        mins.append(float(ev[0]))
        scale = max(scale, float(np.max(np.abs(x))))
    if min(mins) < -10 * tol * max(1.0, scale):
        raise CertificateError(f"multiplier block not PSD (min eigenvalue {min(mins):.3e})")
    fx = sum(b.adjoint(np.asarray(x), p.n) for b, x in zip(p.blocks, r.X))
    resid = sign * p.c + fx - Ed.T @ r.lam
    rinf = float(np.max(np.abs(resid), initial=0.0))
    if rinf > 10 * tol * (1.0 + float(np.max(np.abs(p.c), initial=0.0))):
        raise CertificateError(f"dual equality residual {rinf:.3e} too large")
    bound = certified_bound(p, r.X, r.lam, Ed, ed)
    if r.certified_bound is not None and abs(bound - r.certified_bound) > 1e-9 * (1 + abs(bound)):
        raise CertificateError(f"recomputed bound {bound!r} != reported {r.certified_bound!r}")
    return CertificateCheck(mins, rinf, bound, r.certified_bound)


def solve_relaxation(prob: RelaxationProblem, tol: float = 1e-7, max_iter: int = 200,
                     **kw) -> tuple[SolveReport, ConicProblem]:
    cp = ConicProblem.from_relaxation(prob)
    return solve(cp, tol=tol, max_iter=max_iter, **kw), cp


def dump_problem(p: ConicProblem) -> str:
    coo = p.E.tocoo()
    return json.dumps({
        "format": "ctrng-conic/1",
        "n": p.n,
        "sense": p.sense,
        "c": p.c.tolist(),
        "c0": p.c0,
        "E": {"rows": coo.row.tolist(), "cols": coo.col.tolist(), "vals": coo.data.tolist(),
              "shape": list(p.E.shape)},
        "e": p.e.tolist(),
        "var_bounds": p.var_bounds.tolist(),
        "names": p.names,
        "blocks": [{"name": b.name, "dim": b.dim, "rows": b.rows.tolist(),
                    "cols": b.cols.tolist(), "vars": b.vars.tolist(),
                    "coefs": b.coefs.tolist()} for b in p.blocks],
    })


def load_problem(text: str) -> ConicProblem:
    d = json.loads(text)
    if d.get("format") == "ctrng-relaxation/1":
        return ConicProblem.from_relaxation(RelaxationProblem.from_dict(d))
    if d.get("format") != "ctrng-conic/1":
        raise ValueError("unknown problem format")
    E = sp.csr_matrix((d["E"]["vals"], (d["E"]["rows"], d["E"]["cols"])), shape=tuple(d["E"]["shape"]))
    blocks = [ConicBlock(b["name"], b["dim"], np.asarray(b["rows"], dtype=int),
                         np.asarray(b["cols"], dtype=int), np.asarray(b["vars"], dtype=int),
                         np.asarray(b["coefs"], dtype=float)) for b in d["blocks"]]
    return ConicProblem(n=d["n"], c=np.asarray(d["c"]), c0=d["c0"], E=E, e=np.asarray(d["e"]),
                        blocks=blocks, sense=d["sense"], var_bounds=np.asarray(d["var_bounds"]),
                        names=d.get("names", []))
