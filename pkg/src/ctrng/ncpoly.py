"""Moment and localizing-matrix relaxations with cross-talk operators.

Operator alphabet (binary outcomes, two settings per party):

* ``X[x]`` is the projector ``X_{0|x}``; ``X_{1|x} = 1 - X[x]``.
* ``Y[y]`` is the projector ``Y_{0|y}``; ``Y_{1|y} = 1 - Y[y]``.
* ``Z[a,b,x,y]`` is the collective POVM element for ``(a,b) != (1,1)``;
  ``Z_{11|xy} = 1 - Z_{00|xy} - Z_{01|xy} - Z_{10|xy}``.

Eliminating the last outcome symbolically imposes the POVM normalisations
at operator level, so every localizing entry sees them.  X and Y letters
are idempotent and commute with each other; Z letters are Hermitian but
obey no further rules.  Words are tuples of letter ids.  The relaxation is
real: ``<w>`` and ``<w^dagger>`` share one moment variable.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from .bell import CHSH, Behavior, BellExpression

Word = tuple[int, ...]
Poly = dict[Word, float]

X_IDS = (0, 1)
Y_IDS = (2, 3)
Z_IDS: dict[tuple[int, int, int, int], int] = {}
for _x, _y in itertools.product(range(2), repeat=2):
    for _a, _b in ((0, 0), (0, 1), (1, 0)):
        Z_IDS[(_a, _b, _x, _y)] = 4 + len(Z_IDS)
N_LETTERS = 4 + len(Z_IDS)
_Z_LABEL = {v: k for k, v in Z_IDS.items()}
OUTCOME_TARGETS = tuple(itertools.product(range(2), repeat=4))  # (a, b, x, y)


def letter_name(letter: int) -> str:
    if letter in X_IDS:
        return f"X{letter}"
    if letter in Y_IDS:
        return f"Y{letter - 2}"
    a, b, x, y = _Z_LABEL[letter]
    return f"Z{a}{b}|{x}{y}"


_NAME_TO_LETTER = {letter_name(i): i for i in range(N_LETTERS)}


def word_str(w: Word) -> str:
    return "*".join(letter_name(c) for c in w) if w else "1"


def parse_word(s: str) -> Word:
    if s == "1":
        return ()
    return tuple(_NAME_TO_LETTER[t] for t in s.split("*"))


def _is_local(c: int) -> bool:
    return c < 4


def canon(w: Word) -> Word:
    """Normal form under idempotence and X/Y commutation."""
    out: list[int] = []
    run: list[int] = []

    def flush():
        last = None
        for c in [c for c in run if c < 2] + [c for c in run if 2 <= c < 4]:
            if c != last:
                out.append(c)
            last = c
        run.clear()

    for c in w:
        if _is_local(c):
            run.append(c)
        else:
            flush()
            out.append(c)
    flush()
    return tuple(out)


def moment_key(w: Word) -> Word:
    """Representative of ``{w, w^dagger}`` after canonicalisation."""
    a = canon(w)
    b = canon(tuple(reversed(w)))
    return min(a, b, key=lambda t: (len(t), t))


def adjoint(w: Word) -> Word:
    return canon(tuple(reversed(w)))


# polynomial helpers --------------------------------------------------------


def poly_add(*ps: Poly, scale: tuple[float, ...] | None = None) -> Poly:
    out: Poly = {}
    for k, p in enumerate(ps):
        s = 1.0 if scale is None else scale[k]
        for w, c in p.items():
            out[w] = out.get(w, 0.0) + s * c
    return {w: c for w, c in out.items() if c != 0.0}


def poly_mul(p: Poly, q: Poly) -> Poly:
    out: Poly = {}
    for (u, cu), (v, cv) in itertools.product(p.items(), q.items()):
        w = canon(u + v)
        out[w] = out.get(w, 0.0) + cu * cv
    return {w: c for w, c in out.items() if c != 0.0}


ONE: Poly = {(): 1.0}


def x_op(a: int, x: int) -> Poly:
    return {(X_IDS[x],): 1.0} if a == 0 else {(): 1.0, (X_IDS[x],): -1.0}


def y_op(b: int, y: int) -> Poly:
    return {(Y_IDS[y],): 1.0} if b == 0 else {(): 1.0, (Y_IDS[y],): -1.0}


def z_op(a: int, b: int, x: int, y: int) -> Poly:
    if (a, b) != (1, 1):
        return {(Z_IDS[(a, b, x, y)],): 1.0}
    p: Poly = {(): 1.0}
    for ab in ((0, 0), (0, 1), (1, 0)):
        p[(Z_IDS[(*ab, x, y)],)] = -1.0
    return p


def _z_product(letter: int) -> Poly:
    a, b, x, y = _Z_LABEL[letter]
    return poly_mul(x_op(a, x), y_op(b, y))


def expand_products(p: Poly) -> Poly:
    """Replace every Z letter by ``X_{a|x} Y_{b|y}`` (the cross-talk-free case)."""
    out: Poly = {}
    for w, c in p.items():
        q: Poly = dict(ONE)
        for letter in w:
            q = poly_mul(q, {(letter,): 1.0} if _is_local(letter) else _z_product(letter))
        out = poly_add(out, q, scale=(1.0, c))
    return out


def product_basis(words: list[Word]) -> list[Word]:
    """Words spanning the same operators as ``words`` once Z letters are products."""
    out = []
    for w in words:
        out += list(expand_products({w: 1.0}))
    return _dedupe(sorted(out, key=lambda t: (len(t), t)))


def deviation_op(a: int, b: int, x: int, y: int) -> Poly:
    """``Z_{ab|xy} - X_{a|x} Y_{b|y}``."""
    return poly_add(z_op(a, b, x, y), poly_mul(x_op(a, x), y_op(b, y)), scale=(1.0, -1.0))


# monomial sets --------------------------------------------------------------

LEVELS = ("L1", "L1+XY", "L1+XY+ZW", "L2r", "L2")
LOCALIZING = ("scalar", "local", "local+XY")


@dataclass(frozen=True)
class MonomialSet:
    """Generating words of the moment matrix plus the localizing words.

    ``level`` picks the moment-matrix basis:

    * ``L1``        identity and all letters
    * ``L1+XY``     plus the products ``X_x Y_y``
    * ``L1+XY+ZW``  plus ``Z X_x`` and ``Z Y_y`` for every Z letter
    * ``L2r``       every length-2 word without a Z letter (``XX'``,
                    ``YY'``, ``XY``) on top of ``L1``
    * ``L2``        every canonical word of length <= 2

    ``localizing`` picks the words the localizing matrices are built on;
    ``None`` uses the level default (scalar for L1, local for L1+XY and
    L1+XY+ZW, local+XY above).
    """

    level: str = "L1+XY"
    localizing: str | None = None
    extra: tuple[Word, ...] = ()

    def __post_init__(self):
        if self.level not in LEVELS:
            raise ValueError(f"unknown level {self.level!r}; choose from {LEVELS}")
        if self.localizing is not None and self.localizing not in LOCALIZING:
            raise ValueError(f"unknown localizing set {self.localizing!r}")

    @property
    def localizing_kind(self) -> str:
        if self.localizing is not None:
            return self.localizing
        return {"L1": "scalar", "L1+XY": "local", "L1+XY+ZW": "local"}.get(self.level, "local+XY")

    def words(self) -> list[Word]:
        letters = list(range(N_LETTERS))
        zs = list(Z_IDS.values())
        ws: list[Word] = [()] + [(c,) for c in letters]
        if self.level != "L1":
            ws += [(x, y) for x in X_IDS for y in Y_IDS]
        if self.level == "L1+XY+ZW":
            ws += [(z, w) for z in zs for w in X_IDS + Y_IDS]
        if self.level == "L2r":
            ws += [(X_IDS[0], X_IDS[1]), (X_IDS[1], X_IDS[0])]
            ws += [(Y_IDS[0], Y_IDS[1]), (Y_IDS[1], Y_IDS[0])]
        if self.level == "L2":
            ws += [(u, v) for u in letters for v in letters]
        ws += list(self.extra)
        return _dedupe(ws)

    def localizing_words(self) -> list[Word]:
        kind = self.localizing_kind
        ws: list[Word] = [()]
        if kind in ("local", "local+XY"):
            ws += [(c,) for c in X_IDS + Y_IDS]
        if kind == "local+XY":
            ws += [(x, y) for x in X_IDS for y in Y_IDS]
        return ws

    def describe(self) -> str:
        return f"{self.level}/{self.localizing_kind}"


def _dedupe(ws) -> list[Word]:
    seen, out = set(), []
    for w in ws:
        c = canon(w)
        if c not in seen:
            seen.add(c)
            out.append(c)
    return out


def parse_level(spec: str) -> MonomialSet:
    """``"L1+XY"`` or ``"L1+XY:local+XY"`` style level descriptors."""
    level, _, loc = spec.partition(":")
    return MonomialSet(level=level, localizing=loc or None)


# problem --------------------------------------------------------------------

CONST = -1  # variable id used for constant terms
SCALAR_NAMES = ("chi", "shift")


@dataclass
class Block:
    """Affine symmetric block ``S(y) = sum_k coef_k * y[var_k] E(row_k, col_k)``.

    Only the upper triangle (``row <= col``) is stored; ``var == CONST``
    marks a constant term.
    """

    name: str
    dim: int
    rows: list[int] = field(default_factory=list)
    cols: list[int] = field(default_factory=list)
    vars: list[int] = field(default_factory=list)
    coefs: list[float] = field(default_factory=list)

    def add(self, i: int, j: int, var: int, coef: float):
        if i > j:
            i, j = j, i
        self.rows.append(i)
        self.cols.append(j)
        self.vars.append(var)
        self.coefs.append(float(coef))

    def evaluate(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        v = np.asarray(self.vars)
        vals = np.asarray(self.coefs) * np.where(v == CONST, 1.0, y[np.maximum(v, 0)])
        s = np.zeros((self.dim, self.dim))
        np.add.at(s, (np.asarray(self.rows), np.asarray(self.cols)), vals)
        return s + np.triu(s, 1).T

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "dim": self.dim,
            "rows": list(self.rows),
            "cols": list(self.cols),
            "vars": list(self.vars),
            "coefs": list(self.coefs),
        }

    @classmethod
    def from_dict(cls, d) -> "Block":
        return cls(d["name"], int(d["dim"]), list(d["rows"]), list(d["cols"]),
                   list(d["vars"]), [float(c) for c in d["coefs"]])


@dataclass
class RelaxationProblem:
    """A real linear conic problem over moment variables.

    ``variables`` lists the canonical word of each moment variable; the
    cross-talk scalar, when it is a decision variable, is the extra entry
    named ``"chi"``.  Equalities are ``sum coef * y = rhs``.
    """

    kind: str
    level: str
    basis: list[Word]
    localizing_basis: list[Word]
    variables: list[str] = field(default_factory=list)
    blocks: list[Block] = field(default_factory=list)
    equalities: list[tuple[dict[int, float], float]] = field(default_factory=list)
    objective: dict[int, float] = field(default_factory=dict)
    objective_const: float = 0.0
    sense: str = "max"
    chi_var: int | None = None
    meta: dict = field(default_factory=dict)
    z_as_product: bool = False
    _index: dict = field(default_factory=dict, repr=False)

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    def var(self, w: Word) -> int:
        """Variable id of ``<w>`` (``CONST`` for the identity)."""
        k = moment_key(w)
        if not k:
            return CONST
        idx = self._index.get(k)
        if idx is None:
            idx = len(self.variables)
            self._index[k] = idx
            self.variables.append(word_str(k))
        return idx

    def linear(self, p: Poly) -> tuple[dict[int, float], float]:
        """Moment-linear form of ``<p>`` as (coefficients, constant)."""
        p = self._prep(p)
        coeffs: dict[int, float] = {}
        const = 0.0
        for w, c in p.items():
            v = self.var(w)
            if v == CONST:
                const += c
            else:
                coeffs[v] = coeffs.get(v, 0.0) + c
        return {k: c for k, c in coeffs.items() if c != 0.0}, const

    def _prep(self, p: Poly) -> Poly:
        return expand_products(p) if self.z_as_product else p

    def add_scalar_variable(self, name: str) -> int:
        """A decision variable that is not a moment (e.g. ``chi``)."""
        idx = len(self.variables)
        self.variables.append(name)
        self._index[(name,)] = idx
        return idx

    def add_chi_variable(self) -> int:
        self.chi_var = self.add_scalar_variable("chi")
        return self.chi_var

    def moment_block(self, name: str = "moment") -> Block:
        blk = Block(name, len(self.basis))
        for i, u in enumerate(self.basis):
            for j in range(i, len(self.basis)):
                blk.add(i, j, self.var(adjoint(u) + self.basis[j]), 1.0)
        self.blocks.append(blk)
        return blk

    def localizing_block(self, name: str, g: Poly, chi_scale: float | None = None,
                         chi_var: bool = False) -> Block:
        """Block ``[<u^dag (c*1 + g) v>]`` over the localizing basis.

        ``chi_scale`` adds a fixed multiple of the identity polynomial;
        ``chi_var`` adds ``chi * <u^dag v>``, which is only linear for the
        scalar (identity-only) localizing basis.
        """
        lb = self.localizing_basis
        if chi_var and len(lb) != 1:
            raise ValueError("a free chi variable needs the scalar localizing basis")
        gg = self._prep(g)
        if chi_scale:
            gg = poly_add(gg, {(): chi_scale})
        blk = Block(name, len(lb))
        for i, u in enumerate(lb):
            for j in range(i, len(lb)):
                v = lb[j]
                terms: dict[int, float] = {}
                const = 0.0
                for w, c in gg.items():
                    k = self.var(adjoint(u) + w + v)
                    if k == CONST:
                        const += c
                    else:
                        terms[k] = terms.get(k, 0.0) + c
                if chi_var:
                    terms[self.chi_var] = terms.get(self.chi_var, 0.0) + 1.0
                if const != 0.0:
                    blk.add(i, j, CONST, const)
                for k, c in terms.items():
                    if c != 0.0:
                        blk.add(i, j, k, c)
        self.blocks.append(blk)
        return blk

    def localizing_equalities(self, g: Poly) -> int:
        """Pin every entry of the localizing matrix of ``g`` to zero."""
        lb = self.localizing_basis
        g = self._prep(g)
        count = 0
        for i, u in enumerate(lb):
            for j in range(i, len(lb)):
                coeffs: dict[int, float] = {}
                const = 0.0
                for w, c in g.items():
                    k = self.var(adjoint(u) + w + lb[j])
                    if k == CONST:
                        const += c
                    else:
                        coeffs[k] = coeffs.get(k, 0.0) + c
                coeffs = {k: c for k, c in coeffs.items() if c != 0.0}
                if coeffs:
                    self.add_equality(coeffs, -const)
                    count += 1
                elif abs(const) > 0.0:
                    raise ValueError("inconsistent localizing equality")
        return count

    def scalar_block(self, name: str, coeffs: dict[int, float], const: float) -> Block:
        """``sum coeffs * y + const >= 0`` as a 1x1 block."""
        blk = Block(name, 1)
        if const != 0.0:
            blk.add(0, 0, CONST, const)
        for k, c in coeffs.items():
            blk.add(0, 0, k, c)
        self.blocks.append(blk)
        return blk

    def add_equality(self, coeffs: dict[int, float], rhs: float):
        self.equalities.append((dict(coeffs), float(rhs)))

    def objective_value(self, y: np.ndarray) -> float:
        return self.objective_const + sum(c * y[k] for k, c in self.objective.items())

    # audit and export ------------------------------------------------------

    def audit(self) -> None:
        """Structural checks: every variable is a canonical, unique moment.

        Raises
        ------
        ValueError
            On the first violated check.
        """
        def require(ok, msg):
            if not ok:
                raise ValueError(msg)

        seen = set()
        for idx, name in enumerate(self.variables):
            if name in SCALAR_NAMES:
                require(name != "chi" or idx == self.chi_var, "chi variable index mismatch")
                continue
            w = parse_word(name)
            require(moment_key(w) == w, f"variable {name} is not canonical")
            require(w not in seen, f"duplicate variable {name}")
            seen.add(w)
        n = self.n_vars
        for blk in self.blocks:
            require(all(-1 <= v < n for v in blk.vars), f"block {blk.name}: variable out of range")
            require(all(0 <= r <= c < blk.dim for r, c in zip(blk.rows, blk.cols)),
                    f"block {blk.name}: entry outside the upper triangle")
        for coeffs, _ in self.equalities:
            require(all(0 <= k < n for k in coeffs), "equality references unknown variable")

    def to_dict(self) -> dict:
        return {
            "format": "ctrng-relaxation/1",
            "kind": self.kind,
            "level": self.level,
            "sense": self.sense,
            "basis": [word_str(w) for w in self.basis],
            "localizing_basis": [word_str(w) for w in self.localizing_basis],
            "variables": list(self.variables),
            "chi_var": self.chi_var,
            "objective": {str(k): c for k, c in self.objective.items()},
            "objective_const": self.objective_const,
            "equalities": [
                {"coeffs": {str(k): c for k, c in co.items()}, "rhs": r}
                for co, r in self.equalities
            ],
            "z_as_product": self.z_as_product,
            "blocks": [b.to_dict() for b in self.blocks],
            "block_sizes": [b.dim for b in self.blocks],
            "meta": self.meta,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d) -> "RelaxationProblem":
        if d.get("format") != "ctrng-relaxation/1":
            raise ValueError("not a relaxation dump")
        prob = cls(
            kind=d["kind"],
            level=d["level"],
            basis=[parse_word(s) for s in d["basis"]],
            localizing_basis=[parse_word(s) for s in d["localizing_basis"]],
            variables=list(d["variables"]),
            blocks=[Block.from_dict(b) for b in d["blocks"]],
            equalities=[({int(k): float(c) for k, c in e["coeffs"].items()}, float(e["rhs"]))
                        for e in d["equalities"]],
            objective={int(k): float(c) for k, c in d["objective"].items()},
            objective_const=float(d["objective_const"]),
            sense=d["sense"],
            chi_var=d["chi_var"],
            meta=d.get("meta", {}),
            z_as_product=bool(d.get("z_as_product", False)),
        )
        for i, name in enumerate(prob.variables):
            prob._index[(name,) if name in SCALAR_NAMES else parse_word(name)] = i
        return prob

    @classmethod
    def from_json(cls, text: str) -> "RelaxationProblem":
        return cls.from_dict(json.loads(text))


def _check_chi(chi: float):
    if not 0.0 <= chi <= 1.0:
        raise ValueError("chi must lie in [0, 1]")


def _base(kind: str, level: MonomialSet, products: bool = False) -> RelaxationProblem:
    """Problem with its moment block.

    ``products=True`` is the cross-talk-free case: Z letters are replaced
    by ``X Y`` products everywhere, which keeps the feasible set
    full-dimensional (pinning ``Z = X Y`` by equalities would not).
    """
    basis = level.words()
    if not basis:
        raise ValueError("empty monomial set")
    if products:
        basis = product_basis(basis)
    prob = RelaxationProblem(kind=kind, level=level.describe(), basis=basis,
                             localizing_basis=level.localizing_words(),
                             z_as_product=products)
    prob.moment_block()
    return prob


def _add_crosstalk_blocks(prob: RelaxationProblem, chi: float | None):
    """Z >= 0 and chi*1 +- (Z - XY) >= 0 for all 16 (a, b, x, y)."""
    if prob.z_as_product:
        # Z = X Y is a projector whose positivity the moment block already
        # implies; its localizing blocks would have repeated rows
        return
    for a, b, x, y in OUTCOME_TARGETS:
        tag = f"{a}{b}|{x}{y}"
        prob.localizing_block(f"Z{tag}>=0", z_op(a, b, x, y))
        d = deviation_op(a, b, x, y)
        neg = {w: -c for w, c in d.items()}
        if chi == 0.0:
            # no interior for chi*1 +- D >= 0 at chi = 0: pin D's entries instead
            prob.localizing_equalities(d)
        elif chi is None:
            prob.localizing_block(f"chi-D{tag}", neg, chi_var=True)
            prob.localizing_block(f"chi+D{tag}", d, chi_var=True)
        else:
            prob.localizing_block(f"chi-D{tag}", neg, chi_scale=chi)
            prob.localizing_block(f"chi+D{tag}", d, chi_scale=chi)


def bell_poly(expr: BellExpression) -> Poly:
    terms = [z_op(a, b, x, y) for a, b, x, y in OUTCOME_TARGETS]
    scales = tuple(float(expr.coeffs[t]) for t in OUTCOME_TARGETS)
    return poly_add(*terms, scale=scales)


def _add_bell_constraint(prob: RelaxationProblem, expr: BellExpression, I: float,
                         inequality: bool):
    coeffs, const = prob.linear(bell_poly(expr))
    if inequality:
        prob.scalar_block("bell>=I", coeffs, const - I)
    else:
        prob.add_equality(coeffs, I - const)


def randomness_program(I: float, chi: float, target=(0, 0, 0, 0),
                       level: MonomialSet | None = None, *,
                       expr: BellExpression = CHSH,
                       bell_inequality: bool = False) -> RelaxationProblem:
    """Relaxation of max ``P(ab|xy)`` given Bell value ``I`` and cross-talk ``chi``."""
    level = level or MonomialSet()
    _check_chi(chi)
    if not -4.0 <= I <= 4.0:
        raise ValueError("CHSH value must lie in [-4, 4]")
    if tuple(target) not in OUTCOME_TARGETS:
        raise ValueError(f"target must be an (a, b, x, y) tuple of bits, got {target}")
    prob = _base("randomness", level, products=chi == 0.0)
    _add_crosstalk_blocks(prob, chi)
    _add_bell_constraint(prob, expr, I, bell_inequality)
    prob.objective, prob.objective_const = prob.linear(z_op(*target))
    prob.sense = "max"
    prob.meta = {"I": I, "chi": chi, "target": list(target),
                 "bell": "geq" if bell_inequality else "eq"}
    return prob


def max_bell_given_chi(chi: float, level: MonomialSet | None = None, *,
                       expr: BellExpression = CHSH) -> RelaxationProblem:
    """Relaxation of the largest Bell value reachable with cross-talk ``chi``."""
    level = level or MonomialSet("L1")
    _check_chi(chi)
    prob = _base("max_bell", level, products=chi == 0.0)
    _add_crosstalk_blocks(prob, chi)
    prob.objective, prob.objective_const = prob.linear(bell_poly(expr))
    prob.sense = "max"
    prob.meta = {"chi": chi}
    return prob


def min_chi_program(p: Behavior, level: MonomialSet | None = None, *,
                    pin_tolerance: float = 0.0, chi: float | None = None) -> RelaxationProblem:
    """Relaxation of the least cross-talk compatible with behavior ``p``.

    With ``chi=None`` the cross-talk scalar is the objective; this needs the
    scalar localizing basis.  With a fixed ``chi`` the program is a
    feasibility test: it minimises a common shift ``s`` added to every
    ``chi +- D`` block, and ``chi`` is infeasible when ``s > 0``.
    ``pin_tolerance`` turns the 16 pins ``<Z_ab|xy> = P(ab|xy)`` into bands.
    """
    level = level or MonomialSet("L1+XY", localizing="scalar")
    if p.p.shape != (2, 2, 2, 2):
        raise ValueError("min_chi_program supports the CHSH scenario only")
    p.check()
    prob = _base("min_chi", level)
    if chi is None:
        if len(prob.localizing_basis) != 1:
            raise ValueError("free-chi program needs the scalar localizing basis; "
                             "pass a fixed chi for richer localizing sets")
        prob.add_chi_variable()
        _add_crosstalk_blocks(prob, None)
        prob.objective = {prob.chi_var: 1.0}
    else:
        _check_chi(chi)
        shift = prob.add_scalar_variable("shift")
        _add_shifted_crosstalk_blocks(prob, chi, shift)
        # keeps the shift inside [-1, 1] so the certificate has a finite bound
        prob.scalar_block("shift<=1", {shift: -1.0}, 1.0)
        prob.scalar_block("shift>=-1", {shift: 1.0}, 1.0)
        prob.objective = {shift: 1.0}
        prob.meta["chi"] = chi
    prob.sense = "min"
    for a, b, x, y in OUTCOME_TARGETS:
        coeffs, const = prob.linear(z_op(a, b, x, y))
        target = float(p.p[a, b, x, y])
        if pin_tolerance > 0.0:
            prob.scalar_block(f"pin{a}{b}|{x}{y}+", coeffs, const - target + pin_tolerance)
            prob.scalar_block(f"pin{a}{b}|{x}{y}-", {k: -c for k, c in coeffs.items()},
                              target + pin_tolerance - const)
        elif (a, b) != (1, 1):
            prob.add_equality(coeffs, target - const)
    prob.meta.update({"behavior": p.p.tolist(), "pin_tolerance": pin_tolerance})
    return prob


def _add_shifted_crosstalk_blocks(prob: RelaxationProblem, chi: float, shift: int):
    lb = prob.localizing_basis
    for a, b, x, y in OUTCOME_TARGETS:
        tag = f"{a}{b}|{x}{y}"
        prob.localizing_block(f"Z{tag}>=0", z_op(a, b, x, y))
        d = deviation_op(a, b, x, y)
        for name, g in ((f"chi-D{tag}", {w: -c for w, c in d.items()}), (f"chi+D{tag}", d)):
            blk = prob.localizing_block(name, g, chi_scale=chi)
            for i in range(len(lb)):
                blk.add(i, i, shift, 1.0)
