"""Bell scenarios, behaviors and Bell expressions.

A behavior is stored as the joint table ``p[a, b, x, y] = P(ab|xy)``;
marginals are always derived from it.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .tolerances import POLICY


class BehaviorError(ValueError):
    """Invalid or malformed behavior."""


@dataclass(frozen=True)
class Scenario:
    inputs: int = 2
    outputs: int = 2

    def __post_init__(self):
        if self.inputs < 2 or self.outputs < 2:
            raise ValueError("a Bell scenario needs at least 2 inputs and 2 outputs")

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return (self.outputs, self.outputs, self.inputs, self.inputs)


CHSH_SCENARIO = Scenario(2, 2)


class Behavior:
    """Conditional probabilities ``P(ab|xy)`` of a bipartite Bell experiment."""

    __slots__ = ("_p",)

    def __init__(self, p, *, validate: bool = True):
        p = np.array(p, dtype=float)
        if p.ndim != 4 or p.shape[0] != p.shape[1] or p.shape[2] != p.shape[3]:
            raise BehaviorError(f"behavior table must have shape (N, N, M, M), got {p.shape}")
        p.setflags(write=False)
        self._p = p
        if validate:
            self.check()

    @property
    def p(self) -> np.ndarray:
        return self._p

    @property
    def scenario(self) -> Scenario:
        return Scenario(inputs=self._p.shape[2], outputs=self._p.shape[0])

    def check(self, tol: float = POLICY.normalization) -> None:
        if np.min(self._p) < -POLICY.negative_entry:
            raise BehaviorError(f"negative probability {np.min(self._p):.3e}")
        sums = self._p.sum(axis=(0, 1))
        if np.max(np.abs(sums - 1.0)) > tol:
            raise BehaviorError(f"P(ab|xy) not normalised: sums {sums.ravel()}")

    def marginal_a(self) -> np.ndarray:
        """``P(a|xy)`` with shape (N, M, M)."""
        return self._p.sum(axis=1)

    def marginal_b(self) -> np.ndarray:
        """``P(b|xy)`` with shape (N, M, M)."""
        return self._p.sum(axis=0)

    def __getitem__(self, idx) -> float:
        return float(self._p[idx])

    def mix(self, other: "Behavior", w: float) -> "Behavior":
        """Convex mixture ``(1 - w) * self + w * other``."""
        if not 0.0 <= w <= 1.0:
            raise ValueError("mixture weight must lie in [0, 1]")
        return Behavior((1.0 - w) * self._p + w * other.p)

    def __eq__(self, other):
        return isinstance(other, Behavior) and np.array_equal(self._p, other._p)

    def __hash__(self):
        return hash(self._p.tobytes())

    def __repr__(self):
        return f"Behavior(scenario={self.scenario})"

    @classmethod
    def from_counts(cls, counts) -> "Behavior":
        """Empirical behavior from counts ``n[a, b, x, y]``."""
        counts = np.asarray(counts, dtype=float)
        totals = counts.sum(axis=(0, 1))
        if np.any(totals <= 0):
            raise BehaviorError("every setting (x, y) needs at least one record")
        return cls(counts / totals)

    @classmethod
    def from_estimate(cls, p, tol: float = POLICY.clip_negative) -> "Behavior":
        """Clip small negative entries to zero and renormalise each setting."""
        p = np.array(p, dtype=float)
        if np.min(p) < -tol:
            raise BehaviorError(f"entry {np.min(p):.3e} is too negative to clip")
        p = np.clip(p, 0.0, None)
        sums = p.sum(axis=(0, 1))
        if np.any(sums <= 0):
            raise BehaviorError("a setting has zero total probability")
        return cls(p / sums)

    # serialisation ------------------------------------------------------

    def to_json(self) -> str:
        return json.dumps({"p": self._p.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "Behavior":
        try:
            data = json.loads(text)
            return cls(data["p"])
        except (KeyError, TypeError, json.JSONDecodeError) as exc:
            raise BehaviorError(f"malformed behavior JSON: {exc}") from exc

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["a", "b", "x", "y", "p"])
        for a, b, x, y in itertools.product(*(range(n) for n in self._p.shape)):
            w.writerow([a, b, x, y, repr(float(self._p[a, b, x, y]))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "Behavior":
        rows = list(csv.DictReader(io.StringIO(text)))
        try:
            idx = [(int(r["a"]), int(r["b"]), int(r["x"]), int(r["y"])) for r in rows]
            vals = [float(r["p"]) for r in rows]
        except (KeyError, ValueError, TypeError) as exc:
            raise BehaviorError(f"malformed behavior CSV: {exc}") from exc
        if not idx:
            raise BehaviorError("empty behavior CSV")
        n = max(max(i[0], i[1]) for i in idx) + 1
        m = max(max(i[2], i[3]) for i in idx) + 1
        p = np.full((n, n, m, m), np.nan)
        for i, v in zip(idx, vals):
            p[i] = v
        if np.isnan(p).any():
            raise BehaviorError("behavior CSV does not list every (a, b, x, y)")
        return cls(p)

    @classmethod
    def load(cls, path) -> "Behavior":
        path = Path(path)
        text = path.read_text()
        if path.suffix.lower() == ".csv":
            return cls.from_csv(text)
        return cls.from_json(text)


@dataclass(frozen=True)
class BellExpression:
    """Linear functional ``sum c[a, b, x, y] * P(ab|xy)``."""

    coeffs: np.ndarray
    name: str = ""

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def gamma(self) -> float:
        """Coefficient mass ``sum |c|``."""
        return float(np.abs(self.coeffs).sum())

    def evaluate(self, p: Behavior) -> float:
        return evaluate(self, p)


def evaluate(expr: BellExpression, p: Behavior) -> float:
    if expr.coeffs.shape != p.p.shape:
        raise BehaviorError(
            f"Bell expression shape {expr.coeffs.shape} does not match behavior {p.p.shape}"
        )
    return float(np.sum(expr.coeffs * p.p))


def chsh_sign(a: int, b: int, x: int, y: int) -> int:
    return -1 if (a ^ b ^ (x & y)) else 1


def chsh() -> BellExpression:
    c = np.zeros((2, 2, 2, 2))
    for a, b, x, y in itertools.product(range(2), repeat=4):
        c[a, b, x, y] = chsh_sign(a, b, x, y)
    return BellExpression(c, name="CHSH")


CHSH = chsh()


def signaling_delta(p: Behavior) -> float:
    """Largest change of one party's marginal under the other party's input."""
    pa = p.marginal_a()  # [a, x, y]
    pb = p.marginal_b()  # [b, x, y]
    da = np.max(pa, axis=2) - np.min(pa, axis=2)
    db = np.max(pb, axis=1) - np.min(pb, axis=1)
    return float(max(da.max(), db.max(), 0.0))


def delta_from_chi(s: Scenario, chi: float) -> float:
    """Signaling allowed by a cross-talk budget: ``2 N chi``."""
    if not 0.0 <= chi <= 1.0:
        raise ValueError("chi must lie in [0, 1]")
    return 2.0 * s.outputs * chi


# reference boxes -----------------------------------------------------------


def pr_box() -> Behavior:
    p = np.zeros((2, 2, 2, 2))
    for a, b, x, y in itertools.product(range(2), repeat=4):
        if a ^ b == x & y:
            p[a, b, x, y] = 0.5
    return Behavior(p)


def uniform_box(s: Scenario = CHSH_SCENARIO) -> Behavior:
    return Behavior(np.full(s.shape, 1.0 / s.outputs**2))


def deterministic_box(fa, fb, s: Scenario = CHSH_SCENARIO) -> Behavior:
    """Local deterministic box with ``a = fa(x)`` and ``b = fb(y)``."""
    p = np.zeros(s.shape)
    for x, y in itertools.product(range(s.inputs), repeat=2):
        p[fa(x), fb(y), x, y] = 1.0
    return Behavior(p)


def local_deterministic_boxes(s: Scenario = CHSH_SCENARIO) -> list[Behavior]:
    out = []
    funcs = list(itertools.product(range(s.outputs), repeat=s.inputs))
    for ta in funcs:
        for tb in funcs:
            out.append(deterministic_box(lambda x, t=ta: t[x], lambda y, t=tb: t[y], s))
    return out


def signaling_box() -> Behavior:
    """Alice outputs Bob's input: ``P(a|xy) = 1`` iff ``a = y``."""
    p = np.zeros((2, 2, 2, 2))
    for x, y in itertools.product(range(2), repeat=2):
        p[y, 0, x, y] = 1.0
    return Behavior(p)
