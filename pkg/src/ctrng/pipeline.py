"""Simulate a Bell test, estimate its statistics, bound the guessing
probability and hash the raw outcomes into near-uniform bits.

Finite statistics use a Hoeffding bound on every one of the 16 empirical
cells, joined by a union bound; the extractable length follows the
leftover-hash accounting ``floor(-n log2 P*) - ceil(2 log2(1/eps))``.
"""

from __future__ import annotations

import csv
import hashlib
import io
import itertools
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np
from scipy.signal import fftconvolve

from . import bounds
from .bell import CHSH, CHSH_SCENARIO, BellExpression, Behavior, delta_from_chi, signaling_delta
from .lp import p_star_lp
from .models import DeviceModel, born_behavior

METHODS = ("analytic", "lp", "sdp")
SEED_STREAM_EXTRACTOR = 1


class PipelineError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    n: int = 100_000
    input_dist: tuple = ((0.25, 0.25), (0.25, 0.25))
    seed: int = 0
    epsilon_sec: float = 1e-6

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be at least 1")
        d = np.asarray(self.input_dist, dtype=float)
        if d.shape != (2, 2) or np.any(d < 0) or abs(d.sum() - 1.0) > 1e-12:
            raise ValueError("input distribution must be a 2x2 table summing to 1")
        if not 0.0 < self.epsilon_sec < 1.0:
            raise ValueError("epsilon_sec must lie in (0, 1)")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class TrialRecord:
    x: int
    y: int
    a: int
    b: int


class Records(Sequence):
    """Columnar trial records; indexing yields :class:`TrialRecord`."""

    def __init__(self, x, y, a, b):
        cols = [np.asarray(c, dtype=np.uint8) for c in (x, y, a, b)]
        if len({c.shape for c in cols}) != 1 or cols[0].ndim != 1:
            raise ValueError("record columns must be equal-length 1-d arrays")
        if any(np.any(c > 1) for c in cols):
            raise ValueError("record entries must be bits")
        for c in cols:
            c.setflags(write=False)
        self.x, self.y, self.a, self.b = cols

    def __len__(self) -> int:
        return int(self.x.size)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return Records(self.x[i], self.y[i], self.a[i], self.b[i])
        return TrialRecord(int(self.x[i]), int(self.y[i]), int(self.a[i]), int(self.b[i]))

    def __iter__(self) -> Iterator[TrialRecord]:
        for i in range(len(self)):
            yield self[i]

    def __eq__(self, other):
        return isinstance(other, Records) and all(
            np.array_equal(u, v) for u, v in zip(self.columns(), other.columns()))

    def columns(self):
        return self.x, self.y, self.a, self.b

    @classmethod
    def from_records(cls, recs) -> "Records":
        recs = list(recs)
        return cls(*(np.array([getattr(r, k) for r in recs], dtype=np.uint8) for k in "xyab"))

    def counts(self) -> np.ndarray:
        """``n[a, b, x, y]``."""
        n = np.zeros((2, 2, 2, 2), dtype=np.int64)
        np.add.at(n, (self.a, self.b, self.x, self.y), 1)
        return n

    def raw_bits(self) -> np.ndarray:
        """Outcome bits ``a_1 b_1 a_2 b_2 ...``."""
        return np.stack([self.a, self.b], axis=1).reshape(-1)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["round", "x", "y", "a", "b"])
        for i, (x, y, a, b) in enumerate(zip(*self.columns())):
            w.writerow([i, int(x), int(y), int(a), int(b)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "Records":
        rows = list(csv.DictReader(io.StringIO(text)))
        if rows and set(rows[0]) != {"round", "x", "y", "a", "b"}:
            raise ValueError("records CSV needs columns round,x,y,a,b")
        rows.sort(key=lambda r: int(r["round"]))
        return cls(*(np.array([int(r[k]) for r in rows], dtype=np.uint8) for k in "xyab"))


def simulate(m: DeviceModel | Behavior, cfg: ExperimentConfig) -> Records:
    """I.i.d. rounds: inputs from ``cfg.input_dist``, outputs from the Born behavior.

    One generator seeded by ``cfg.seed`` draws all inputs, then all outputs.
    """
    p = m if isinstance(m, Behavior) else born_behavior(m)
    rng = np.random.default_rng(cfg.seed)
    dist = np.asarray(cfg.input_dist, dtype=float).reshape(-1)
    s = rng.choice(4, size=cfg.n, p=dist)
    x, y = s // 2, s % 2
    # cumulative outcome tables per setting, outcome index 2a + b
    cum = np.cumsum(p.p.reshape(4, 4), axis=0)  # [ab, xy]
    cum[-1] = 1.0
    u = rng.random(cfg.n)
    ab = (u[None, :] > cum[:, s]).sum(axis=0)
    return Records(x, y, ab // 2, ab % 2)


@dataclass
class Estimate:
    behavior: Behavior
    counts: np.ndarray
    I_hat: float
    delta_hat: float
    radius: float
    n_min: int


def hoeffding_radius(n_min: int, epsilon: float, gamma: float = CHSH.gamma, cells: int = 16) -> float:
    """``gamma sqrt(ln(2 cells / eps) / (2 n_min))``: every cell within its radius w.p. ``1 - eps``."""
    return gamma * math.sqrt(math.log(2.0 * cells / epsilon) / (2.0 * n_min))


def estimate(records: Records, epsilon: float = 1e-6, expr: BellExpression = CHSH) -> Estimate:
    """Empirical behavior, Bell value, signaling and the Bell-value confidence radius."""
    counts = records.counts()
    totals = counts.sum(axis=(0, 1))
    if np.any(totals == 0):
        missing = [(x, y) for x, y in itertools.product(range(2), repeat=2) if totals[x, y] == 0]
        raise PipelineError(f"no records for settings {missing}")
    p = Behavior.from_counts(counts)
    n_min = int(totals.min())
    return Estimate(p, counts, expr.evaluate(p), signaling_delta(p),
                    hoeffding_radius(n_min, epsilon, expr.gamma), n_min)


def chsh_sigma(p: Behavior, totals) -> float:
    """Binomial standard deviation of the empirical CHSH value."""
    totals = np.asarray(totals, dtype=float)
    var = 0.0
    for x, y in itertools.product(range(2), repeat=2):
        corr = sum(CHSH.coeffs[a, b, x, y] * p.p[a, b, x, y]
                   for a, b in itertools.product(range(2), repeat=2))
        var += (1.0 - corr**2) / totals[x, y]
    return math.sqrt(var)


# extraction -----------------------------------------------------------------


def toeplitz_extract(bits, seed, m: int) -> np.ndarray:
    """GF(2) product of the ``m x k`` Toeplitz matrix ``T[i, j] = seed[i - j + k - 1]`` with ``bits``.

    The product is a convolution, evaluated by FFT and reduced mod 2;
    the integer sums stay far below the float64 exactness limit.
    """
    u = np.asarray(bits, dtype=np.uint8).ravel()
    s = np.asarray(seed, dtype=np.uint8).ravel()
    k = u.size
    if m < 0:
        raise ValueError("output length must be nonnegative")
    if m == 0:
        return np.zeros(0, dtype=np.uint8)
    if m > k:
        raise ValueError("output length cannot exceed the input length")
    if s.size < m + k - 1:
        raise ValueError(f"seed needs {m + k - 1} bits, got {s.size}")
    if np.any(u > 1) or np.any(s > 1):
        raise ValueError("bits and seed must be 0/1")
    # y_i = sum_j s[i - j + k - 1] u_j = (s * u)[i + k - 1]
    full = fftconvolve(s[: m + k - 1].astype(float), u.astype(float))
    return (np.rint(full[k - 1 : k - 1 + m]).astype(np.int64) % 2).astype(np.uint8)


def extractable_length(n: int, p_star: float, epsilon_sec: float) -> int:
    if p_star >= 1.0:
        return 0
    h = -n * math.log2(p_star)
    return max(0, math.floor(h) - math.ceil(2.0 * math.log2(1.0 / epsilon_sec)))


def extractor_seed(cfg: ExperimentConfig, length: int) -> np.ndarray:
    """Seed bits from a generator stream separate from the simulation."""
    rng = np.random.default_rng([cfg.seed, SEED_STREAM_EXTRACTOR])
    return rng.integers(0, 2, size=length, dtype=np.uint8)


# certification --------------------------------------------------------------


@dataclass
class Certificate:
    I_hat: float
    I_adj: float
    delta_hat: float | None
    chi: float
    method: str
    method_detail: str
    p_star: float
    n: int
    min_entropy: float
    epsilon_sec: float
    seed: int
    seed_bits: int
    input_bits: int
    output_length: int
    output_sha256: str
    bits: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.uint8), repr=False)

    @property
    def rate(self) -> float:
        return self.min_entropy / self.n

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("bits")
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def write(self, directory, stem: str = "certificate") -> dict:
        """Write ``<stem>.json``, ``<stem>.bits`` (packed, MSB first) and ``<stem>.hex``."""
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        packed = np.packbits(self.bits).tobytes()
        paths = {"json": d / f"{stem}.json", "bits": d / f"{stem}.bits", "hex": d / f"{stem}.hex"}
        paths["json"].write_text(self.to_json())
        paths["bits"].write_bytes(packed)
        paths["hex"].write_text(packed.hex() + "\n")
        return paths


def bound_for(I: float, chi: float, method: str, *, delta: float = 0.0, level="L1+XY",
              zero_curve=None, setting=(0, 0)) -> tuple[float, str]:
    """Guessing-probability bound at Bell value ``I`` (read as a lower confidence bound).

    Returns ``(P*, detail)``.  The ``lp`` method uses
    ``max(delta, 2 N chi)`` as the signaling budget.
    """
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    if I <= 2.0:
        return 1.0, "local"
    if method == "analytic":
        curve = zero_curve if zero_curve is not None else default_zero_curve()
        tag = curve.level.describe() if isinstance(curve, bounds.ZeroCurve) else "closed"
        detail = f"shifted/{tag}"
        return bounds.bound_shifted(min(I, 4.0), chi, CHSH.gamma, curve), detail
    if method == "lp":
        d = max(delta, delta_from_chi(CHSH_SCENARIO, chi))
        return p_star_lp(min(I, 4.0), d, bell_inequality=True).value, f"lp/delta={d!r}"
    try:
        b = bounds.sdp_p_star(I, chi, setting, level, bell_inequality=True)
    except bounds.BoundError as exc:
        raise PipelineError(str(exc)) from exc
    return b.value, f"sdp/{b.level}"


_ZERO_CURVE = None


def default_zero_curve():
    """Shared memoized cross-talk-free curve at the level-2 relaxation."""
    global _ZERO_CURVE
    if _ZERO_CURVE is None:
        _ZERO_CURVE = bounds.ZeroCurve("L2r")
    return _ZERO_CURVE


def certify(source, chi: float, method: str = "analytic", cfg: ExperimentConfig | None = None,
            *, level="L1+XY", zero_curve=None, raw_bits=None) -> Certificate:
    """Certificate for records, a behavior or a bare Bell value.

    Records are penalized by the Hoeffding radius at ``cfg.epsilon_sec``
    and supply the raw bits; a behavior or a number is taken at face
    value with no statistical penalty.  ``chi`` is a trusted input.
    """
    cfg = cfg or ExperimentConfig()
    if not 0.0 <= chi <= 1.0:
        raise ValueError("chi must lie in [0, 1]")
    delta_hat = None
    if isinstance(source, Records):
        est = estimate(source, cfg.epsilon_sec)
        I_hat, radius, delta_hat = est.I_hat, est.radius, est.delta_hat
        n = len(source)
        if raw_bits is None:
            raw_bits = source.raw_bits()
    elif isinstance(source, Behavior):
        I_hat, radius, delta_hat = CHSH.evaluate(source), 0.0, signaling_delta(source)
        n = cfg.n
    else:
        I_hat, radius, n = float(source), 0.0, cfg.n
    I_adj = max(2.0, I_hat - radius)
    p_star, detail = bound_for(I_adj, chi, method, delta=delta_hat or 0.0, level=level,
                               zero_curve=zero_curve)
    p_star = min(1.0, max(0.25, p_star))
    h = 0.0 if p_star >= 1.0 else -n * math.log2(p_star)
    m = extractable_length(n, p_star, cfg.epsilon_sec)
    bits = np.zeros(0, dtype=np.uint8)
    k = 0 if raw_bits is None else int(np.asarray(raw_bits).size)
    m = min(m, k)
    seed_bits = m + k - 1 if m > 0 else 0
    if m > 0:
        bits = toeplitz_extract(raw_bits, extractor_seed(cfg, seed_bits), m)
    digest = hashlib.sha256(np.packbits(bits).tobytes() + m.to_bytes(8, "big")).hexdigest()
    return Certificate(I_hat=I_hat, I_adj=I_adj, delta_hat=delta_hat, chi=chi, method=method,
                       method_detail=detail, p_star=p_star, n=n, min_entropy=h,
                       epsilon_sec=cfg.epsilon_sec, seed=cfg.seed, seed_bits=seed_bits,
                       input_bits=k, output_length=m, output_sha256=digest, bits=bits)


def run(model: DeviceModel, cfg: ExperimentConfig, chi: float, method: str = "analytic",
        **kw) -> tuple[Records, Certificate]:
    """Simulate then certify."""
    recs = simulate(model, cfg)
    return recs, certify(recs, chi, method, cfg, **kw)


def monobit_pvalue(bits) -> float:
    """Frequency (monobit) test p-value ``erfc(|S_n| / sqrt(2 n))``."""
    b = np.asarray(bits, dtype=np.int64)
    if b.size == 0:
        raise ValueError("monobit test needs at least one bit")
    s = abs(int(np.sum(2 * b - 1)))
    return math.erfc(s / math.sqrt(2.0 * b.size))
