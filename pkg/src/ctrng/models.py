"""Physical cross-talk models: leaked rotations in trapped ions and
tunneling-induced flips in Josephson phase qubits.

Both act on two qubits.  Single-qubit measurements project onto the
Bloch-sphere states ``|0_phi> = cos(t/2)|0> + e^{i phi} sin(t/2)|1>`` and
their orthogonal partners; the shared state is the principal eigenvector
of the CHSH operator built from the ideal measurements.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .bell import CHSH, Behavior, BellExpression
from .linalg import herm_eigh, is_hermitian, kron, max_abs_eig, projector
from .tolerances import POLICY

I2 = np.eye(2, dtype=complex)
ABXY = tuple(itertools.product(range(2), repeat=4))


class ModelError(ValueError):
    """Invalid model parameters or a POVM that fails its invariants."""


class ChiBoundError(RuntimeError):
    """The ``(q_A, q_B)`` search did not converge.

    ``best`` keeps the best value found; it is still a valid (uncertified)
    upper bound on the cross-talk because any product ansatz is admissible.
    """

    def __init__(self, msg: str, best: "JosephsonChi"):
        super().__init__(msg)
        self.best = best


@dataclass(frozen=True)
class BlochAngles:
    theta: float = math.pi / 2
    phi: float = 0.0

    def ket(self, a: int) -> np.ndarray:
        c, s = math.cos(self.theta / 2), math.sin(self.theta / 2)
        ph = complex(math.cos(self.phi), math.sin(self.phi))
        if a == 0:
            return np.array([c, ph * s])
        return np.array([s, -ph * c])

    def projectors(self) -> tuple[np.ndarray, np.ndarray]:
        return projector(self.ket(0)), projector(self.ket(1))


def default_angles() -> tuple[tuple[BlochAngles, BlochAngles], tuple[BlochAngles, BlochAngles]]:
    """Equatorial settings ``phi = (-1)^s pi/4`` for both parties."""
    side = tuple(BlochAngles(math.pi / 2, (-1) ** s * math.pi / 4) for s in range(2))
    return side, side


@dataclass(frozen=True)
class IonParams:
    epsilon: float = 0.03

    def __post_init__(self):
        if not 0.0 <= self.epsilon < 1.0:
            raise ModelError("epsilon must lie in [0, 1)")


@dataclass(frozen=True)
class JosephsonParams:
    p_A: float = 0.0059
    p_B: float = 0.0031

    def __post_init__(self):
        for v in (self.p_A, self.p_B):
            if not 0.0 <= v <= 1.0:
                raise ModelError("flip probabilities must lie in [0, 1]")


@dataclass(frozen=True)
class ProductAnsatz:
    """Local POVMs mixing the ideal projectors with weights ``q_A``, ``q_B``."""

    q_A: float
    q_B: float

    def __post_init__(self):
        for v in (self.q_A, self.q_B):
            if not 0.0 <= v <= 1.0:
                raise ModelError("mixing weights must lie in [0, 1]")

    @staticmethod
    def mix(P: tuple[np.ndarray, np.ndarray], q: float) -> tuple[np.ndarray, np.ndarray]:
        return (1 - q) * P[0] + q * P[1], q * P[0] + (1 - q) * P[1]


@dataclass
class DeviceModel:
    """Shared state plus local and collective POVMs on two qubits.

    ``local_a[x][a]`` and ``local_b[y][b]`` are 2x2; ``collective[a, b, x, y]``
    is 4x4.
    """

    rho: np.ndarray
    local_a: tuple
    local_b: tuple
    collective: dict
    name: str = ""

    def __post_init__(self):
        self.check()

    def check(self, tol: float = POLICY.povm) -> None:
        rho = np.asarray(self.rho)
        if rho.shape != (4, 4) or not is_hermitian(rho, tol):
            raise ModelError("state must be a Hermitian 4x4 matrix")
        if abs(np.trace(rho).real - 1.0) > tol:
            raise ModelError("state must have unit trace")
        if herm_eigh(rho, tol)[0][0] < -tol:
            raise ModelError("state must be positive semidefinite")
        for x, y in itertools.product(range(2), repeat=2):
            total = sum(self.collective[a, b, x, y] for a, b in itertools.product(range(2), repeat=2))
            if np.max(np.abs(total - np.eye(4))) > tol:
                raise ModelError(f"collective POVM at (x, y)=({x}, {y}) does not sum to identity")
        for k, E in self.collective.items():
            if herm_eigh(E, tol)[0][0] < -tol:
                raise ModelError(f"collective POVM element {k} is not positive")
        for side in (self.local_a, self.local_b):
            for pair in side:
                if np.max(np.abs(pair[0] + pair[1] - I2)) > tol:
                    raise ModelError("local POVM does not sum to identity")

    def product_element(self, a, b, x, y) -> np.ndarray:
        return kron(self.local_a[x][a], self.local_b[y][b])


def bell_operator(local_a, local_b, expr: BellExpression = CHSH) -> np.ndarray:
    B = np.zeros((4, 4), dtype=complex)
    for a, b, x, y in ABXY:
        B += expr.coeffs[a, b, x, y] * kron(local_a[x][a], local_b[y][b])
    return B


def principal_state(local_a, local_b, expr: BellExpression = CHSH) -> np.ndarray:
    """Density matrix of the top eigenvector of the Bell operator.

    The eigenvector's global phase is fixed so its largest entry is real
    and positive, which keeps the state deterministic.
    """
    w, v = herm_eigh(bell_operator(local_a, local_b, expr))
    if w[-1] - w[-2] < 1e-9:
        raise ModelError("Bell operator has a degenerate top eigenvalue")
    vec = v[:, -1]
    k = int(np.argmax(np.abs(vec)))
    vec = vec * (abs(vec[k]) / vec[k])
    return projector(vec)


def _local_projectors(angles):
    return tuple(ang.projectors() for ang in angles)


def ideal_model(angles=None) -> DeviceModel:
    """Cross-talk-free model whose collective POVMs are exact products."""
    A, B = angles or default_angles()
    la, lb = _local_projectors(A), _local_projectors(B)
    coll = {(a, b, x, y): kron(la[x][a], lb[y][b]) for a, b, x, y in ABXY}
    return DeviceModel(principal_state(la, lb), la, lb, coll, name="ideal")


def deterministic_model() -> DeviceModel:
    """Both devices always answer 0: a local box at ``I = 2``."""
    P = (np.diag([1.0, 0.0]).astype(complex), np.diag([0.0, 1.0]).astype(complex))
    la = lb = (P, P)
    rho = np.zeros((4, 4), dtype=complex)
    rho[0, 0] = 1.0
    coll = {(a, b, x, y): kron(la[x][a], lb[y][b]) for a, b, x, y in ABXY}
    return DeviceModel(rho, la, lb, coll, name="deterministic")


# ions -----------------------------------------------------------------------


def ion_phases(x: int, y: int, epsilon: float) -> tuple[float, float]:
    """Leaked phases ``phi_x(eps)``, ``phi_y(eps)`` for the setting pair."""
    return (((-1) ** x + (-1) ** y * epsilon) * math.pi / 4,
            ((-1) ** y + (-1) ** x * epsilon) * math.pi / 4)


def _ion_kets(params: IonParams):
    """``(psi, xi)`` for each ``(a, b, x, y)``: ideal and leaked product kets."""
    out = {}
    for a, b, x, y in ABXY:
        px, py = ion_phases(x, y, 0.0)
        ex, ey = ion_phases(x, y, params.epsilon)
        psi = np.kron(BlochAngles(math.pi / 2, px).ket(a), BlochAngles(math.pi / 2, py).ket(b))
        xi = np.kron(BlochAngles(math.pi / 2, ex).ket(a), BlochAngles(math.pi / 2, ey).ket(b))
        out[a, b, x, y] = (psi, xi)
    return out


def ion_model(params: IonParams) -> DeviceModel:
    """Ion-trap model: each laser pulse leaks a fraction ``epsilon`` onto the other ion."""
    A, B = default_angles()
    la, lb = _local_projectors(A), _local_projectors(B)
    coll = {k: projector(xi) for k, (_, xi) in _ion_kets(params).items()}
    return DeviceModel(principal_state(la, lb), la, lb, coll, name=f"ion(eps={params.epsilon})")


def ion_chi_bound(params: IonParams) -> float:
    """Largest spectral norm of ``|xi><xi| - |psi><psi|`` over the 16 outcomes."""
    return max(max_abs_eig(projector(xi) - projector(psi))
               for psi, xi in _ion_kets(params).values())


def ion_chi_closed_form(params: IonParams) -> float:
    """``max sqrt(1 - |<xi|psi>|^2)``, the norm of a difference of rank-one projectors."""
    return max(math.sqrt(max(0.0, 1.0 - abs(np.vdot(xi, psi)) ** 2))
               for psi, xi in _ion_kets(params).values())


# Josephson qubits -----------------------------------------------------------


def josephson_povm(params: JosephsonParams, PA, PB) -> dict:
    """Collective POVM of one setting pair from the ideal local projectors."""
    pA, pB = params.p_A, params.p_B
    return {
        (0, 0): kron(PA[0], PB[0]),
        (0, 1): (1 - pB) * kron(PA[0], PB[1]),
        (1, 0): (1 - pA) * kron(PA[1], PB[0]),
        (1, 1): kron(PA[1], PB[1]) + pB * kron(PA[0], PB[1]) + pA * kron(PA[1], PB[0]),
    }


def josephson_model(params: JosephsonParams, angles=None) -> DeviceModel:
    """Phase-qubit model: a measured ``1`` may tunnel and flip the partner to ``1``."""
    A, B = angles or default_angles()
    la, lb = _local_projectors(A), _local_projectors(B)
    coll = {}
    for x, y in itertools.product(range(2), repeat=2):
        for (a, b), E in josephson_povm(params, la[x], lb[y]).items():
            coll[a, b, x, y] = E
    return DeviceModel(principal_state(la, lb), la, lb, coll,
                       name=f"josephson(pA={params.p_A}, pB={params.p_B})")


@dataclass(frozen=True)
class JosephsonChi:
    chi: float
    q_A: float
    q_B: float
    certified: bool = True


def _josephson_objective(params: JosephsonParams, angles=None):
    """Vectorized ``(qA, qB) -> max_{abxy} ||Pi_abxy - M_a|x (x) M_b|y||``."""
    A, B = angles or default_angles()
    la, lb = _local_projectors(A), _local_projectors(B)
    terms = []
    for x, y in itertools.product(range(2), repeat=2):
        for (a, b), E in josephson_povm(params, la[x], lb[y]).items():
            terms.append((E, la[x], lb[y], a, b))

    def f(qa, qb):
        qa = np.atleast_1d(np.asarray(qa, dtype=float))
        qb = np.atleast_1d(np.asarray(qb, dtype=float))
        best = np.zeros(np.broadcast(qa, qb).shape)
        for E, PA, PB, a, b in terms:
            # M_a = w0 P0 + w1 P1 with weights linear in q
            wa = (1 - qa, qa) if a == 0 else (qa, 1 - qa)
            wb = (1 - qb, qb) if b == 0 else (qb, 1 - qb)
            D = np.broadcast_to(E, best.shape + (4, 4)).copy()
            for i in range(2):
                for j in range(2):
                    D -= (wa[i] * wb[j])[..., None, None] * kron(PA[i], PB[j])
            w = np.linalg.eigvalsh(D)
            best = np.maximum(best, np.maximum(-w[..., 0], w[..., -1]))
        return best

    return f


def josephson_chi_bound(params: JosephsonParams, angles=None, *, grid_max: float = 0.01,
                        grid_steps: int = 101) -> JosephsonChi:
    """Least cross-talk over product ansatzes ``M`` for the Josephson POVM.

    A ``grid_steps x grid_steps`` grid on ``[0, grid_max]^2`` picks the
    start (ties broken by the lexicographically smallest ``(q_A, q_B)``),
    then Nelder-Mead refines it inside ``[0, 1]^2``.

    Raises
    ------
    ChiBoundError
        If Nelder-Mead reports failure; ``exc.best`` holds the best point.
    """
    f = _josephson_objective(params, angles)
    g = np.linspace(0.0, grid_max, grid_steps)
    QA, QB = np.meshgrid(g, g, indexing="ij")
    vals = f(QA, QB)
    i = int(np.argmin(vals))
    q0 = np.array([QA.flat[i], QB.flat[i]])

    def obj(q):
        q = np.clip(q, 0.0, 1.0)
        return float(f(q[0], q[1])[0])

    res = minimize(obj, q0, method="Nelder-Mead",
                   options={"xatol": 1e-9, "fatol": 1e-12, "maxiter": 4000})
    q = np.clip(res.x, 0.0, 1.0)
    best = JosephsonChi(obj(q), float(q[0]), float(q[1]))
    if vals.flat[i] < best.chi:
        best = JosephsonChi(float(vals.flat[i]), float(q0[0]), float(q0[1]))
    if not res.success:
        raise ChiBoundError(f"Nelder-Mead did not converge: {res.message}",
                            JosephsonChi(best.chi, best.q_A, best.q_B, certified=False))
    return best


def model_chi_bound(m: DeviceModel, ansatz: ProductAnsatz | None = None) -> float:
    """Cross-talk of a model against its own local POVMs (or a mixed ansatz)."""
    out = 0.0
    for a, b, x, y in ABXY:
        if ansatz is None:
            M = m.product_element(a, b, x, y)
        else:
            M = kron(ProductAnsatz.mix(m.local_a[x], ansatz.q_A)[a],
                     ProductAnsatz.mix(m.local_b[y], ansatz.q_B)[b])
        out = max(out, max_abs_eig(m.collective[a, b, x, y] - M, tol=1e-10))
    return out


def born_behavior(m: DeviceModel) -> Behavior:
    """``P(ab|xy) = Tr(rho Pi_ab|xy)``."""
    p = np.zeros((2, 2, 2, 2))
    for k in ABXY:
        p[k] = np.trace(m.rho @ m.collective[k]).real
    return Behavior.from_estimate(p)


def build_model(kind: str, **params) -> DeviceModel:
    """Model by name: ``ideal``, ``deterministic``, ``ion`` or ``josephson``."""
    if kind == "ideal":
        return ideal_model()
    if kind == "deterministic":
        return deterministic_model()
    if kind == "ion":
        return ion_model(IonParams(**params))
    if kind == "josephson":
        return josephson_model(JosephsonParams(**params))
    raise ModelError(f"unknown model {kind!r}")
