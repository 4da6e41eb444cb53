import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import moments_from_model
from ctrng.bell import CHSH
from ctrng.models import bell_operator, born_behavior, model_chi_bound
from ctrng.ncpoly import CONST, MonomialSet, max_bell_given_chi, parse_level, randomness_program
from ctrng.sdp import (
    PRIMAL_INFEASIBLE,
    CertificateError,
    ConicBlock,
    ConicProblem,
    ProblemTooLarge,
    dump_problem,
    load_problem,
    solve,
    solve_relaxation,
    validate_certificate,
)


def dense_block(name, F0, Fs):
    """``F0 + sum_i y_i Fs[i]`` as a conic block (upper triangle)."""
    d = F0.shape[0]
    rows, cols, vars_, coefs = [], [], [], []
    for var, F in [(CONST, F0)] + list(enumerate(Fs)):
        for i in range(d):
            for j in range(i, d):
                if F[i, j] != 0.0:
                    rows.append(i), cols.append(j), vars_.append(var), coefs.append(F[i, j])
    return ConicBlock(name, d, np.array(rows, dtype=int), np.array(cols, dtype=int),
                      np.array(vars_, dtype=int), np.array(coefs, dtype=float))


def conic(c, blocks, E=None, e=None, sense="max", bounds=None):
    n = len(c)
    E = sp.csr_matrix((0, n)) if E is None else sp.csr_matrix(E)
    e = np.zeros(0) if e is None else np.asarray(e, dtype=float)
    return ConicProblem(n=n, c=np.asarray(c, dtype=float), c0=0.0, E=E, e=e, blocks=blocks,
                        sense=sense, var_bounds=None if bounds is None else np.asarray(bounds))


def test_scalar_bound():
    # max t subject to 1 - t >= 0
    p = conic([1.0], [dense_block("b", np.ones((1, 1)), [-np.ones((1, 1))])])
    r = solve(p)
    assert r.ok
    assert r.certified_bound == pytest.approx(1.0, abs=1e-6)
    assert r.certified_bound >= r.primal_objective - 1e-9


@given(st.integers(2, 6), st.integers(0, 2**32 - 1))
@settings(max_examples=20, deadline=None)
def test_largest_eigenvalue(d, seed):
    # min t subject to t I - A >= 0 has value lambda_max(A)
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(d, d))
    a = (a + a.T) / 2
    p = conic([1.0], [dense_block("b", -a, [np.eye(d)])], sense="min",
              bounds=[10.0 * (1 + np.abs(a).sum())])
    r = solve(p)
    lmax = np.linalg.eigvalsh(a)[-1]
    assert r.ok
    assert r.primal_objective == pytest.approx(lmax, abs=1e-5)
    # minimisation: the certificate is a lower bound
    assert r.certified_bound <= lmax + 1e-9
    assert r.certified_bound == pytest.approx(lmax, abs=1e-5)


def test_equality_elimination():
    # max y0 + y1 subject to y0 - y1 = 0.25 and the 2x2 block [[1, y0], [y0, 1]] >= 0
    F0 = np.eye(2)
    F1 = np.array([[0.0, 1.0], [1.0, 0.0]])
    p = conic([1.0, 1.0], [dense_block("b", F0, [F1, np.zeros((2, 2))]),
                           dense_block("c", np.ones((1, 1)), [np.zeros((1, 1)), -np.ones((1, 1))])],
              E=[[1.0, -1.0]], e=[0.25])
    r = solve(p)
    assert r.ok
    assert r.certified_bound == pytest.approx(1.75, abs=1e-6)


def test_tsirelson_bound(ideal):
    r, cp = solve_relaxation(max_bell_given_chi(0.0, MonomialSet("L1")))
    lmax = np.linalg.eigvalsh(bell_operator(ideal.local_a, ideal.local_b))[-1]
    assert lmax == pytest.approx(2 * math.sqrt(2), abs=1e-12)
    assert r.certified_bound == pytest.approx(2 * math.sqrt(2), abs=1e-6)
    assert r.certified_bound >= lmax - 1e-9
    validate_certificate(cp, r)


def test_crosstalk_raises_bell_maximum():
    vals = [solve_relaxation(max_bell_given_chi(chi))[0].certified_bound
            for chi in (0.0, 0.01, 0.05)]
    assert vals[0] < vals[1] < vals[2] <= 4.0 + 1e-6


def test_weak_duality_against_model_moments(ion):
    # every physical realisation stays below the certified bound
    chi = model_chi_bound(ion) + 1e-9
    p = born_behavior(ion)
    I = CHSH.evaluate(p)
    for target in [(0, 0, 0, 0), (1, 1, 1, 1), (0, 1, 1, 0)]:
        prob = randomness_program(I, chi, target=target, level=parse_level("L1"))
        r, cp = solve_relaxation(prob, tol=1e-6)
        y = moments_from_model(prob, ion)
        assert prob.objective_value(y) <= r.certified_bound + 1e-9


@pytest.fixture(scope="module")
def solved():
    prob = randomness_program(2.6, 0.005, level=MonomialSet("L1"))
    cp = ConicProblem.from_relaxation(prob)
    return cp, solve(cp, tol=1e-6)


def test_certificate_revalidates(solved):
    cp, r = solved
    check = validate_certificate(cp, r, tol=1e-6)
    assert check.bound == pytest.approx(r.certified_bound, abs=1e-12)
    assert check.bound >= r.primal_objective - 1e-9


def test_corrupted_multiplier_rejected(solved):
    cp, r = solved
    import copy

    bad = copy.deepcopy(r)
    bad.X[0] = -bad.X[0] - np.eye(bad.X[0].shape[0])
    with pytest.raises(CertificateError):
        validate_certificate(cp, bad, tol=1e-6)
    bad = copy.deepcopy(r)
    bad.certified_bound -= 1e-3
    with pytest.raises(CertificateError):
        validate_certificate(cp, bad, tol=1e-6)
    bad = copy.deepcopy(r)
    bad.X = None
    with pytest.raises(CertificateError):
        validate_certificate(cp, bad)


def test_dump_load_roundtrip(solved):
    cp, r = solved
    back = load_problem(dump_problem(cp))
    r2 = solve(back, tol=1e-6)
    assert r2.certified_bound == pytest.approx(r.certified_bound, abs=1e-9)


def test_relaxation_dump_loads_as_conic():
    prob = randomness_program(2.6, 0.005, level=MonomialSet("L1"))
    cp = load_problem(prob.to_json())
    assert cp.n == prob.n_vars
    with pytest.raises(ValueError):
        load_problem('{"format": "nope"}')


def test_deterministic(solved):
    cp, r = solved
    r2 = solve(cp, tol=1e-6)
    assert r2.certified_bound == r.certified_bound
    assert r2.iterations == r.iterations


def test_objective_scale_invariance(solved):
    cp, r = solved
    r2 = solve(cp.scaled(1e3), tol=1e-6)
    assert r2.certified_bound == pytest.approx(1e3 * r.certified_bound, rel=1e-5)


def test_history_recorded(solved):
    cp, _ = solved
    r = solve(cp, tol=1e-6, record_history=True)
    assert len(r.history) == r.iterations + 1
    assert r.history[-1]["relative_gap"] <= 1e-6


def test_inconsistent_equalities_infeasible():
    blk = dense_block("b", np.ones((1, 1)), [np.zeros((1, 1))])
    p = conic([1.0], [blk], E=[[1.0], [2.0]], e=[1.0, 3.0])
    r = solve(p)
    assert r.status == PRIMAL_INFEASIBLE
    assert r.certified_bound is None


def test_conflicting_blocks_not_certified():
    # y >= 1 and y <= 0 cannot both hold
    p = conic([1.0], [dense_block("lo", -np.ones((1, 1)), [np.ones((1, 1))]),
                      dense_block("hi", np.zeros((1, 1)), [-np.ones((1, 1))])])
    r = solve(p, max_iter=100)
    assert not r.ok
    assert r.certified_bound is None


def test_too_large():
    with pytest.raises(ProblemTooLarge):
        solve(ConicProblem.from_relaxation(randomness_program(2.5, 0.01, level=MonomialSet("L2"))))


def test_bad_dimensions():
    with pytest.raises(ValueError):
        conic([1.0, 2.0], [dense_block("b", np.ones((1, 1)), [np.ones((1, 1))])],
              E=[[1.0]], e=[0.0])
    with pytest.raises(ValueError):
        conic([1.0], [])
