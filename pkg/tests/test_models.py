import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ctrng.bell import CHSH, signaling_delta
from ctrng.models import (
    BlochAngles,
    ChiBoundError,
    DeviceModel,
    IonParams,
    JosephsonChi,
    JosephsonParams,
    ModelError,
    ProductAnsatz,
    bell_operator,
    born_behavior,
    build_model,
    default_angles,
    deterministic_model,
    ion_chi_bound,
    ion_chi_closed_form,
    ion_model,
    josephson_chi_bound,
    josephson_model,
    model_chi_bound,
)

ABXY = list(itertools.product(range(2), repeat=4))


@given(st.floats(0, math.pi), st.floats(-math.pi, math.pi))
def test_bloch_projectors(theta, phi):
    P0, P1 = BlochAngles(theta, phi).projectors()
    np.testing.assert_allclose(P0 + P1, np.eye(2), atol=1e-12)
    np.testing.assert_allclose(P0 @ P0, P0, atol=1e-12)
    np.testing.assert_allclose(P0 @ P1, 0, atol=1e-12)
    assert np.trace(P0).real == pytest.approx(1.0)


class TestIdeal:
    def test_reaches_tsirelson(self, ideal):
        assert CHSH.evaluate(born_behavior(ideal)) == pytest.approx(2 * math.sqrt(2), abs=1e-12)

    def test_born_table(self, ideal):
        # P(ab|xy) = (1 + (-1)^(a+b+xy) / sqrt 2) / 4
        p = born_behavior(ideal)
        for a, b, x, y in ABXY:
            s = (-1) ** (a ^ b ^ (x & y))
            assert p[a, b, x, y] == pytest.approx((1 + s / math.sqrt(2)) / 4, abs=1e-12)

    def test_no_crosstalk(self, ideal):
        assert model_chi_bound(ideal) == pytest.approx(0.0, abs=1e-12)
        assert signaling_delta(born_behavior(ideal)) <= 1e-12

    def test_bell_operator_spectrum(self, ideal):
        w = np.linalg.eigvalsh(bell_operator(ideal.local_a, ideal.local_b))
        assert w[-1] == pytest.approx(2 * math.sqrt(2))
        assert w[-1] - w[-2] > 1.0  # nondegenerate top eigenvalue


def test_deterministic_model_is_local():
    m = deterministic_model()
    p = born_behavior(m)
    assert CHSH.evaluate(p) == pytest.approx(2.0)
    assert p[0, 0, 1, 1] == 1.0


class TestIon:
    @pytest.mark.parametrize("eps", [0.0, 0.01, 0.03, 0.1, 0.5])
    def test_matches_phase_overlap(self, eps):
        expected = math.sqrt(1 - math.cos(math.pi * eps / 8) ** 4)
        assert ion_chi_bound(IonParams(eps)) == pytest.approx(expected, abs=1e-12)
        assert ion_chi_closed_form(IonParams(eps)) == pytest.approx(expected, abs=1e-12)

    def test_monotone_in_leak(self):
        vals = [ion_chi_bound(IonParams(e)) for e in np.linspace(0, 0.2, 11)]
        assert np.all(np.diff(vals) > 0)

    def test_model_agrees_with_bound(self):
        p = IonParams(0.03)
        assert model_chi_bound(ion_model(p)) == pytest.approx(ion_chi_bound(p), abs=1e-12)

    def test_leak_lowers_violation(self):
        assert CHSH.evaluate(born_behavior(ion_model(IonParams(0.03)))) < 2 * math.sqrt(2)

    def test_bad_epsilon(self):
        with pytest.raises(ModelError):
            IonParams(-0.1)


class TestJosephson:
    def test_povm_valid(self):
        m = josephson_model(JosephsonParams())
        m.check()
        assert signaling_delta(born_behavior(m)) > 0

    def test_no_flips_no_crosstalk(self):
        res = josephson_chi_bound(JosephsonParams(0.0, 0.0))
        assert res.chi <= 1e-9

    def test_headline_parameters(self):
        res = josephson_chi_bound(JosephsonParams(0.0059, 0.0031))
        assert res.chi == pytest.approx(0.0030, abs=3e-4)
        assert 0.0 <= res.q_A <= 0.001
        assert res.q_B == pytest.approx(0.0029, abs=5e-4)
        assert res.certified

    def test_ansatz_value_consistent(self):
        params = JosephsonParams(0.0059, 0.0031)
        res = josephson_chi_bound(params)
        m = josephson_model(params)
        assert model_chi_bound(m, ProductAnsatz(res.q_A, res.q_B)) == pytest.approx(res.chi, abs=1e-9)
        # the optimised ansatz beats the bare local projectors
        assert res.chi <= model_chi_bound(m) + 1e-12

    def test_swap_symmetry(self):
        a = josephson_chi_bound(JosephsonParams(0.004, 0.002))
        b = josephson_chi_bound(JosephsonParams(0.002, 0.004))
        assert a.chi == pytest.approx(b.chi, abs=1e-7)
        assert a.q_A == pytest.approx(b.q_B, abs=1e-5)

    def test_nonconvergence_keeps_best(self, monkeypatch):
        import ctrng.models as mod

        class Fake:
            success = False
            message = "stopped"
            x = np.array([0.0, 0.0])

        monkeypatch.setattr(mod, "minimize", lambda *a, **k: Fake())
        with pytest.raises(ChiBoundError) as info:
            josephson_chi_bound(JosephsonParams(0.0059, 0.0031))
        assert isinstance(info.value.best, JosephsonChi)
        assert not info.value.best.certified
        assert info.value.best.chi < 0.004

    @pytest.mark.parametrize("pa,pb", [(-0.1, 0.0), (0.0, 1.5)])
    def test_bad_params(self, pa, pb):
        with pytest.raises(ModelError):
            JosephsonParams(pa, pb)


def test_build_model():
    assert build_model("ion", epsilon=0.02).name.startswith("ion")
    assert build_model("josephson").name.startswith("josephson")
    assert build_model("ideal").name == "ideal"
    with pytest.raises(ModelError):
        build_model("photon")


def test_device_model_validation(ideal):
    with pytest.raises(ModelError):
        DeviceModel(ideal.rho * 2, ideal.local_a, ideal.local_b, ideal.collective)
    bad = dict(ideal.collective)
    bad[0, 0, 0, 0] = bad[0, 0, 0, 0] * 0.5
    with pytest.raises(ModelError):
        DeviceModel(ideal.rho, ideal.local_a, ideal.local_b, bad)


def test_default_angles():
    A, B = default_angles()
    assert [a.phi for a in A] == pytest.approx([math.pi / 4, -math.pi / 4])
    assert A == B


@pytest.mark.parametrize("model,upper", [
    (lambda: ion_model(IonParams(0.03)), lambda: ion_chi_bound(IonParams(0.03))),
    (lambda: josephson_model(JosephsonParams()), lambda: josephson_chi_bound(JosephsonParams()).chi),
])
def test_model_bound_dominates_device_independent_bound(model, upper):
    from ctrng.bounds import sdp_min_chi

    assert upper() >= sdp_min_chi(born_behavior(model())).value - 1e-4


def test_maximally_mixed_state_gives_uniform_behavior():
    m = ion_model(IonParams(0.03))
    mixed = DeviceModel(np.eye(4, dtype=complex) / 4, m.local_a, m.local_b, m.collective)
    np.testing.assert_allclose(born_behavior(mixed).p, 0.25, atol=1e-12)


@pytest.mark.parametrize("eps", [0.0, 0.03])
def test_ion_povm_completeness(eps):
    m = ion_model(IonParams(eps))
    for x, y in itertools.product(range(2), repeat=2):
        total = sum(m.collective[a, b, x, y] for a, b in itertools.product(range(2), repeat=2))
        np.testing.assert_allclose(total, np.eye(4), atol=1e-12)
    if eps == 0.0:
        for k in ABXY:
            np.testing.assert_allclose(m.collective[k], m.product_element(*k), atol=1e-12)
