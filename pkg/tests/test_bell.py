import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ctrng.bell import (
    CHSH,
    CHSH_SCENARIO,
    Behavior,
    BehaviorError,
    delta_from_chi,
    deterministic_box,
    evaluate,
    local_deterministic_boxes,
    pr_box,
    signaling_box,
    signaling_delta,
    uniform_box,
)


def random_behavior(rng):
    p = rng.random((2, 2, 2, 2))
    return Behavior(p / p.sum(axis=(0, 1), keepdims=True))


class TestReferenceBoxes:
    def test_pr_box_reaches_algebraic_maximum(self):
        assert CHSH.evaluate(pr_box()) == pytest.approx(4.0)
        assert signaling_delta(pr_box()) == 0.0

    def test_uniform_box(self):
        assert CHSH.evaluate(uniform_box()) == pytest.approx(0.0)

    def test_local_boxes_respect_classical_bound(self):
        vals = [CHSH.evaluate(b) for b in local_deterministic_boxes()]
        assert len(vals) == 16
        assert max(vals) == pytest.approx(2.0)
        assert min(vals) == pytest.approx(-2.0)

    def test_signaling_box(self):
        assert signaling_delta(signaling_box()) == pytest.approx(1.0)

    def test_gamma_of_chsh(self):
        assert CHSH.gamma == 16.0


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=50, deadline=None)
def test_chsh_range_and_marginals(seed):
    p = random_behavior(np.random.default_rng(seed))
    assert -4.0 <= CHSH.evaluate(p) <= 4.0
    np.testing.assert_allclose(p.marginal_a().sum(axis=0), 1.0)
    np.testing.assert_allclose(p.marginal_b().sum(axis=0), 1.0)
    assert 0.0 <= signaling_delta(p) <= 1.0


@given(st.integers(0, 2**32 - 1), st.floats(0, 1))
@settings(max_examples=30, deadline=None)
def test_chsh_is_affine_under_mixing(seed, w):
    rng = np.random.default_rng(seed)
    p, q = random_behavior(rng), random_behavior(rng)
    m = p.mix(q, w)
    assert CHSH.evaluate(m) == pytest.approx((1 - w) * CHSH.evaluate(p) + w * CHSH.evaluate(q))


def test_no_signaling_deterministic_box():
    b = deterministic_box(lambda x: x, lambda y: 1 - y)
    assert signaling_delta(b) == 0.0
    assert b[1, 0, 1, 1] == 1.0


def test_delta_from_chi():
    assert delta_from_chi(CHSH_SCENARIO, 0.003) == pytest.approx(0.012)
    with pytest.raises(ValueError):
        delta_from_chi(CHSH_SCENARIO, 1.5)


class TestValidation:
    def test_unnormalized_rejected(self):
        with pytest.raises(BehaviorError):
            Behavior(np.full((2, 2, 2, 2), 0.3))

    def test_negative_rejected(self):
        p = np.full((2, 2, 2, 2), 0.25)
        p[0, 0, 0, 0], p[1, 1, 0, 0] = -0.1, 0.6
        with pytest.raises(BehaviorError):
            Behavior(p)

    def test_wrong_shape(self):
        with pytest.raises(BehaviorError):
            Behavior(np.ones((2, 2, 2)))

    def test_from_estimate_clips_and_renormalizes(self):
        p = np.full((2, 2, 2, 2), 0.25)
        p[0, 0, 0, 0] = -1e-12
        b = Behavior.from_estimate(p)
        assert b[0, 0, 0, 0] == 0.0
        np.testing.assert_allclose(b.p.sum(axis=(0, 1)), 1.0)

    def test_from_counts_needs_every_setting(self):
        n = np.zeros((2, 2, 2, 2))
        n[0, 0, 0, 0] = 5
        with pytest.raises(BehaviorError):
            Behavior.from_counts(n)

    def test_shape_mismatch_in_evaluate(self):
        from ctrng.bell import BellExpression

        with pytest.raises(BehaviorError):
            evaluate(BellExpression(np.ones((3, 3, 2, 2))), pr_box())


@pytest.mark.parametrize("fmt", ["json", "csv"])
def test_serialization_roundtrip(fmt, tmp_path):
    p = random_behavior(np.random.default_rng(7))
    path = tmp_path / f"b.{fmt}"
    path.write_text(p.to_json() if fmt == "json" else p.to_csv())
    q = Behavior.load(path)
    np.testing.assert_allclose(q.p, p.p, rtol=0, atol=1e-15)


def test_behavior_is_immutable():
    p = pr_box()
    with pytest.raises(ValueError):
        p.p[0, 0, 0, 0] = 1.0


def test_table_indexing_convention():
    p = pr_box()
    for a, b, x, y in itertools.product(range(2), repeat=4):
        assert p[a, b, x, y] == (0.5 if a ^ b == x & y else 0.0)
