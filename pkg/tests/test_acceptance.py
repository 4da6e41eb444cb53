"""Acceptance criteria 1-10 at their stated tolerances.

Each test carries an ``acceptance`` marker; the conftest summary hook
prints one PASS/FAIL line per criterion with the measured values.
"""

import itertools
import math
import time

import numpy as np
import pytest

from ctrng import cli
from ctrng.bell import pr_box, signaling_delta
from ctrng.bounds import (
    TSIRELSON,
    bound_shifted,
    bound_signaling,
    closed_form_chsh_zero,
    sdp_max_bell,
    sdp_min_chi,
    sdp_p_star,
)
from ctrng.lp import p_star_lp
from ctrng.models import (
    IonParams,
    JosephsonParams,
    born_behavior,
    ideal_model,
    ion_chi_bound,
    josephson_chi_bound,
    josephson_model,
)
from ctrng.pipeline import ExperimentConfig, chsh_sigma, monobit_pvalue, run
from ctrng.sdp import validate_certificate

acceptance = pytest.mark.acceptance

HEADLINE_I, HEADLINE_CHI = 2.0732, 0.0030
JOSEPHSON = JosephsonParams(0.0059, 0.0031)


@acceptance(1, "Josephson chi bound")
def test_josephson_chi(record_property):
    t0 = time.perf_counter()
    res = josephson_chi_bound(JOSEPHSON)
    dt = time.perf_counter() - t0
    record_property("chi", f"{res.chi:.6f}")
    record_property("q", f"({res.q_A:.6f}, {res.q_B:.6f})")
    record_property("seconds", f"{dt:.2f}")
    assert res.chi == pytest.approx(0.0030, abs=3e-4)
    assert 0.0 <= res.q_A <= 0.001
    assert res.q_B == pytest.approx(0.0029, abs=5e-4)
    assert dt < 10.0


@acceptance(2, "ion chi bound")
def test_ion_chi(record_property):
    t0 = time.perf_counter()
    chi = ion_chi_bound(IonParams(0.03))
    dt = time.perf_counter() - t0
    record_property("chi", f"{chi:.6f}")
    record_property("seconds", f"{dt:.3f}")
    assert dt < 1.0
    assert chi == pytest.approx(0.015, abs=0.0015)


def _headline_checks(record_property, level):
    t0 = time.perf_counter()
    b = sdp_p_star(HEADLINE_I, HEADLINE_CHI, level=level)
    dt = time.perf_counter() - t0
    lower = sdp_p_star(HEADLINE_I, 0.0, level=level).value
    upper = bound_shifted(HEADLINE_I, HEADLINE_CHI)
    record_property(f"P*[{b.level}]", f"{b.value:.5f}")
    record_property(f"seconds[{b.level}]", f"{dt:.1f}")
    assert upper == pytest.approx(0.9966, abs=5e-4)
    assert b.value <= 0.99
    assert lower - 1e-6 <= b.value <= upper
    return b, dt


@acceptance(3, "headline bound I=2.0732, chi=0.003")
def test_headline_bound_l1xy(record_property):
    _headline_checks(record_property, "L1+XY")


@acceptance(3, "headline bound I=2.0732, chi=0.003")
def test_headline_bound_l2r(record_property):
    b, dt = _headline_checks(record_property, "L2r")
    assert b.value == pytest.approx(0.983, abs=0.005)
    assert dt < 300.0


@acceptance(4, "low-violation bound I=2.002, chi=0.003")
def test_low_violation_bound(record_property):
    t0 = time.perf_counter()
    b = sdp_p_star(2.002, HEADLINE_CHI, level="L1+XY:local+XY")
    record_property(f"P*[{b.level}]", f"{b.value:.5f}")
    record_property("seconds", f"{time.perf_counter() - t0:.1f}")
    assert b.value <= 0.998 + 0.001


@acceptance(5, "Tsirelson reproduction")
def test_tsirelson(record_property):
    v0 = sdp_max_bell(0.0, "L1").value
    v1 = sdp_max_bell(1.0, "L1").value
    record_property("chi=0", f"{v0:.7f}")
    record_property("chi=1", f"{v1:.7f}")
    assert v0 == pytest.approx(2 * math.sqrt(2), abs=1e-4)
    assert v1 == pytest.approx(4.0, abs=1e-4)


@acceptance(6, "LP equals signaling formula")
def test_lp_equivalence(record_property):
    worst = 0.0
    for I, d in itertools.product(np.linspace(2.0, 4.0, 20), np.linspace(0.0, 0.05, 5)):
        worst = max(worst, abs(p_star_lp(I, d).value - bound_signaling(I, d)))
    pr = p_star_lp(4.0, 0.0).value
    record_property("max_dev", f"{worst:.2e}")
    assert worst <= 1e-7
    assert pr == pytest.approx(0.5, abs=1e-7)


@acceptance(7, "min-chi separations")
def test_min_chi_separations(record_property):
    pr = sdp_min_chi(pr_box()).value
    ideal = sdp_min_chi(born_behavior(ideal_model())).value
    pj = born_behavior(josephson_model(JOSEPHSON))
    jos = sdp_min_chi(pj).value
    delta = signaling_delta(pj)
    record_property("PR", f"{pr:.5f}")
    record_property("ideal", f"{ideal:.1e}")
    record_property("josephson", f"{jos:.6f}")
    record_property("delta/4", f"{delta / 4:.6f}")
    assert pr > 0.01
    assert ideal <= 1e-5
    assert 0.0 < jos <= 0.0033
    assert jos >= delta / 4


SANDWICH_I = (2.1, 2.3, 2.5, 2.7, 2.8)
SANDWICH_CHI = (0.001, 0.005)


@acceptance(8, "sandwich and monotonicity")
def test_sandwich(record_property):
    level = "L1+XY"
    sdp_vals = np.zeros((len(SANDWICH_CHI), len(SANDWICH_I)))
    shifted = np.zeros_like(sdp_vals)
    zero = np.array([sdp_p_star(I, 0.0, level=level).value for I in SANDWICH_I])
    checked = 0
    for (i, chi), (j, I) in itertools.product(enumerate(SANDWICH_CHI), enumerate(SANDWICH_I)):
        b = sdp_p_star(I, chi, level=level)
        for t, rep in b.reports.items():
            validate_certificate(b.problems[t], rep, tol=1e-6)
            checked += 1
        sdp_vals[i, j] = b.value
        shifted[i, j] = bound_shifted(I, chi)
        assert zero[j] - 1e-6 <= b.value <= shifted[i, j], (I, chi)
    record_property("certificates", checked)
    tol = 1e-6
    assert np.all(np.diff(zero) <= tol)
    assert np.all(np.diff(sdp_vals, axis=1) <= tol)
    assert np.all(np.diff(shifted, axis=1) <= 0.0)
    assert np.all(np.diff(sdp_vals, axis=0) >= -tol)
    assert all(np.diff([closed_form_chsh_zero(I) for I in SANDWICH_I]) <= 0.0)


@acceptance(9, "pipeline statistics over 50 seeds")
def test_pipeline_statistics(record_property):
    t0 = time.perf_counter()
    model = ideal_model()
    p = born_behavior(model)
    within, passed, lengths = 0, 0, []
    for seed in range(50):
        recs, cert = run(model, ExperimentConfig(n=100_000, seed=seed), 0.0)
        totals = recs.counts().sum(axis=(0, 1))
        if abs(cert.I_hat - TSIRELSON) <= 3 * chsh_sigma(p, totals):
            within += 1
        lengths.append(cert.output_length)
        if cert.output_length and monobit_pvalue(cert.bits) >= 0.01:
            passed += 1
    dt = time.perf_counter() - t0
    record_property("within_3sigma", f"{within}/50")
    record_property("monobit", f"{passed}/50")
    record_property("min_bits", min(lengths))
    record_property("seconds", f"{dt:.1f}")
    assert within >= 47
    assert min(lengths) > 0
    assert passed >= 48
    assert dt < 60.0


@acceptance(10, "byte-identical reruns")
def test_determinism(tmp_path):
    outputs = []
    for k in range(2):
        d = tmp_path / f"run{k}"
        d.mkdir()
        argv = ["certify", "--model", "josephson", "--n", "20000", "--seed", "7",
                "--chi", "0.003", "--method", "sdp", "--out", str(d),
                "--records", str(d / "records.csv")]
        assert cli.main(argv, out=open(d / "stdout.txt", "w")) == 0
        curve = ["curve", "--steps", "5", "--chi", "0.003", "--level", "L1",
                 "--methods", "zero,sdp,shifted,signaling,lp", "--zero-curve", "closed",
                 "--out", str(d / "curve.csv")]
        assert cli.main(curve, out=open(d / "curve_stdout.txt", "w")) == 0
        outputs.append({f.name: f.read_bytes() for f in sorted(d.iterdir())
                        if "stdout" not in f.name})
    assert outputs[0].keys() == outputs[1].keys()
    assert {"certificate.json", "certificate.bits", "certificate.hex", "records.csv",
            "curve.csv"} <= outputs[0].keys()
    for name in outputs[0]:
        assert outputs[0][name] == outputs[1][name], name
