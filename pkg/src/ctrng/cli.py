"""Command-line front end: ``ctrng {bound,curve,chi,certify,regions}``.

Every command first prints its fully resolved configuration as one JSON
line prefixed by ``# config:``, so any run can be reproduced from its
output.  Exit codes: 0 success, 2 usage error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import bounds, lp, models, pipeline, sdp
from .bell import CHSH, CHSH_SCENARIO, Behavior, BehaviorError, delta_from_chi, pr_box, uniform_box

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3
THREADS_ENV = "CTRNG_THREADS"

NUMERIC_ERRORS = (bounds.BoundError, sdp.SolverError, sdp.CertificateError, lp.LPError,
                  models.ChiBoundError, pipeline.PipelineError)

DEFAULTS = {
    "bound": {"I": None, "chi": 0.0, "delta": None, "method": "sdp", "level": "L1+XY",
              "zero_curve": "sdp", "zero_level": "L2r", "setting": "00", "bell_geq": False,
              "format": "text"},
    "curve": {"chi": 0.01, "I_min": 2.0, "I_max": bounds.TSIRELSON, "steps": 20,
              "methods": "zero,sdp,shifted", "level": "L1+XY", "zero_curve": "sdp",
              "zero_level": "L2r", "out": None},
    "chi": {"behavior": None, "model": None, "pA": 0.0059, "pB": 0.0031, "epsilon": 0.03,
            "level": "L1+XY:scalar", "pin_tolerance": 0.0, "format": "text"},
    "certify": {"model": "ideal", "pA": 0.0059, "pB": 0.0031, "epsilon": 0.03, "n": 100_000,
                "seed": 0, "chi": 0.0, "method": "analytic", "eps_sec": 1e-6, "level": "L1+XY",
                "zero_curve": "sdp", "zero_level": "L2r", "out": ".", "stem": "certificate",
                "records": None},
    "regions": {"chi_list": "0,0.001,0.003,0.01,0.03,0.1,1", "steps": 11, "level": "L1",
                "min_chi_level": "L1+XY:scalar", "out": None},
}


class UsageError(ValueError):
    pass


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def _pmap(fn, items):
    """Map preserving input order, optionally over a thread pool."""
    n = _threads()
    if n == 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


def _build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    p = argparse.ArgumentParser(prog="ctrng", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", default=S, help="JSON file with default values for flags")

    b = sub.add_parser("bound", help="guessing-probability bound at one point", argument_default=S)
    common(b)
    b.add_argument("--I", type=float, dest="I", help="Bell (CHSH) value")
    b.add_argument("--chi", type=float)
    b.add_argument("--delta", type=float, help="signaling budget for the lp method (default 2N chi)")
    b.add_argument("--method", choices=pipeline.METHODS)
    b.add_argument("--level", help="relaxation level, e.g. L1+XY or L1+XY:local+XY")
    b.add_argument("--zero-curve", dest="zero_curve", choices=("sdp", "closed"))
    b.add_argument("--zero-level", dest="zero_level")
    b.add_argument("--setting", help="input pair as two bits, e.g. 00")
    b.add_argument("--bell-geq", dest="bell_geq", action="store_true",
                   help="read the Bell value as a lower bound")
    b.add_argument("--format", choices=("text", "json"))

    c = sub.add_parser("curve", help="bound curves against the Bell value", argument_default=S)
    common(c)
    c.add_argument("--chi", type=float)
    c.add_argument("--I-min", dest="I_min", type=float)
    c.add_argument("--I-max", dest="I_max", type=float)
    c.add_argument("--steps", type=int)
    c.add_argument("--methods", help="comma list of zero,sdp,shifted,closed,signaling,lp")
    c.add_argument("--level")
    c.add_argument("--zero-curve", dest="zero_curve", choices=("sdp", "closed"))
    c.add_argument("--zero-level", dest="zero_level")
    c.add_argument("--out", help="CSV path (default stdout)")

    x = sub.add_parser("chi", help="cross-talk estimates", argument_default=S)
    common(x)
    x.add_argument("--behavior", help="behavior file (JSON or CSV)")
    x.add_argument("--model", choices=("ideal", "ion", "josephson"))
    x.add_argument("--pA", type=float)
    x.add_argument("--pB", type=float)
    x.add_argument("--epsilon", type=float)
    x.add_argument("--level")
    x.add_argument("--pin-tolerance", dest="pin_tolerance", type=float)
    x.add_argument("--format", choices=("text", "json"))

    r = sub.add_parser("certify", help="simulate, bound and extract", argument_default=S)
    common(r)
    r.add_argument("--model", choices=("ideal", "ion", "josephson", "deterministic"))
    r.add_argument("--pA", type=float)
    r.add_argument("--pB", type=float)
    r.add_argument("--epsilon", type=float)
    r.add_argument("--n", type=int)
    r.add_argument("--seed", type=int)
    r.add_argument("--chi", type=float)
    r.add_argument("--method", choices=pipeline.METHODS)
    r.add_argument("--eps-sec", dest="eps_sec", type=float)
    r.add_argument("--level")
    r.add_argument("--zero-curve", dest="zero_curve", choices=("sdp", "closed"))
    r.add_argument("--zero-level", dest="zero_level")
    r.add_argument("--out", help="output directory")
    r.add_argument("--stem")
    r.add_argument("--records", help="also write the trial records to this CSV path")

    g = sub.add_parser("regions", help="cross-talk-restricted Bell regions", argument_default=S)
    common(g)
    g.add_argument("--chi-list", dest="chi_list")
    g.add_argument("--steps", type=int)
    g.add_argument("--level")
    g.add_argument("--min-chi-level", dest="min_chi_level")
    g.add_argument("--out", help="CSV path (default stdout)")
    return p


def resolve(argv) -> tuple[str, dict]:
    """Parse flags and merge them over the config file over the defaults."""
    ns = vars(_build_parser().parse_args(argv))
    cmd = ns.pop("command")
    cfg = dict(DEFAULTS[cmd])
    path = ns.pop("config", None)
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config file {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = sorted(set(data) - set(cfg))
        if unknown:
            raise UsageError(f"unknown config keys for '{cmd}': {', '.join(unknown)}")
        cfg.update(data)
    cfg.update(ns)
    return cmd, cfg


def _echo(cmd: str, cfg: dict, out) -> None:
    out.write("# config: " + json.dumps({"command": cmd, **cfg}, sort_keys=True) + "\n")


def _curve_for(cfg):
    if cfg["zero_curve"] == "closed":
        return bounds.ClosedFormCurve()
    return bounds.ZeroCurve(cfg["zero_level"])


def _setting(s: str) -> tuple[int, int]:
    if len(s) != 2 or any(ch not in "01" for ch in s):
        raise UsageError(f"setting must be two bits such as 00, got {s!r}")
    return int(s[0]), int(s[1])


def _check_range(name, v, lo, hi):
    if v is None or not lo <= v <= hi:
        raise UsageError(f"--{name} must lie in [{lo}, {hi}], got {v}")


# commands -------------------------------------------------------------------


def cmd_bound(cfg, out) -> int:
    _check_range("I", cfg["I"], -4.0, 4.0)
    _check_range("chi", cfg["chi"], 0.0, 1.0)
    if cfg["delta"] is not None:
        _check_range("delta", cfg["delta"], 0.0, 1.0)
    I, chi, method = cfg["I"], cfg["chi"], cfg["method"]
    setting = _setting(cfg["setting"])
    level, status = None, "certified"
    if method == "analytic":
        curve = _curve_for(cfg)
        level = curve.level.describe() if isinstance(curve, bounds.ZeroCurve) else "closed"
        if chi == 0.0 and I > bounds.TSIRELSON:
            raise UsageError("I exceeds Tsirelson's bound at chi = 0")
        val = bounds.bound_shifted(I, chi, CHSH.gamma, curve)
    elif method == "lp":
        delta = cfg["delta"] if cfg["delta"] is not None else delta_from_chi(CHSH_SCENARIO, chi)
        level = f"delta={delta:.10g}"
        val = lp.p_star_lp(I, delta, bell_inequality=cfg["bell_geq"]).value
    else:
        if chi == 0.0 and I > bounds.TSIRELSON + 1e-9:
            raise UsageError("I exceeds Tsirelson's bound at chi = 0")
        b = bounds.sdp_p_star(I, chi, setting, cfg["level"], bell_inequality=cfg["bell_geq"])
        val, level = b.value, b.level
    res = {"P_star": val, "method": method, "level": level, "status": status,
           "I": I, "chi": chi, "setting": cfg["setting"]}
    if cfg["format"] == "json":
        out.write(json.dumps(res, sort_keys=True) + "\n")
    else:
        out.write(f"P*={_fmt(val)} method={method} level={level} status={status}\n")
    return EXIT_OK


def _write_csv(rows, header, path, out):
    lines = [",".join(header)] + [",".join(_fmt(v) for v in row) for row in rows]
    text = "\n".join(lines) + "\n"
    if path:
        Path(path).write_text(text)
    else:
        out.write(text)


CURVE_METHODS = ("zero", "sdp", "shifted", "closed", "signaling", "lp")


def cmd_curve(cfg, out) -> int:
    _check_range("chi", cfg["chi"], 0.0, 1.0)
    if cfg["steps"] < 2:
        raise UsageError("--steps must be at least 2")
    if not 2.0 <= cfg["I_min"] <= cfg["I_max"] <= 4.0:
        raise UsageError("need 2 <= I-min <= I-max <= 4")
    methods = [m.strip() for m in cfg["methods"].split(",") if m.strip()]
    bad = [m for m in methods if m not in CURVE_METHODS]
    if bad or not methods:
        raise UsageError(f"unknown curve methods {bad}; choose from {CURVE_METHODS}")
    chi = cfg["chi"]
    curve = _curve_for(cfg) if "shifted" in methods else None
    Is = np.linspace(cfg["I_min"], cfg["I_max"], cfg["steps"])

    def one(I):
        I = float(I)
        row, ok = [I], True
        for m in methods:
            try:
                if m == "zero":
                    v = bounds.sdp_p_star(min(I, bounds.TSIRELSON), 0.0, level=cfg["level"]).value
                elif m == "sdp":
                    v = bounds.sdp_p_star(I, chi, level=cfg["level"]).value
                elif m == "shifted":
                    v = bounds.bound_shifted(I, chi, CHSH.gamma, curve)
                elif m == "closed":
                    v = bounds.closed_form_chsh_zero(min(I, bounds.TSIRELSON))
                elif m == "signaling":
                    v = bounds.bound_signaling(I, delta_from_chi(CHSH_SCENARIO, chi))
                else:
                    v = lp.p_star_lp(I, delta_from_chi(CHSH_SCENARIO, chi)).value
            except NUMERIC_ERRORS:
                v, ok = float("nan"), False
            row.append(v)
        row.append("ok" if ok else "failed")
        return row, ok

    if isinstance(curve, bounds.ZeroCurve):
        curve.grid()  # build once before any worker threads start
    results = _pmap(one, Is)
    _write_csv([r for r, _ in results], ["I", *methods, "status"], cfg["out"], out)
    return EXIT_OK if all(ok for _, ok in results) else EXIT_NUMERIC


def _load_behavior(path) -> Behavior:
    try:
        return Behavior.load(path)
    except (OSError, ValueError, KeyError, BehaviorError) as exc:
        raise UsageError(f"cannot read behavior file {path}: {exc}") from exc


def cmd_chi(cfg, out) -> int:
    if (cfg["behavior"] is None) == (cfg["model"] is None):
        raise UsageError("give exactly one of --behavior or --model")
    res = {}
    if cfg["model"] is not None:
        kind = cfg["model"]
        if kind == "ion":
            params = models.IonParams(cfg["epsilon"])
            res["model_upper_bound"] = models.ion_chi_bound(params)
            m = models.ion_model(params)
        elif kind == "josephson":
            params = models.JosephsonParams(cfg["pA"], cfg["pB"])
            jc = models.josephson_chi_bound(params)
            res.update(model_upper_bound=jc.chi, q_A=jc.q_A, q_B=jc.q_B)
            m = models.josephson_model(params)
        else:
            m = models.ideal_model()
            res["model_upper_bound"] = 0.0
        p = models.born_behavior(m)
    else:
        p = _load_behavior(cfg["behavior"])
    est = bounds.sdp_min_chi(p, cfg["level"], pin_tolerance=cfg["pin_tolerance"])
    res.update(simple_lower_bound=est.simple, sdp_lower_bound=est.value, level=est.level,
               chsh=CHSH.evaluate(p))
    if cfg["format"] == "json":
        out.write(json.dumps(res, sort_keys=True) + "\n")
    else:
        for k in sorted(res):
            out.write(f"{k}={_fmt(res[k])}\n")
    return EXIT_OK


def cmd_certify(cfg, out) -> int:
    _check_range("chi", cfg["chi"], 0.0, 1.0)
    if cfg["n"] < 1:
        raise UsageError("--n must be positive")
    kind = cfg["model"]
    try:
        if kind == "ion":
            m = models.ion_model(models.IonParams(cfg["epsilon"]))
        elif kind == "josephson":
            m = models.josephson_model(models.JosephsonParams(cfg["pA"], cfg["pB"]))
        else:
            m = models.build_model(kind)
        ecfg = pipeline.ExperimentConfig(n=cfg["n"], seed=cfg["seed"], epsilon_sec=cfg["eps_sec"])
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    curve = _curve_for(cfg) if cfg["method"] == "analytic" else None
    recs, cert = pipeline.run(m, ecfg, cfg["chi"], cfg["method"], level=cfg["level"],
                              zero_curve=curve)
    paths = cert.write(cfg["out"], cfg["stem"])
    if cfg["records"]:
        Path(cfg["records"]).write_text(recs.to_csv())
    out.write(f"I_hat={_fmt(cert.I_hat)} I_adj={_fmt(cert.I_adj)} P*={_fmt(cert.p_star)} "
              f"bits={cert.output_length} certificate={paths['json']}\n")
    return EXIT_OK


def mixture(v: float) -> Behavior:
    """``v PR + (1 - v) uniform``, CHSH value ``4 v``."""
    return uniform_box().mix(pr_box(), v)


def cmd_regions(cfg, out) -> int:
    try:
        chis = [float(c) for c in cfg["chi_list"].split(",") if c.strip()]
    except ValueError as exc:
        raise UsageError(f"bad --chi-list: {exc}") from exc
    for c in chis:
        _check_range("chi-list entry", c, 0.0, 1.0)
    if cfg["steps"] < 2:
        raise UsageError("--steps must be at least 2")

    def bell_row(chi):
        try:
            return ["max_bell", chi, "", bounds.sdp_max_bell(chi, cfg["level"]).value, "", "ok"], True
        except NUMERIC_ERRORS:
            return ["max_bell", chi, "", float("nan"), "", "failed"], False

    def chi_row(v):
        p = mixture(float(v))
        try:
            est = bounds.sdp_min_chi(p, cfg["min_chi_level"])
            return ["min_chi", "", float(v), CHSH.evaluate(p), est.value, "ok"], True
        except NUMERIC_ERRORS:
            return ["min_chi", "", float(v), CHSH.evaluate(p), float("nan"), "failed"], False

    rows = _pmap(bell_row, sorted(chis)) + _pmap(chi_row, np.linspace(0.0, 1.0, cfg["steps"]))
    _write_csv([r for r, _ in rows], ["kind", "chi", "v", "chsh", "min_chi", "status"],
               cfg["out"], out)
    return EXIT_OK if all(ok for _, ok in rows) else EXIT_NUMERIC


COMMANDS = {"bound": cmd_bound, "curve": cmd_curve, "chi": cmd_chi, "certify": cmd_certify,
            "regions": cmd_regions}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    try:
        cmd, cfg = resolve(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except UsageError as exc:
        sys.stderr.write(f"ctrng: error: {exc}\n")
        return EXIT_USAGE
    _echo(cmd, cfg, out)
    try:
        return COMMANDS[cmd](cfg, out)
    except UsageError as exc:
        sys.stderr.write(f"ctrng: error: {exc}\n")
        return EXIT_USAGE
    except NUMERIC_ERRORS as exc:
        sys.stderr.write(f"ctrng: numerical failure: {exc}\n")
        return EXIT_NUMERIC
    except (ValueError, TypeError) as exc:
        sys.stderr.write(f"ctrng: error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
