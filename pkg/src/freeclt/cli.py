"""Command-line front end.

Exit codes: 0 success, 1 configuration or validation error, 2 numerical
non-convergence, 3 property assertion failed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np
from scipy.integrate import trapezoid

from . import cltlab, spectra
from .errors import (ConfigError, Divergent, FreeCLTError, NoConvergence, OrderExceeded,
                     Singular)
from .freemoments import FreeFamilySpec
from .jsonio import complex_from_json, dumps, fmt_float, matrix_from_json, matrix_to_json
from .linpoly import CauchyEvalConfig, NcPoly, linearize, scalar_cauchy_from_pencil, series_domain, validate_pencil
from .matlin import CertifiedConstants, OmegaParams
from .opmodel import OperatorModel, SumModel, cauchy_series
from .scsolver import SemicircularSpec, solve_cauchy

log = logging.getLogger("freeclt")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_ASSERT = 0, 1, 2, 3
NUMERIC_ERRORS = (NoConvergence, Divergent, Singular, OrderExceeded)


class AssertionFailed(Exception):
    pass


def load_schema() -> dict:
    text = resources.files("freeclt").joinpath("schemas/config.json").read_text()
    return json.loads(text)


def validate_config(cmd: str, cfg: dict) -> None:
    schema = load_schema()
    root = {"$defs": schema["$defs"], "$ref": f"#/$defs/{cmd}"}
    try:
        jsonschema.validate(cfg, root, cls=jsonschema.Draft202012Validator)
    except jsonschema.ValidationError as exc:
        loc = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{loc}: {exc.message}") from None


def _solver(cfg: dict) -> dict:
    s = dict(cfg.get("solver", {}))
    return {"theta": s.get("theta", 0.2), "sigma": s.get("sigma", 0.9), "c": s.get("c", 2.0),
            "gamma": s.get("gamma", 0.1), "tol": s.get("tol", 1e-12),
            "max_iter": s.get("max_iter", 10_000), "Jmax": s.get("Jmax", 96)}


def _write_csv(path: Path, header: list, rows: list) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt_float(v) if isinstance(v, float) else v for v in row])
    path.write_text(buf.getvalue())


def _write_json(path: Path, obj) -> None:
    path.write_text(dumps(obj) + "\n")


# ---------------------------------------------------------------- commands

def cmd_solve(cfg: dict, out: Path, args) -> int:
    model = OperatorModel.from_json(cfg["model"])
    s = _solver(cfg)
    spec = SemicircularSpec.from_model(model)
    p = spec.default_params(s["theta"], s["sigma"], s["c"])
    points = [matrix_from_json(cfg["b"])] if "b" in cfg else [matrix_from_json(b) for b in cfg["points"]]
    if any(b.shape[0] != model.m for b in points):
        raise ConfigError(f"points must be {model.m}x{model.m}")
    reports = []
    for b in points:
        rep = solve_cauchy(spec, b, tol=s["tol"], max_iter=s["max_iter"], p=p)
        reports.append({**rep.to_json(), "b": matrix_to_json(b)})
    result = reports[0] if "b" in cfg else {"reports": reports}
    _write_json(out / "solve.json", result)
    return EXIT_OK


def cmd_clt_rate(cfg: dict, out: Path, args) -> int:
    model = OperatorModel.from_json(cfg["model"])
    s = _solver(cfg)
    n_list = tuple(cfg["n_list"])
    params = OmegaParams(s["theta"], s["sigma"], s["c"], 1.0)
    cc = CertifiedConstants.from_params(params, s["gamma"])
    _, omega_star = cltlab.certified_params(model, n_list, params, cc)
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    grid = cltlab.build_grid(cfg["grid"], model.m, omega_star, seed=seed)
    exp = cltlab.RateExperiment(model, n_list, tuple(grid), params, cc, s["tol"], s["Jmax"], seed, args.workers)
    res = cltlab.run_rate(exp)
    rows = [[r.n, r.b_id, r.norm_b, r.diff, r.scaled, r.theta_norm, r.subord_resid] for r in res.rows]
    _write_csv(out / "rates.csv", ["n", "b_id", "norm_b", "diff", "scaled", "theta_norm", "subord_resid"], rows)
    floor = cfg.get("noise_floor", 1e-9)
    max_diff = max((r.diff for r in res.rows), default=0.0)
    bounded = max_diff < floor or cltlab.trend_ok(res.max_scaled_by_n(), cfg.get("trend_factor", 1.2))
    summary = {"slope": res.slope, "slope_ci": res.slope_ci, "max_scaled": res.max_scaled,
               "max_diff": max_diff, "bounded": bounded, "failures": res.failures,
               "kappa_star": omega_star.kappa, "grid_size": len(grid)}
    _write_json(out / "summary.json", summary)
    if res.failures:
        log.warning("%d grid evaluations failed", len(res.failures))
    if not bounded:
        raise AssertionFailed("sqrt(n) * diff shows an increasing trend")
    return EXIT_OK


def _family(cfg: dict, p: NcPoly) -> FreeFamilySpec:
    fam = FreeFamilySpec.from_json(cfg["family"])
    if fam.d != p.d:
        raise ConfigError(f"polynomial has {p.d} generators, family has {fam.d}")
    return fam


def cmd_poly(cfg: dict, out: Path, args) -> int:
    p = NcPoly.parse(cfg["polynomial"])
    fam = _family(cfg, p)
    s = _solver(cfg)
    pen = linearize(p, cfg.get("pencil_kind"))
    base = dict(tol=s["tol"], theta=s["theta"], sigma=s["sigma"], c=s["c"], gamma=s["gamma"],
                Jmax=s["Jmax"], max_iter=s["max_iter"])
    zs = [complex_from_json(z) for z in cfg.get("z", [])]
    rows = []
    for z in zs:
        g = scalar_cauchy_from_pencil(pen, fam, z, CauchyEvalConfig(engine="fixed_point", **base))
        rows.append(["fixed_point", "inf", z.real, z.imag, g.real, g.imag])
    summary = {"polynomial": str(p), "pencil": {"m": pen.m, "kind": pen.kind, "mu_validated": pen.mu_validated}}
    if "n_list" in cfg:
        n_list = tuple(cfg["n_list"])
        rate_rows, slope, ci, R = cltlab.poly_rate(p, fam, n_list, None, CauchyEvalConfig(**base))
        _write_csv(out / "poly_rate.csv", ["n", "z_re", "z_im", "diff", "scaled"],
                   [[r.n, r.z.real, r.z.imag, r.diff, r.scaled] for r in rate_rows])
        summary.update({"slope": slope, "slope_ci": ci, "R": R,
                        "max_scaled": max(r.scaled for r in rate_rows)})
        spen = pen if pen.m == 1 or pen.mu_validated else linearize(p, "bidiagonal")
        for z in zs:
            for n in n_list:
                scfg = CauchyEvalConfig(engine="series", n=n, **base)
                if abs(z) > series_domain(spen, fam, scfg).R:
                    g = scalar_cauchy_from_pencil(spen, fam, z, scfg)
                    rows.append(["series", n, z.real, z.imag, g.real, g.imag])
    _write_csv(out / "poly.csv", ["engine", "n", "z_re", "z_im", "g_re", "g_im"], rows)
    _write_json(out / "summary.json", summary)
    return EXIT_OK


def cmd_density(cfg: dict, out: Path, args) -> int:
    p = NcPoly.parse(cfg["polynomial"])
    fam = _family(cfg, p)
    s = _solver(cfg)
    g = cfg["grid"]
    if not g["stop"] > g["start"]:
        raise ConfigError("grid stop must exceed start")
    x = np.linspace(g["start"], g["stop"], g["num"])
    pen = linearize(p, cfg.get("pencil_kind"), validate_mu=False)
    ev = spectra.pencil_evaluator(pen, fam, tol=s["tol"], max_iter=max(s["max_iter"], spectra.NEAR_AXIS_MAX_ITER))
    dens = spectra.density_from_cauchy(ev, x, tuple(cfg.get("eps", spectra.DEFAULT_EPS)))
    cdf = spectra.cdf_from_density(dens)
    _write_csv(out / "density.csv", ["x", "density"], [[float(a), float(b)] for a, b in zip(dens.x, dens.values)])
    _write_csv(out / "cdf.csv", ["x", "cdf"], [[float(a), float(b)] for a, b in zip(cdf.x, cdf.values)])
    summary = {"certified": False, "eps": list(dens.eps_schedule), "failures": dens.failures,
               "lipschitz_estimate": spectra.lipschitz_estimate(cdf),
               "mass": float(trapezoid(np.nan_to_num(dens.values), dens.x))}
    ok = True
    oracle = cfg.get("oracle")
    if oracle:
        keep = x >= cfg.get("oracle_min_x", -math.inf)
        err = float(np.max(np.abs(dens.values - spectra.oracle_density(oracle, x))[keep]))
        ref = spectra.Cdf(x, spectra.oracle_cdf(oracle, x))
        summary.update({"oracle": oracle, "sup_error": err, "kolmogorov": spectra.kolmogorov(cdf, ref)})
        if "max_sup_error" in cfg:
            ok = err < cfg["max_sup_error"]
    _write_json(out / "summary.json", summary)
    if not ok:
        raise AssertionFailed(f"density sup error {summary['sup_error']:.3g} above {cfg['max_sup_error']:g}")
    return EXIT_OK


def cmd_check_linearization(cfg: dict, out: Path, args) -> int:
    p = NcPoly.parse(cfg["polynomial"])
    pen = linearize(p, cfg.get("kind"))
    if cfg.get("corrupt"):
        pen = pen.corrupted(cfg["corrupt"])
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    resid = validate_pencil(p, pen, cfg.get("trials", 100), cfg.get("N", 6), seed)
    threshold = cfg.get("threshold", 1e-10)
    _write_json(out / "linearization.json", {"polynomial": str(p), "residual": resid, "threshold": threshold,
                                              "passed": resid < threshold, "pencil": pen.to_json()})
    if not resid < threshold:
        raise AssertionFailed(f"pencil residual {resid:.3g} above {threshold:g}")
    return EXIT_OK


def cmd_mc(cfg: dict, out: Path, args) -> int:
    model = OperatorModel.from_json(cfg["model"])
    s = _solver(cfg)
    b = matrix_from_json(cfg["b"])
    if b.shape[0] != model.m:
        raise ConfigError(f"b must be {model.m}x{model.m}")
    n = cfg.get("n", 1)
    N = cfg.get("N", 500)
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    G, err = cltlab.mc_estimate(model, n, b, N, cfg.get("samples", 20), seed, args.workers)
    result = {"G": matrix_to_json(G), "stderr": err, "N": N, "n": n, "seed": seed}
    ok = True
    if cfg.get("compare_series", True):
        try:
            ref, _ = cauchy_series(SumModel(model, n), b, tol=s["tol"], Jmax=s["Jmax"])
        except (Divergent, OrderExceeded) as exc:
            # b too close to the spectrum for the series; nothing to compare
            result.update({"series": None, "series_note": f"{type(exc).__name__}: {exc}"})
        else:
            dist = float(np.linalg.norm(G - ref, 2))
            bound = 3 * err + 10 / N
            ok = dist < bound
            result.update({"series": matrix_to_json(ref), "error": dist, "bound": bound, "agrees": ok})
    _write_json(out / "mc.json", result)
    if not ok:
        raise AssertionFailed("Monte Carlo estimate disagrees with the series value")
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "clt-rate": cmd_clt_rate,
    "poly": cmd_poly,
    "density": cmd_density,
    "check-linearization": cmd_check_linearization,
    "mc": cmd_mc,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="freeclt", description="Operator-valued free CLT toolkit")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="JSON configuration file")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="RNG seed (overrides the config)")
        sp.add_argument("--workers", type=int, default=cltlab.default_workers(), help="parallel workers")
        sp.add_argument("--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if args.workers < 1:
            raise ConfigError("workers must be positive")
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        validate_config(args.command, cfg)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, out, args)
    except NUMERIC_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except AssertionFailed as exc:
        print(f"assertion failed: {exc}", file=sys.stderr)
        return EXIT_ASSERT
    except (FreeCLTError, KeyError, ValueError, TypeError) as exc:
        print(f"configuration error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
