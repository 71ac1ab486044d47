"""Command line front end.

    stairfbp solve-radial   --config run.cfg --out DIR
    stairfbp solve-ring     --config run.cfg --out DIR --threads 8
    stairfbp solve-obstacle --config run.cfg --out DIR
    stairfbp multiplicity   --config run.cfg --out DIR
    stairfbp certify        --config run.cfg --field DIR/solution.field --out DIR

Exit status: 0 when the run certifies, 2 when it completes but a
certification check fails, 1 on any error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import kernels
from .errors import StairError
from .io import load_config, read_field, write_curves, write_field, write_report

log = logging.getLogger("stairfbp")

VERB_KIND = {"solve-radial": "radial", "solve-ring": "ring2d",
             "solve-obstacle": "obstacle", "multiplicity": "multiplicity"}


def _level_curves(fld, levels):
    from .level import extract_level

    out = []
    for s in levels:
        curve = extract_level(fld, s)
        out.extend((s, comp) for comp in curve.components)
    return out


def _write_thresholds(out, fld, mus, prefix="gamma_mu"):
    for i, mu in enumerate(mus, 1):
        write_curves(out / f"{prefix}{i}.curves", _level_curves(fld, [mu]))


def run_radial(cfg, out):
    from .grid import Circle, ConvexRing, build_field
    from .level import certify_levels
    from .radial import RadialProblem, eval_radial, matching_jumps, solve_radial

    prob = RadialProblem(cfg.dim, cfg.r0, cfg.R, cfg.ladder, cfg.phi)
    sol = solve_radial(prob)
    dv, ds = matching_jumps(sol)
    report = {"kind": "radial",
              "solver": {"radii": list(sol.s), "realized_thresholds": sol.k,
                         "inactive": list(sol.inactive),
                         "newton_iterations": sol.newton_iterations,
                         "interface_residual": sol.residual,
                         "value_jump": float(dv), "slope_jump": float(ds)}}
    ok = max(report["solver"]["interface_residual"], report["solver"]["value_jump"],
             report["solver"]["slope_jump"]) <= 1e-10
    if cfg.dim == 2:
        ring = ConvexRing(Circle((0, 0), cfg.R), Circle((0, 0), cfg.r0))
        fld = build_field(ring, cfg.h, cfg.ladder.M)
        X, Y = fld.coords()
        ins = fld.interior
        vals = fld.values.copy()
        vals[ins] = eval_radial(sol, np.clip(np.hypot(X[ins], Y[ins]), cfg.r0, cfg.R))
        fld = fld.with_values(vals)
        write_field(out / "solution.field", fld)
        mus = [cfg.ladder.mu[i] for i in range(sol.k)]
        _write_thresholds(out, fld, mus)
        levels = certify_levels(fld, cfg.ladder, cfg.levels, cfg.defect_tol)
        report["levels"] = levels.as_dict()
        ok = ok and levels.passed
    report["passed"] = bool(ok)
    return report


def run_ring(cfg, out):
    from .grid import build_field
    from .level import certify_levels
    from .ring_fd import continuation_solve, residual_audit

    fld = build_field(cfg.ring, cfg.h, cfg.ladder.M)
    u, rep = continuation_solve(fld, cfg.ladder, cfg.sched, cfg.phi, cfg.tol,
                                method=cfg.method, lin_tol=cfg.lin_tol)
    levels = certify_levels(u, cfg.ladder, cfg.levels, cfg.defect_tol)
    audit = residual_audit(u, cfg.ladder, cfg.phi)
    write_field(out / "solution.field", u)
    _write_thresholds(out, u, cfg.ladder.mu)
    write_curves(out / "levels.curves", _level_curves(u, cfg.levels))
    report = {"kind": "ring2d", "geometry": cfg.ring.describe(), "h": cfg.h,
              "solver": rep.as_dict(), "residual": audit.summary(),
              "levels": levels.as_dict(),
              "passed": bool(levels.passed and rep.as_dict()["monotonicity_ok"])}
    return report


def run_obstacle(cfg, out):
    from .grid import Circle
    from .level import default_defect_tol, extract_level, gradient_floor
    from .obstacle import audit_lambda_convexity, radial_contact_error, solve_obstacle
    from .radial import solve_radial_obstacle

    prob = cfg.problem
    tol = 1e-10 if cfg.tol is None else cfg.tol
    fld, lam, rep = solve_obstacle(prob, cfg.h, tol)
    defect_tol = default_defect_tol(cfg.h) if cfg.defect_tol is None else cfg.defect_tol
    defect = audit_lambda_convexity(lam)
    gamma = extract_level(fld, prob.mu, top=prob.u0)
    floor = gradient_floor(fld, gamma)
    write_field(out / "solution.field", fld)
    write_curves(out / "lambda.curves", [(prob.c, lam.polygon)])
    write_curves(out / "gamma_mu1.curves", [(prob.mu, c) for c in gamma.components])
    comp = rep.complementarity
    report = {"kind": "obstacle", "domain": prob.domain.describe(), "h": cfg.h, "tol": tol,
              "solver": rep.as_dict(),
              "contact": {"nodes": lam.count, "components": lam.components,
                          "defect": defect, "defect_tol": defect_tol},
              "gamma_mu": {"components": sum(gamma.closed), "grad_floor": floor}}
    ok = (comp["free_max_abs"] <= tol and comp["contact_min"] >= -tol
          and defect <= defect_tol and floor > 0)
    if isinstance(prob.domain, Circle):
        rs = solve_radial_obstacle(2, prob.domain.radius, prob.u0, prob.c, prob.mu, prob.f0)
        err = radial_contact_error(lam, prob.domain.center, rs.a)
        report["radial_oracle"] = {"a": rs.a, "b": rs.b, "contact_radius_error": err}
        ok = ok and err <= 2 * cfg.h
    report["passed"] = bool(ok)
    return report


def run_multiplicity(cfg, out):
    from .conformal import MoebiusInvolution, build_family, certify_family, patch_phi
    from .radial import RadialProblem, solve_radial

    base = solve_radial(RadialProblem(2, cfg.r0, cfg.R, cfg.ladder, cfg.phi))
    fam = build_family(base, MoebiusInvolution(cfg.R, cfg.alpha), cfg.m, cfg.h)
    phi = patch_phi(fam)
    cert = certify_family(fam, phi, cfg.ladder, cfg.distinct_min, cfg.res_tol)
    for mem in fam.members:
        write_field(out / f"member_{mem.k}.field", mem.field)
        _write_thresholds(out, mem.field, cfg.ladder.mu, prefix=f"member_{mem.k}_gamma_mu")
    report = {"kind": "multiplicity", "alpha": cfg.alpha, "m": cfg.m, "h": cfg.h,
              "radii": list(base.s), "band_audit": fam.audit,
              "multiplicity": cert.as_dict(), "passed": bool(cert.passed)}
    return report


def run_certify(cfg, out, field_path):
    from .level import certify_levels

    fld = read_field(field_path)
    levels = certify_levels(fld, cfg.ladder, cfg.levels, cfg.defect_tol)
    return {"kind": "certify", "field": Path(field_path).name,
            "levels": levels.as_dict(), "passed": bool(levels.passed)}


RUNNERS = {"radial": run_radial, "ring2d": run_ring, "obstacle": run_obstacle,
           "multiplicity": run_multiplicity}


def build_parser():
    p = argparse.ArgumentParser(prog="stairfbp", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="verb", required=True)
    for verb in list(VERB_KIND) + ["certify"]:
        sp = sub.add_parser(verb)
        sp.add_argument("--config", required=True, help="key = value configuration file")
        sp.add_argument("--out", default=None, help="output directory (default: config 'out' or .)")
        sp.add_argument("--threads", type=int, default=1, help="relaxation kernel threads")
        sp.add_argument("-v", "--verbose", action="store_true")
        if verb == "certify":
            sp.add_argument("--field", required=True, help="saved FIELD v1 file")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        from threadpoolctl import threadpool_limits

        kernels.set_threads(args.threads)
        # BLAS reductions are not bit-stable across thread counts; pin them
        with threadpool_limits(limits=1):
            cfg = load_config(args.config, VERB_KIND.get(args.verb))
            out = Path(args.out or cfg.out or ".")
            out.mkdir(parents=True, exist_ok=True)
            if args.verb == "certify":
                report = run_certify(cfg, out, args.field)
            else:
                report = RUNNERS[cfg.kind](cfg, out)
            write_report(out / "report.json", report)
    except (StairError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    status = "PASS" if report["passed"] else "FAIL"
    print(f"{args.verb}: {status} ({out / 'report.json'})")
    return 0 if report["passed"] else 2


if __name__ == "__main__":
    sys.exit(main())
