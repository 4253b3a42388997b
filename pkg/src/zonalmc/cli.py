"""Command line front end: ``zonalmc {verify,classify,mc,certify} --config scenario.yaml``.

Exit status: 0 success, 2 configuration error, 3 precondition not met
(not applicable), 4 invariant failure, 5 indeterminate verdict, 1 anything
unexpected.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import ScenarioConfig
from .errors import (ArgumentError, CapabilityError, ConfigError, ConstructionError, PreconditionError,
                     ZonalMCError)
from .geometry import Evaluation, zero_field
from .manifolds import Ellipsoid2DChart, Ellipsoid3DChart, FlatTorusChart
from .mc import McEngine
from .perturbation import BumpProfile, build_commuting_bump, rotational_bump
from .quadrature import QuadratureRule

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_PRECONDITION = 3
EXIT_INVARIANT = 4
EXIT_INDETERMINATE = 5
RUN_SCHEMA = "zonalmc.run/1"


class Outcome(Exception):
    """Carries an exit status and report payload out of a command."""

    def __init__(self, status: int, message: str, payload: dict | None = None):
        super().__init__(message)
        self.status = status
        self.payload = payload or {}


def build_flow(cfg: ScenarioConfig, chart):
    from .zonal import zonal_flow_2d, zonal_flow_3d, zonal_flow_torus
    prof = cfg.profile()
    fl = cfg["flow"]
    if isinstance(chart, Ellipsoid3DChart):
        try:
            return zonal_flow_3d(chart, fl["p"], fl["q"], prof, rational=fl["rational"])
        except ArgumentError as exc:
            raise ConfigError(str(exc), path="flow") from None
    if isinstance(chart, Ellipsoid2DChart):
        return zonal_flow_2d(chart, prof)
    if isinstance(chart, FlatTorusChart):
        return zonal_flow_torus(chart, prof)
    raise ConfigError(f"no flow builder for {chart.name}", path="manifold.kind")


def build_perturbation(cfg: ScenarioConfig, flow):
    """(VectorField, PerturbationField or None) for modes bump / rotational / flow / none."""
    pert = cfg["perturbation"]
    mode = pert["mode"]
    chart = flow.chart
    if mode == "flow":
        return flow.Z, None
    if mode == "none":
        return zero_field(chart), None
    if mode == "rotational":
        r = pert["rotational"]
        Y = rotational_bump(chart, tuple(r["axes"]), r["center"], r["radius"], r["amplitude"],
                            r["cutoff_axis"], r["cutoff_center"], r["cutoff_radius"])
        return Y, None
    if mode == "bump":
        b = BumpProfile.from_dict(pert["bump"])
        P = build_commuting_bump(chart, flow, b, cfg["quadrature"]["collar"],
                                 weighted=pert["weighted"])
        return P.field, P
    raise ConfigError(f"mode {mode!r} is not an explicit perturbation", path="perturbation.mode")


def write_profile_csv(path, flow, n: int = 401, collar: float = 1e-3):
    if flow.axis is None:
        return
    from .zonal import _F_jet
    chart = flow.chart
    lo, hi = chart.axes[flow.axis].trimmed(collar)
    u = np.linspace(lo, hi, n)
    pts = np.zeros((n, chart.dim))
    pts[:, flow.axis] = u
    ev = Evaluation(chart, pts)
    F, _ = _F_jet(ev, flow)
    cols = {chart.axes[flow.axis].name: u, "f": flow.f(ev).val, "f2": flow.f2(ev).val,
            "norm2_X": flow.norm2_X(ev).val, "F": F.val}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(cols))
        for row in zip(*cols.values()):
            w.writerow([f"{v:.17g}" for v in row])


# -- commands -----------------------------------------------------------------


def cmd_verify(cfg: ScenarioConfig, args) -> dict:
    from .invariants import flow_checks, run_suite
    chart = cfg.chart()
    with np.errstate(invalid="ignore"):
        checks = run_suite(chart, seed=args.seed)
    if cfg["manifold"]["corrupt"] == "none":
        try:
            checks += flow_checks(build_flow(cfg, chart), seed=args.seed)
        except ZonalMCError:
            pass
    result = {"checks": [c.to_dict() for c in checks],
              "passed": sum(c.passed for c in checks), "failed": sum(not c.passed for c in checks)}
    for c in checks:
        print(f"[{'PASS' if c.passed else 'FAIL'}] {c.name}: residual={c.residual} tol={c.tolerance}"
              + (f" ({c.detail})" if c.detail else ""))
    if result["failed"]:
        raise Outcome(EXIT_INVARIANT, f"{result['failed']} invariant(s) failed", result)
    return result


def cmd_classify(cfg: ScenarioConfig, args) -> dict:
    from .zonal import classify, default_samples
    chart = cfg.chart()
    flow = build_flow(cfg, chart)
    samples = default_samples(chart, cfg["quadrature"]["samples"], args.seed)
    report = classify(flow, samples)
    if cfg["output"]["csv"]:
        write_profile_csv(Path(args.out) / "profile.csv", flow)
    result = report.to_dict()
    print(f"zonal: {report.zonal_verdict}; geodesic: {report.is_geodesic}; S1: {report.is_S1} "
          f"({report.s1_witness}); positive: {report.is_positive}")
    if report.zonal_verdict == "indeterminate":
        raise Outcome(EXIT_INDETERMINATE, "zonality indeterminate", result)
    return result


def _rule(cfg, chart, args):
    return QuadratureRule(chart, cfg.resolution(chart, args.resolution_scale), cfg["quadrature"]["collar"])


def cmd_mc(cfg: ScenarioConfig, args) -> dict:
    chart = cfg.chart()
    flow = build_flow(cfg, chart)
    if cfg["perturbation"]["mode"] == "search":
        cert = _certify(cfg, chart, flow, args)
        result = {"mc": cert.mc, "bump": cert.bump, "search": cert.search}
        verdict = cert.mc["verdict"]
    else:
        Y, P = build_perturbation(cfg, flow)
        rule = _rule(cfg, chart, args)
        if P is not None:
            rule = P.window(rule)
        engine = McEngine(Y, flow)
        csv_path = Path(args.out) / "integrand.csv" if cfg["output"]["csv"] else None
        rep = engine.report(rule, richardson=cfg["quadrature"]["richardson"], csv_path=csv_path)
        result = {"mc": rep.to_dict(), "perturbation": None if P is None else P.describe()}
        verdict = rep.verdict
        for w in rep.warnings:
            print(f"warning: {w}", file=sys.stderr)
        print("mc: " + ", ".join(f"{k}={v:.12g}" for k, v in rep.values().items())
              + f"; richardson_error={rep.richardson_error}; verdict={verdict}")
    if verdict == "indeterminate":
        raise Outcome(EXIT_INDETERMINATE, "mc verdict indeterminate", result)
    return result


def _certify(cfg, chart, flow, args):
    from .search import SearchSettings, certify_positive
    pert = cfg["perturbation"]
    settings = SearchSettings(budget=pert["budget"], t_radius=pert["t_radius"], margin=pert["margin"])
    return certify_positive(chart, flow, pert["budget"], cfg.resolution(chart, args.resolution_scale),
                            cfg["quadrature"]["collar"], settings, cfg["quadrature"]["richardson"])


def cmd_certify(cfg: ScenarioConfig | None, args) -> dict:
    from .search import Certificate, replay
    if args.from_certificate:
        stored = Certificate.from_dict(json.loads(Path(args.from_certificate).read_text()))
        new, diff = replay(stored)
        tol = stored.mc.get("richardson_error") or 0.0
        result = {"certificate": new.to_dict(), "replay_difference": diff, "tolerance": tol,
                  "reproduced": diff <= tol}
        print(f"replay: mc={new.mc['mc_direct']:.12g} (stored {stored.mc['mc_direct']:.12g}); "
              f"difference {diff:.3e} <= {tol:.3e}: {diff <= tol}; verdict {new.verdict}")
        if diff > tol or new.verdict != stored.verdict:
            raise Outcome(EXIT_INVARIANT, "certificate not reproduced", result)
        return result
    chart = cfg.chart()
    flow = build_flow(cfg, chart)
    cert = _certify(cfg, chart, flow, args)
    Path(args.out, "certificate.json").write_text(json.dumps(cert.to_dict(), indent=2))
    if cfg["output"]["csv"]:
        write_profile_csv(Path(args.out) / "profile.csv", flow)
    print(f"certificate: verdict={cert.verdict} mc={cert.mc['mc_direct']:.12g} "
          f"richardson_error={cert.mc['richardson_error']} bump={cert.bump}")
    result = {"certificate": cert.to_dict()}
    if cert.verdict != "positive":
        raise Outcome(EXIT_INDETERMINATE, "no positive certificate within budget", result)
    return result


COMMANDS = {"verify": cmd_verify, "classify": cmd_classify, "mc": cmd_mc, "certify": cmd_certify}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="zonalmc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=(COMMANDS[name].__doc__ or name).splitlines()[0])
        p.add_argument("--config", help="scenario YAML file")
        p.add_argument("--out", help="output directory (default: output.dir from the config)")
        p.add_argument("--resolution-scale", type=float, default=1.0,
                       help="multiply every quadrature resolution by this factor")
        p.add_argument("--seed", type=int, default=0, help="seed for random sample points")
        if name == "certify":
            p.add_argument("--from-certificate", help="replay and re-validate a stored certificate")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if not args.resolution_scale > 0:
        print("error: --resolution-scale must be positive", file=sys.stderr)
        return EXIT_CONFIG
    start = time.perf_counter()
    cfg = None
    status, message, result = EXIT_OK, "ok", {}
    try:
        if args.config:
            cfg = ScenarioConfig.from_file(args.config)
        elif not getattr(args, "from_certificate", None):
            raise ConfigError("--config is required")
        args.out = args.out or (cfg["output"]["dir"] if cfg else "out")
        Path(args.out).mkdir(parents=True, exist_ok=True)
        result = COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Outcome as exc:
        status, message, result = exc.status, str(exc), exc.payload
    except (PreconditionError, CapabilityError, ConstructionError) as exc:
        status, message = EXIT_PRECONDITION, f"not applicable: {exc}"
        result = {"error": type(exc).__name__, "residuals": getattr(exc, "residuals", {})}
    except ZonalMCError as exc:
        status, message, result = EXIT_INVARIANT, f"{type(exc).__name__}: {exc}", {"error": type(exc).__name__}
    report = {"schema": RUN_SCHEMA, "command": args.command, "status": status, "message": message,
              "tool_version": __version__, "scenario": cfg.to_dict() if cfg else None,
              "input_digest": cfg.digest() if cfg else None,
              "seed": args.seed, "resolution_scale": args.resolution_scale,
              "seconds": time.perf_counter() - start, "result": result}
    Path(args.out, "report.json").write_text(json.dumps(report, indent=2, default=_jsonable))
    if status != EXIT_OK:
        print(message, file=sys.stderr)
    return status


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, float) and not np.isfinite(x):
        return str(x)
    raise TypeError(f"not JSON serialisable: {type(x).__name__}")


if __name__ == "__main__":
    sys.exit(main())
