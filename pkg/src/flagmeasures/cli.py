"""Command line front end.

Commands::

    flagmeasures measure --body cube --tau -j 1
    flagmeasures steiner --body simplex -k 1 --parallel 0.3 -m 1
    flagmeasures counterexample --t-grid 1/8,1/16,1/32,1/64
    flagmeasures transform-check -d 4

Every command writes one JSON report (to ``--output`` or stdout). Exit codes:
0 success, 2 inconclusive, 3 failure or error.
"""

from __future__ import annotations

import argparse
import logging
import re
import sys
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from . import __version__
from .config import DEFAULTS, default_seed
from .euclid import DomainError, RngStream, binom, sphere_area
from .polytope import Polytope, box, cube, load_polytope, simplex
from .polytope.exact import to_fraction
from .report import Report

EXIT_OK, EXIT_INCONCLUSIVE, EXIT_ERROR = 0, 2, 3

log = logging.getLogger("flagmeasures")


@dataclass
class RunConfig:
    """Everything that determines a run; serialises losslessly to a dict."""

    command: str
    body: str = "cube"
    dim: int = 3
    measure: str = "tau"
    j: int | None = None
    k: int | None = None
    m: int | None = None
    N: int | None = None
    grid: list[float] | None = None
    parallel: float | None = None
    inversion: bool = False
    additivity: bool = False
    t_grid: list[str] = field(default_factory=lambda: ["1/8", "1/16", "1/32", "1/64"])
    invariant_f: bool = False
    cap: list[float] | None = None
    psi: bool = False
    seed: int = 0
    threads: int = 1
    output: str | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        return cls(**data)


# ---------------------------------------------------------------------------
# bodies
# ---------------------------------------------------------------------------

_LIFT = re.compile(r"^lift[(:]\s*([^,)]+)\s*(?:,\s*(\d+))?\s*\)?$")


def parse_body(spec: str, dim: int = 3) -> Polytope:
    """``cube``, ``simplex``, ``box:a,b,c``, ``lift(t,d)`` / ``lift:t,d`` or a vertex file."""
    s = spec.strip()
    if s == "cube":
        return cube(dim)
    if s == "simplex":
        return simplex(dim)
    if s.startswith("box"):
        body = s[3:].lstrip(":(").rstrip(")")
        sides = [to_fraction(x) for x in body.split(",") if x.strip()]
        if not sides or any(x <= 0 for x in sides):
            raise DomainError(f"bad box spec {spec!r}")
        return box(sides)
    mt = _LIFT.match(s)
    if mt:
        from .counterexample import LiftConfig, build_lift_polytope

        d = int(mt.group(2)) if mt.group(2) else dim
        return build_lift_polytope(LiftConfig(d, to_fraction(mt.group(1)), allow_coarse=True))
    try:
        return load_polytope(s)
    except FileNotFoundError:
        raise DomainError(f"unknown body {spec!r} (not a builtin and no such file)") from None


def _floats(text: str) -> list[float]:
    return [float(Fraction(x)) for x in text.split(",") if x.strip()]


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_measure(cfg: RunConfig, report: Report) -> int:
    from .flagmeasure import (
        cap_indicator,
        flag_area_measure,
        flag_curvature_measure,
        psi_integrate,
        tau,
        theta_polytope,
    )

    P = parse_body(cfg.body, cfg.dim)
    d = P.ambient
    stream = RngStream(cfg.seed)
    N = cfg.N
    if cfg.measure == "tau":
        j = 1 if cfg.j is None else cfg.j
        mu = tau(P, j)
        report.add("expected_total", {"formula": "omega_{d-j} V_j", "value": sphere_area(d - j) * _intrinsic(P, j)})
    else:
        k = 0 if cfg.k is None else cfg.k
        m = 0 if cfg.m is None else cfg.m
        make = {"theta": theta_polytope, "area": flag_area_measure, "curvature": flag_curvature_measure}[cfg.measure]
        mu = make(P, k, m)
        if k == 0:
            report.add("expected_total", {"formula": "omega_{d-m} V_m / binom(d-1, m)",
                                          "value": sphere_area(d - m) * _intrinsic(P, m) / binom(d - 1, m)})
    report.add("body", {"spec": cfg.body, "f_vector": list(P.f_vector), "ambient": d})
    report.add("measure", {"kind": mu.kind, "indices": list(mu.indices), "atoms": mu.records()})
    total = mu.total_mass(N, stream.child(1), threads=cfg.threads)
    report.add("total", total)
    if cfg.cap is not None:
        c, cosr = np.array(cfg.cap[:-1]), cfg.cap[-1]
        f = cap_indicator(c, cosr)
        if cfg.measure == "tau":
            val = mu.integrate(f, N, stream.child(2), threads=cfg.threads)
        elif cfg.measure in ("theta", "area"):
            from .flagmeasure import lift

            val = mu.integrate(lift(f), N, stream.child(2), threads=cfg.threads)
        else:
            raise DomainError("a normal cap is not a test set for a curvature measure")
        report.add("cap_integral", val)
    if cfg.psi:
        if cfg.measure != "tau":
            raise DomainError("--psi goes with --tau")
        from .flagmeasure import constant

        est = psi_integrate(P, mu.indices[0], constant(1.0), N or 10_000, stream.child(3))
        report.add("psi_total", est)
        report.add("psi_expected", sphere_area(d - mu.indices[0]) * _intrinsic(P, mu.indices[0])
                   / binom(d - 1, mu.indices[0]))
    return EXIT_OK


def _intrinsic(P: Polytope, j: int) -> float:
    """``V_j(P)`` from faces and exact external angles (where available)."""
    from .flagmeasure import tau

    d = P.ambient
    if j > P.dim:
        return 0.0
    if j == P.dim:
        return P.volume()
    est = tau(P, j).total_mass(exact_max=3)
    return est.value / sphere_area(d - j)


def cmd_steiner(cfg: RunConfig, report: Report) -> int:
    from .steiner import (
        additivity_check,
        theta_via_inversion,
        verify_local_steiner,
        verify_parallel_expansion,
    )

    P = parse_body(cfg.body, cfg.dim)
    d = P.ambient
    k = 0 if cfg.k is None else cfg.k
    stream = RngStream(cfg.seed)
    report.add("body", {"spec": cfg.body, "f_vector": list(P.f_vector), "ambient": d})
    status = EXIT_OK
    if cfg.parallel is not None:
        m = 0 if cfg.m is None else cfg.m
        rec = verify_parallel_expansion(P, k, m, cfg.parallel, N=cfg.N, rng=stream.child(1), threads=cfg.threads)
        report.add("parallel_expansion", rec)
        status = EXIT_OK if rec["agrees"] else EXIT_INCONCLUSIVE
    elif cfg.additivity:
        m = 0 if cfg.m is None else cfg.m
        if P.vertices is None:
            raise DomainError("additivity needs an exact body")
        shift = [Fraction(0)] * d
        width = max(v[0] for v in P.vertices) - min(v[0] for v in P.vertices)
        shift[0] = width
        M = P.translated(shift)
        rec = additivity_check(P, M, k, m, N=cfg.N, rng=stream.child(2), threads=cfg.threads)
        report.add("additivity", rec)
        status = EXIT_OK if rec["agrees"] and rec["atoms"]["exact"] else EXIT_INCONCLUSIVE
    elif cfg.inversion:
        m = 0 if cfg.m is None else cfg.m
        report.add("theta_via_inversion", theta_via_inversion(P, k, m, N=cfg.N, rng=stream.child(3),
                                                              threads=cfg.threads))
    else:
        fit = verify_local_steiner(P, k, grid=cfg.grid, N=cfg.N, rng=stream.child(4), threads=cfg.threads)
        report.add("fit", fit)
        status = EXIT_OK if fit.agrees else EXIT_INCONCLUSIVE
    return status


def cmd_counterexample(cfg: RunConfig, report: Report) -> int:
    from .counterexample import run_counterexample

    j = 1 if cfg.j is None else cfg.j
    res = run_counterexample(j, cfg.t_grid, cfg.N or 100_000, RngStream(cfg.seed), d=cfg.dim,
                             control=cfg.invariant_f)
    report.add("experiment", res)
    return {"success": EXIT_OK, "null-control passed": EXIT_OK,
            "inconclusive": EXIT_INCONCLUSIVE}.get(res.status, EXIT_ERROR)


def cmd_transform_check(cfg: RunConfig, report: Report) -> int:
    from .flagmeasure import grassmann_det_moment, transform_constant_check

    stream = RngStream(cfg.seed)
    N = cfg.N or 100_000
    dims = [cfg.dim] if cfg.dim else [3, 4, 5]
    rows = []
    ok = True
    for d in dims:
        for k in range(d):
            if cfg.k is not None and k != cfg.k:
                continue
            for m in range(d - k):
                if cfg.m is not None and m != cfg.m:
                    continue
                est, exact = grassmann_det_moment(d, k, m, N, stream.child(1000 * d + 10 * k + m))
                z = est.zscore(exact)
                ok &= abs(z) <= 3
                rows.append({"d": d, "k": k, "m": m, "estimate": est, "exact": exact, "z": z})
    report.add("moments", rows)
    tr = []
    for d in dims:
        for j in range(1, d - 1):
            est = transform_constant_check(d, j, N, stream.child(7000 + 10 * d + j))
            z = est.zscore(1 / binom(d - 1, j))
            ok &= abs(z) <= 3
            tr.append({"d": d, "j": j, "estimate": est, "exact": 1 / binom(d - 1, j), "z": z})
    report.add("constant_transform", tr)
    return EXIT_OK if ok else EXIT_INCONCLUSIVE


COMMANDS = {
    "measure": cmd_measure,
    "steiner": cmd_steiner,
    "counterexample": cmd_counterexample,
    "transform-check": cmd_transform_check,
}


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("-N", type=int, default=None, help="Monte Carlo budget (per cone / per eps)")
    p.add_argument("--seed", type=int, default=None, help="root seed (default: $FLAGMEASURES_SEED)")
    p.add_argument("--threads", type=int, default=None, help="worker cap")
    p.add_argument("-o", "--output", default=None, help="report path (default stdout)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="flagmeasures", description=__doc__.split("\n\n")[0])
    ap.add_argument("--version", action="version", version=f"flagmeasures {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    pm = sub.add_parser("measure", help="flag measures of a polytope")
    pm.add_argument("--body", default="cube")
    pm.add_argument("-d", "--dim", type=int, default=3)
    g = pm.add_mutually_exclusive_group()
    g.add_argument("--tau", dest="measure", action="store_const", const="tau")
    g.add_argument("--theta", dest="measure", action="store_const", const="theta")
    g.add_argument("--area", dest="measure", action="store_const", const="area")
    g.add_argument("--curvature", dest="measure", action="store_const", const="curvature")
    pm.set_defaults(measure="tau")
    pm.add_argument("-j", type=int)
    pm.add_argument("-k", type=int)
    pm.add_argument("-m", type=int)
    pm.add_argument("--cap", type=_floats, help="normal cap 'c1,...,cd,cos_radius'")
    pm.add_argument("--psi", action="store_true", help="also integrate 1 against psi_j")
    _common(pm)

    ps = sub.add_parser("steiner", help="local Steiner formula checks")
    ps.add_argument("--body", default="cube")
    ps.add_argument("-d", "--dim", type=int, default=3)
    ps.add_argument("-k", type=int, default=0)
    ps.add_argument("-m", type=int)
    ps.add_argument("--grid", type=_floats, help="eps grid, e.g. 0.5,1.0,1.5")
    ps.add_argument("--parallel", type=float, help="parallel-body expansion at this eps")
    ps.add_argument("--inversion", action="store_true", help="Theta_m by Vandermonde inversion only")
    ps.add_argument("--additivity", action="store_true", help="split-box additivity check")
    _common(ps)

    pc = sub.add_parser("counterexample", help="lift polytopes and the separating valuation")
    pc.add_argument("-d", "--dim", type=int, default=3)
    pc.add_argument("-j", type=int, default=1)
    pc.add_argument("--t-grid", default="1/8,1/16,1/32,1/64")
    pc.add_argument("--invariant-f", action="store_true", help="rotation-invariant control function")
    _common(pc)

    pt = sub.add_parser("transform-check", help="Grassmannian moment calibration")
    pt.add_argument("-d", "--dim", type=int, default=0, help="0 means d = 3, 4, 5")
    pt.add_argument("-k", type=int)
    pt.add_argument("-m", type=int)
    _common(pt)
    return ap


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(command=ns.command)
    for name in ("body", "dim", "measure", "j", "k", "m", "N", "grid", "parallel", "inversion",
                 "additivity", "cap", "psi", "output"):
        if hasattr(ns, name):
            setattr(cfg, name, getattr(ns, name))
    if hasattr(ns, "t_grid"):
        cfg.t_grid = [x.strip() for x in ns.t_grid.split(",") if x.strip()]
    if hasattr(ns, "invariant_f"):
        cfg.invariant_f = ns.invariant_f
    cfg.seed = default_seed() if ns.seed is None else ns.seed
    cfg.threads = DEFAULTS.threads if ns.threads is None else ns.threads
    return cfg


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    ns = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    cfg = config_from_args(ns)
    report = Report(cfg.command, cfg.to_dict())
    try:
        code = COMMANDS[cfg.command](cfg, report)
    except (DomainError, ValueError, OSError) as exc:
        print(f"flagmeasures: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    text = report.write(cfg.output)
    if cfg.output in (None, "-"):
        sys.stdout.write(text)
    return code


__all__ = ["RunConfig", "parse_body", "build_parser", "config_from_args", "main", "COMMANDS"]
