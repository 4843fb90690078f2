"""Command line entry point: ``kslab <subcommand> [options]``.

Exit status is 0 on success, 1 on usage or configuration errors and 2 when
a property check fails. Every file written starts with '#' provenance lines.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from . import __version__
from .config import RunConfig, load_config
from .energetics import (
    gaussian,
    inequality_family,
    inequality_suite,
    log_hls_residual,
    orlicz_phi,
    orlicz_phi_star,
)
from .errors import ConfigurationError, KSLabError, PropertyViolation
from .evolve import LP_EXPONENTS, blow_up_monitor, run, small_time_decay_probe, uniqueness_gap
from .linop import assemble, hypodissipativity_check, semigroup_decay, spectrum
from .output import (
    ensure_dir,
    provenance,
    svg_lines,
    svg_scatter,
    write_csv,
    write_dat,
    write_json,
)
from .profiles import profile_bounds_report, profile_for_mass, shoot_profile
from .radial_core import NormSpace, Space, build_grid

WORKERS_ENV = "KSLAB_WORKERS"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigurationError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from exc
    if n < 1:
        raise ConfigurationError(f"{WORKERS_ENV} must be at least 1")
    return n


def _map(fn, items):
    n = workers()
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(n, len(items))) as pool:
        return list(pool.map(fn, items))


# -- argument handling ------------------------------------------------------

_FLAGS = {
    "frame": str, "eps": float, "alpha": float, "mass": float, "b": float, "init": str,
    "width": float, "delta": float, "n": int, "r_max": float, "grading": str, "ratio": float,
    "scheme": str, "dt": float, "T": float, "t_first": float, "growth": float, "cadence": int,
    "probes": str, "N": float, "R": float, "k": float, "ell": float, "eta": float,
    "seeds": int, "seed": int, "count": int, "output_dir": str,
}


def _add_common(p: argparse.ArgumentParser, skip=()):
    p.add_argument("--config", help="key = value configuration file (sections allowed)")
    for name, kind in _FLAGS.items():
        if name in skip:
            continue
        p.add_argument(f"--{name.replace('_', '-')}", dest=name, type=kind, default=None)


def _config(args, **defaults) -> RunConfig:
    text = ""
    if args.config:
        try:
            with open(args.config) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigurationError(f"cannot read config file: {exc}") from exc
    overrides = {}
    for name in _FLAGS:
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    return load_config(text, overrides, defaults)


def _grid(cfg: RunConfig):
    return build_grid(cfg.r_max, cfg.n, cfg.grading, cfg.ratio)


def _header(cfg: RunConfig, grid, *extra):
    return provenance(cfg.digest(), grid.descriptor(), extra)


def _check(ok: bool, message: str, failures: list):
    status = "PASS" if ok else "FAIL"
    print(f"{status} {message}")
    if not ok:
        failures.append(message)


# -- subcommands ------------------------------------------------------------


def cmd_profile(args) -> list:
    cfg = _config(args, eps=0.1)
    grid = _grid(cfg)
    out = ensure_dir(cfg.output_dir)
    p = shoot_profile(cfg.eps, cfg.b, grid) if cfg.b is not None else profile_for_mass(cfg.eps, cfg.mass, grid)
    head = _header(cfg, grid, f"eps={p.epsilon:g} b={p.b!r} M={p.M!r}")
    rows = zip(grid.nodes, p.G.values, p.V.values, p.dV.values)
    write_csv(os.path.join(out, "profile.csv"), head, ["r", "G", "V", "dV"], rows)
    bounds = profile_bounds_report(p)
    bound = 4 * math.pi * min(2.0, p.b) * 1.001
    cert = {"epsilon": p.epsilon, "b": p.b, "mass": p.M, "residual": p.residual,
            "mass_bound": 4 * math.pi * min(2.0, p.b), **bounds.as_dict()}
    write_json(os.path.join(out, "certificate.json"), head, cert)
    failures = []
    _check(p.M <= bound, f"profile mass below 4 pi min(2, b): M={p.M:.10g} bound={bound:.10g}", failures)
    _check(p.residual <= 1e-8, f"discrete stationary residual {p.residual:.3e} <= 1e-8", failures)
    return failures


def cmd_evolve(args) -> list:
    cfg = _config(args)
    grid = _grid(cfg)
    out = ensure_dir(cfg.output_dir)
    traj = run(cfg, grid)
    head = _header(cfg, grid, f"frame={cfg.frame} scheme={cfg.scheme} dt={cfg.dt:g} T={cfg.T:g}")
    fields = list(traj.reports[0].as_dict()) if traj.reports else []
    cols = ["t"] + fields + [f"Lp_{p:g}" for p in LP_EXPONENTS] + [
        "distance_to_profile", "cumulative_dissipation", "energy_residual", "mass_drift"]
    rows = []
    for i, t in enumerate(traj.times):
        rep = traj.reports[i].as_dict()
        rows.append([t] + [rep[k] for k in fields] + list(traj.lp[i]) + [
            traj.distance[i], traj.cumulative_dissipation[i], traj.energy_residual[i], traj.mass_drift[i]])
    write_csv(os.path.join(out, "trajectory.csv"), head, cols, rows)
    write_dat(os.path.join(out, "trajectory.dat"), head, cols, rows)
    write_json(os.path.join(out, "events.json"), head, {"events": traj.events})
    t = np.array(traj.times)
    svg_lines(os.path.join(out, "free_energy.svg"), {"F": (t, traj.column("free_energy"))},
              "free energy", "t", "F")
    svg_lines(os.path.join(out, "mass.svg"), {"M": (t, traj.column("mass"))}, "mass", "t", "M")
    if cfg.init != "gaussian":
        svg_lines(os.path.join(out, "distance.svg"), {"distance": (t, np.array(traj.distance))},
                  "distance to profile", "t", "|||.|||", logy=True)
    failures = []
    drift = float(np.max(np.abs(traj.mass_drift)))
    _check(drift <= 1e-10, f"mass conservation: relative drift {drift:.3e} <= 1e-10", failures)
    if cfg.frame == "original" and cfg.mass < 8 * math.pi:
        F0 = traj.reports[0].free_energy
        res = float(np.nanmax(np.abs(traj.energy_residual)))
        _check(res <= 1e-3 * abs(F0), f"free energy identity: residual {res:.3e} <= 1e-3 |F0|", failures)
    if "small_time" in cfg.probes:
        probe = small_time_decay_probe(traj)
        write_csv(os.path.join(out, "small_time.csv"), head, ["t", "t^(1/4)|f|_4/3", "t|f|_2^2", "t^2|f|_3^3"],
                  zip(probe["t"], probe["q"], probe["p2"], probe["p3"]))
    if "blowup" in cfg.probes:
        write_json(os.path.join(out, "blowup.json"), head, {"event": blow_up_monitor(traj)})
    for ev in traj.events:
        print(f"EVENT {ev['event']} at t={ev['time']:.6g} ({ev['indicator']})")
    return failures


def _spectrum_task(task):
    cfg, eps, out = task
    grid = _grid(cfg)
    p = profile_for_mass(eps, cfg.mass, grid)
    kind = "omega" if eps == 0 else "lambda_eps"
    op = assemble(p, kind, NormSpace(Space.X, cfg.k, cfg.ell))
    rep = spectrum(op, True, cfg.count)
    ensure_dir(out)
    head = _header(cfg, grid, f"operator={kind} eps={eps:g} M={cfg.mass!r}")
    write_csv(os.path.join(out, "eigenvalues.csv"), head, ["re", "im", "residual"], rep.rows())
    ev = rep.eigenvalues
    svg_scatter(os.path.join(out, "spectrum.svg"), ev.real, ev.imag, f"rightmost eigenvalues, {kind}",
                "Re", "Im", vlines=(-1.0, -1.0 / 3.0))
    return kind, eps, rep.abscissa, float(np.nanmax(rep.residuals))


def cmd_spectrum(args) -> list:
    cfg = _config(args, eps=0.02, n=400)
    eps_list = [float(e) for e in args.eps_list.split(",")] if args.eps_list else [cfg.eps]
    base = ensure_dir(cfg.output_dir)
    tasks = [(cfg, e, base if len(eps_list) == 1 else os.path.join(base, f"eps_{e:g}")) for e in eps_list]
    failures = []
    gapped = []
    for kind, eps, absc, res in _map(_spectrum_task, tasks):
        target = -1.0 if kind == "omega" else -1.0 / 3.0
        if kind == "lambda_eps" and absc <= target + 0.05:
            gapped.append(eps)
        _check(absc <= target + 0.05,
               f"spectral gap of the linearised operator ({kind}, eps={eps:g}): abscissa {absc:.6f} <= {target + 0.05:.4f}",
               failures)
        _check(res <= 1e-8, f"eigenpair residuals ({kind}, eps={eps:g}): max {res:.3e} <= 1e-8", failures)
    if len(eps_list) > 1:
        # the largest swept eps with the gap on this grid; not a claim about the true threshold
        largest = max(gapped) if gapped else None
        write_json(os.path.join(base, "sweep.json"), _header(cfg, _grid(cfg), f"eps_list={eps_list}"),
                   {"eps_list": eps_list, "largest_eps_with_gap": largest})
        print(f"INFO largest eps in the sweep with abscissa <= -1/3 + 0.05: {largest}")
    return failures


def cmd_stability(args) -> list:
    cfg = _config(args, frame="self_similar", eps=0.02, init="perturbed_profile", T=20.0, dt=0.05,
                  n=400, cadence=5)
    grid = _grid(cfg)
    out = ensure_dir(cfg.output_dir)
    traj = run(cfg, grid)
    t = np.array(traj.times)
    d = np.array(traj.distance)
    head = _header(cfg, grid, f"eps={cfg.eps:g} delta={cfg.delta:g}")
    write_csv(os.path.join(out, "decay.csv"), head, ["t", "distance"], zip(t, d))
    write_dat(os.path.join(out, "decay.dat"), head, ["t", "distance"], zip(t, d))
    window = (t >= min(5.0, cfg.T / 4)) & (t <= cfg.T)
    slope = float(np.polyfit(t[window], np.log(d[window]), 1)[0])
    svg_lines(os.path.join(out, "decay.svg"), {"distance": (t, d)}, f"decay, fitted slope {slope:.3f}",
              "tau", "|||.|||", logy=True)
    failures = []
    _check(slope <= -0.3, f"nonlinear exponential stability of the profile: fitted slope {slope:.4f} <= -0.3",
           failures)
    if args.certificate:
        p = profile_for_mass(cfg.eps, cfg.mass, grid)
        eta = cfg.eta_value
        cert = hypodissipativity_check(assemble(p, "B_eps", N=cfg.N, R=cfg.R),
                                       NormSpace(Space.Xstar, cfg.k, cfg.ell, eta, eta, eta))
        write_json(os.path.join(out, "certificate.json"), head, cert.as_dict())
        _check(cert.passed, f"hypo-dissipativity of B_eps: {cert.value:.4f} <= {cert.threshold}", failures)
        rep = semigroup_decay(assemble(p, "lambda_eps"), T=cfg.T, seeds=cfg.seeds, seed=cfg.seed)
        write_json(os.path.join(out, "semigroup.json"), head, rep.as_dict())
        _check(rep.worst <= -1 / 3 + 0.05, f"linear semigroup decay: worst slope {rep.worst:.4f} <= -1/3 + 0.05",
               failures)
    return failures


def _uniqueness_task(cfg):
    return run(cfg)


def cmd_uniqueness(args) -> list:
    cfg = _config(args, width=0.5, dt=5e-3, t_first=1e-4, growth=1.1, cadence=5, n=64)
    out = ensure_dir(cfg.output_dir)
    levels = [cfg.n * 2 ** j for j in range(args.refinements + 1)]
    trajs = _map(_uniqueness_task, [replace(cfg, n=n) for n in levels])
    gaps = []
    for a, b in zip(trajs, trajs[1:]):
        gaps.append(float(uniqueness_gap(a, b)["delta"][-1]))
    orders = [math.log2(gaps[i] / gaps[i + 1]) for i in range(len(gaps) - 1)]
    grid = _grid(cfg)
    head = _header(cfg, grid, f"levels={levels}")
    rows = [(levels[i], levels[i + 1], gaps[i], orders[i - 1] if i else math.nan) for i in range(len(gaps))]
    write_csv(os.path.join(out, "uniqueness.csv"), head, ["n", "2n", "delta_T", "observed_order"], rows)
    failures = []
    worst = min(orders) if orders else math.nan
    _check(bool(orders) and worst >= 1.0,
           f"uniqueness surrogate: gap between resolutions shrinks at order {worst:.3f} >= 1", failures)
    return failures


def cmd_check_inequalities(args) -> list:
    cfg = _config(args, n=2048, r_max=12.0)
    grid = _grid(cfg)
    out = ensure_dir(cfg.output_dir)
    family = inequality_family(args.family, grid)
    suites = [inequality_suite(f) for f in family]
    reports = [s.as_dict() for s in suites]
    ratios = [r for s in suites for r in s.all_ratios()]
    hls = {f"{m / math.pi:g}pi": log_hls_residual(gaussian(grid, m, 1.0)) for m in (math.pi, 4 * math.pi, 7 * math.pi)}
    ts = np.geomspace(1e3, 1e9, 13)
    star = [orlicz_phi_star(t) * math.log(t) ** 2 / t ** 2 for t in ts]
    small = [orlicz_phi_star(t) / (t * t / 4) for t in (0.1, 0.5, 1.0)]
    young = min(orlicz_phi(s) + orlicz_phi_star(t) - s * t
                for s in np.geomspace(1e-3, 1e3, 50) for t in np.geomspace(1e-3, 1e3, 50))
    payload = {"family": args.family, "reports": reports, "max_ratio": max(ratios), "log_hls_residual": hls,
               "phi_star_large_t_factor": star, "phi_star_small_t_ratio": small, "young_min_gap": young}
    head = _header(cfg, grid, f"family={args.family}")
    write_json(os.path.join(out, "inequalities.json"), head, payload)
    failures = []
    _check(all(math.isfinite(r) for r in ratios), f"Fisher-information ratios finite, max {max(ratios):.4g}", failures)
    _check(all(math.isfinite(v) for v in hls.values()), "log-HLS residuals finite", failures)
    _check(max(star) <= 2.5, f"conjugate Orlicz bound: max Phi*(t) (log t)^2 / t^2 = {max(star):.4f} <= 2.5", failures)
    _check(young >= -1e-10, f"Young inequality s t <= Phi(s) + Phi*(t): min gap {young:.3e}", failures)
    return failures


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kslab", description="Radial Keller-Segel numerical lab")
    parser.add_argument("--version", action="version", version=f"kslab {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    p = sub.add_parser("profile", help="compute a self-similar profile")
    _add_common(p)
    p = sub.add_parser("evolve", help="integrate the system in time")
    _add_common(p)
    p = sub.add_parser("spectrum", help="rightmost eigenvalues of the linearised operator")
    _add_common(p)
    p.add_argument("--eps-list", dest="eps_list", help="comma separated eps values, run as independent tasks")
    p = sub.add_parser("stability", help="decay of a perturbed profile")
    _add_common(p)
    p.add_argument("--certificate", action="store_true", help="also run the linear checks")
    p = sub.add_parser("uniqueness", help="gap between runs at successive resolutions")
    _add_common(p)
    p.add_argument("--refinements", type=int, default=3)
    p = sub.add_parser("check-inequalities", help="functional inequality suite")
    _add_common(p)
    p.add_argument("--family", default="gaussians", choices=("gaussians", "mixtures", "algebraic"))
    return parser


COMMANDS = {
    "profile": cmd_profile, "evolve": cmd_evolve, "spectrum": cmd_spectrum, "stability": cmd_stability,
    "uniqueness": cmd_uniqueness, "check-inequalities": cmd_check_inequalities,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            parser.print_help(sys.stderr)
            return 1
        failures = COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"kslab: error: {exc}", file=sys.stderr)
        return 1
    except ConfigurationError as exc:
        print(f"kslab: configuration error: {exc}", file=sys.stderr)
        return 1
    except PropertyViolation as exc:
        print(f"kslab: property check failed: {exc}", file=sys.stderr)
        return 2
    except KSLabError as exc:
        print(f"kslab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    if failures:
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
