"""Command line runner: ``qwork {fig1,report,verify,scan}``.

Exit codes: 0 success, 1 a verification check failed, 2 configuration error.
"""
import argparse
import csv
from dataclasses import asdict, dataclass, field, fields
import io
import json
import logging
import math
import os
from pathlib import Path
import platform
import re
import sys
import time

import numpy as np

from . import __version__
from .duality import (BoundViolation, closed_form_effectiveness_2level, closed_form_predictability_2level,
                      duality_report, effectiveness, predictability, proof_chain_check,
                      resolve_eps_convention, run_scan, scheme_for)
from .experiment import FIG1_OMEGA, FIG1_OMEGA0, FIG1_T, FIG1_THETAS, TwoLevelExperiment, pure_state
from .propagator import DEFAULT_TOL as PROP_TOL
from .workdist import DEFAULT_QUAD_TOL, MeasurementScheme, evaluate, support_window

log = logging.getLogger("qwork")

FIG1_COLUMNS = ["sigma", "d_w", "v_w", "dw2_plus_vw2", "d_state", "v_state"]
SCAN_COLUMNS = ["theta", "sigma", "d_w", "v_w", "c", "c_tilde", "bound_residual", "sum_residual"]


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    omega0: float = FIG1_OMEGA0
    omega: float = FIG1_OMEGA
    t: float = FIG1_T
    theta: list = field(default_factory=lambda: list(FIG1_THETAS))
    scheme: str = "gaussian"
    sigma: float = None
    sigma_min: float = 1e-3
    sigma_max: float = 1e2
    sigma_points: int = 60
    sigma_grid: list = None
    tol_propagator: float = PROP_TOL
    tol_quadrature: float = DEFAULT_QUAD_TOL
    out: str = None
    format: str = "csv"
    workers: int = None
    figure: bool = False

    def validate(self):
        for name in ("tol_propagator", "tol_quadrature"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0")
        if not self.omega0 >= 0:
            raise ConfigError("omega0 must be >= 0")
        if not self.omega > 0:
            raise ConfigError("omega must be > 0")
        if not self.t >= 0:
            raise ConfigError("t must be >= 0")
        if not self.theta:
            raise ConfigError("theta must name at least one angle")
        for th in self.theta:
            if not 0 <= th <= math.pi / 2 + 1e-15:
                raise ConfigError(f"theta must lie in [0, pi/2], got {th}")
        if self.scheme not in ("gaussian", "projective"):
            raise ConfigError(f"scheme must be gaussian or projective, got {self.scheme!r}")
        if self.sigma is not None and not self.sigma > 0:
            raise ConfigError("sigma must be > 0")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"format must be csv or json, got {self.format!r}")
        grid = self.sigmas()
        if len(grid) == 0 or np.any(np.diff(grid) <= 0) or grid[0] <= 0:
            raise ConfigError("sigma grid must be positive and strictly increasing")
        if self.workers is not None and self.workers < 1:
            raise ConfigError("workers must be >= 1")
        return self

    def sigmas(self):
        if self.sigma_grid is not None:
            return np.asarray(self.sigma_grid, dtype=float)
        if not (self.sigma_min > 0 and self.sigma_max > self.sigma_min and self.sigma_points >= 1):
            raise ConfigError("need 0 < sigma_min < sigma_max and sigma_points >= 1")
        return np.logspace(math.log10(self.sigma_min), math.log10(self.sigma_max), int(self.sigma_points))

    def experiment(self):
        return TwoLevelExperiment(self.omega0, self.omega, self.t, self.tol_propagator)

    def single_scheme(self):
        if self.scheme == "projective":
            return MeasurementScheme.projective()
        return MeasurementScheme.gaussian(0.2 if self.sigma is None else self.sigma)


def load_config(path):
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    known = {f.name for f in fields(RunConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config field(s): {', '.join(sorted(unknown))}")
    if "theta" in data and not isinstance(data["theta"], list):
        data["theta"] = [data["theta"]]
    return RunConfig(**data)


def worker_count(cfg):
    cap = os.environ.get("QWORK_THREADS")
    n = cfg.workers or os.cpu_count() or 1
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise ConfigError(f"QWORK_THREADS must be an integer, got {cap!r}") from None
    return n


def fmt(x):
    return f"{x:.12g}"


def write_table(path, columns, rows, format):
    """Write ``rows`` (dicts) deterministically as CSV or JSON."""
    if format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([fmt(r[c]) for c in columns])
        text = buf.getvalue()
    else:
        text = json.dumps([{c: float(fmt(r[c])) for c in columns} for r in rows], indent=1) + "\n"
    path.write_text(text)


def write_sidecar(path, cfg, command, extra=None):
    meta = {
        "command": command,
        "config": asdict(cfg),
        "qwork_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "created": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    meta.update(extra or {})
    path.write_text(json.dumps(meta, indent=1, default=float) + "\n")


def _theta_tag(theta):
    return f"{theta:.6f}"


def _out_dir(cfg, default):
    out = Path(cfg.out or default)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from exc
    if not os.access(out, os.W_OK):
        raise ConfigError(f"output directory {out} is not writable")
    return out


def cmd_fig1(cfg):
    out = _out_dir(cfg, "fig1_out")
    exp = cfg.experiment()
    sigmas = cfg.sigmas()
    rows = run_scan(exp, cfg.theta, sigmas, cfg.tol_quadrature, worker_count(cfg))
    files = []
    by_theta = {}
    for i, th in enumerate(cfg.theta):
        chunk = rows[i * len(sigmas):(i + 1) * len(sigmas)]
        by_theta[th] = chunk
        path = out / f"fig1_theta_{_theta_tag(th)}.{cfg.format}"
        write_table(path, FIG1_COLUMNS, [asdict(r) for r in chunk], cfg.format)
        files.append(path)
    write_sidecar(out / "fig1_meta.json", cfg, "fig1", {"files": [p.name for p in files]})
    if cfg.figure:
        from .plotting import plot_fig1
        files.append(plot_fig1(by_theta, out / "fig1.png"))
    for p in files:
        print(p)
    return 0


def cmd_scan(cfg):
    out = _out_dir(cfg, "scan_out")
    exp = cfg.experiment()
    rows = run_scan(exp, cfg.theta, cfg.sigmas(), cfg.tol_quadrature, worker_count(cfg))
    path = out / f"scan.{cfg.format}"
    write_table(path, SCAN_COLUMNS, [asdict(r) for r in rows], cfg.format)
    best = max(rows, key=lambda r: r.dw_plus_vw)
    write_sidecar(out / "scan_meta.json", cfg, "scan", {"argmax": asdict(best)})
    print(path)
    print(f"argmax d_w+v_w = {fmt(best.dw_plus_vw)} at theta={fmt(best.theta)} sigma={fmt(best.sigma)}")
    return 0


def report_for(cfg, theta=None):
    """Library-level computation behind ``qwork report``."""
    theta = cfg.theta[0] if theta is None else theta
    exp = cfg.experiment()
    scheme = cfg.single_scheme()
    decomp = exp.decomposition(theta, scheme)
    return duality_report(decomp, pure_state(theta), cfg.tol_quadrature, provenance={
        "theta": theta, "omega0": cfg.omega0, "omega": cfg.omega, "t": cfg.t,
        "survived_coherence_factor": decomp.survived_coherence_factor})


def cmd_report(cfg):
    rep = report_for(cfg)
    text = json.dumps(rep.to_dict(), indent=1) + "\n"
    if cfg.out:
        Path(cfg.out).write_text(text)
        print(cfg.out)
    else:
        sys.stdout.write(text)
    return 0


# ---------------------------------------------------------------- verify

def _ode_unitary(sched, t):
    from scipy.integrate import solve_ivp

    d = sched.dim

    def rhs(tau, y):
        u = y[: d * d] + 1j * y[d * d:]
        du = (-1j * sched.at(tau) @ u.reshape(d, d)).ravel()
        return np.concatenate([du.real, du.imag])

    y0 = np.concatenate([np.eye(d).ravel(), np.zeros(d * d)])
    sol = solve_ivp(rhs, (0.0, t), y0, method="DOP853", rtol=1e-13, atol=1e-13)
    y = sol.y[:, -1]
    return (y[: d * d] + 1j * y[d * d:]).reshape(d, d)


def verification_checks(cfg):
    """Run the cross-checks; yields (name, passed, residual, detail)."""
    from . import oracle

    exp = cfg.experiment()
    prop = exp.propagation
    yield "propagator_unitarity", prop.unitarity_residual < 1e-9, prop.unitarity_residual, "||U^dag U - I||_F"
    if exp.t > 0:
        dev = float(np.linalg.norm(_ode_unitary(exp.sched, exp.t) - prop.unitary))
        yield "propagator_ode_agreement", dev < 1e-8, dev, "||U - U_ode||_F"

    theta = cfg.theta[0]
    sigma = 0.2 if cfg.sigma is None else cfg.sigma
    rho = pure_state(theta)
    dec = exp.decomposition(theta, MeasurementScheme.gaussian(sigma))
    grid = oracle.QuadratureGrid.covering(exp.e0, exp.et, sigma)
    lo, hi = support_window(dec.full)
    ws = np.linspace(lo, hi, 500)
    ref = oracle.marginal_work_density(rho, exp.e0, exp.et, exp.unitary, sigma, grid, ws)
    dev = float(np.max(np.abs(evaluate(dec.full, ws) - ref)))
    yield "oracle_agreement", dev < 1e-6, dev, f"sup |P_mixture - P_oracle| on 500 points, sigma={sigma}"

    try:
        chain = proof_chain_check(dec, delta_w=min(1e-3, sigma / 10))
        ok = chain.chain_residual >= -1e-9 and abs(chain.refinement[-1][2]) < 1e-6
        yield "proof_chain", ok, chain.refinement[-1][2], "finest-grid d_w_discrete - d_w"
    except (BoundViolation, ValueError) as exc:
        yield "proof_chain", False, float("nan"), str(exc)

    d_gap = abs(closed_form_predictability_2level(theta, exp.sched, exp.t, sigma, unitary=exp.unitary)
                - predictability(dec))
    yield "closed_form_predictability", d_gap < 1e-6, d_gap, "|D_W closed form - definition|"
    sig_grid = np.logspace(-2, 1, 5)
    try:
        res = resolve_eps_convention(exp, theta, sig_grid)
        yield "closed_form_effectiveness", True, res.max_deviation[res.winner], f"eps convention {res.winner}"
    except ValueError as exc:
        yield "closed_form_effectiveness", False, float("nan"), str(exc)

    worst = math.inf
    try:
        for row in run_scan(exp, cfg.theta, cfg.sigmas(), cfg.tol_quadrature, worker_count(cfg)):
            worst = min(worst, row.bound_residual)
        yield "duality_bound", worst >= -1e-9, worst, "min of 1 - d_w^2 - v_w^2 over the sweep"
    except BoundViolation as exc:
        yield "duality_bound", False, float("nan"), str(exc)

    factors = [exp.decomposition(theta, MeasurementScheme.gaussian(s)).survived_coherence_factor
               for s in cfg.sigmas()]
    if exp.sched.omega0 == 0:
        dev = max(abs(f - 1.0) for f in factors)
        yield "survived_coherence", dev == 0.0, dev, "degenerate levels keep all coherence"
    else:
        yield "survived_coherence", factors[0] < 1e-6, factors[0], "coherence destroyed at smallest sigma"


def cmd_verify(cfg):
    results = []
    for name, ok, residual, detail in verification_checks(cfg):
        results.append({"check": name, "passed": bool(ok), "residual": float(residual), "detail": detail})
        print(f"{'PASS' if ok else 'FAIL'}  {name:28s} residual={residual:.3e}  {detail}")
    failed = [r["check"] for r in results if not r["passed"]]
    if cfg.out:
        Path(cfg.out).write_text(json.dumps(results, indent=1) + "\n")
    if failed:
        print(f"FAILED: {', '.join(failed)}")
        return 1
    print("all checks passed")
    return 0


# ---------------------------------------------------------------- argument parsing

_ANGLE = re.compile(r"^(?:(?P<num>[0-9.eE+-]+)\s*\*?\s*)?pi(?:\s*/\s*(?P<den>[0-9.eE+-]+))?$")


def parse_angle(text):
    text = text.strip()
    m = _ANGLE.match(text)
    try:
        if m:
            num = float(m.group("num") or 1.0)
            den = float(m.group("den") or 1.0)
            return num * math.pi / den
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot parse angle {text!r}") from None


def _theta_list(text):
    return [parse_angle(part) for part in text.split(",")]


def build_parser():
    p = argparse.ArgumentParser(prog="qwork", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with RunConfig fields; flags override it")
    common.add_argument("--omega0", type=float)
    common.add_argument("--omega", type=float)
    common.add_argument("--t", type=float)
    common.add_argument("--theta", type=_theta_list,
                        help="angle(s) in radians, comma separated; 'pi/8' style allowed")
    common.add_argument("--sigma", type=float)
    common.add_argument("--sigma-min", type=float)
    common.add_argument("--sigma-max", type=float)
    common.add_argument("--sigma-points", type=int)
    common.add_argument("--scheme", choices=["gaussian", "projective"])
    common.add_argument("--out")
    common.add_argument("--format", choices=["csv", "json"])
    common.add_argument("--tol-propagator", type=float)
    common.add_argument("--tol-quadrature", type=float)
    common.add_argument("--workers", type=int, help="worker processes (capped by QWORK_THREADS)")
    sub = p.add_subparsers(dest="command", required=True)
    f = sub.add_parser("fig1", parents=[common], help="D_W, V_W sweeps over sigma, one file per theta")
    f.add_argument("--figure", action="store_true", default=None, help="also render fig1.png")
    sub.add_parser("report", parents=[common], help="duality report JSON for one (theta, sigma)")
    sub.add_parser("verify", parents=[common], help="oracle, closed-form and bound cross-checks")
    sub.add_parser("scan", parents=[common], help="theta x sigma table and argmax of d_w + v_w")
    return p


def config_from_args(args):
    cfg = load_config(args.config) if args.config else RunConfig()
    for f_ in fields(RunConfig):
        val = getattr(args, f_.name, None)
        if val is not None:
            setattr(cfg, f_.name, val)
    if args.sigma_min is not None or args.sigma_max is not None or args.sigma_points is not None:
        cfg.sigma_grid = None
    return cfg.validate()


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        handler = {"fig1": cmd_fig1, "report": cmd_report, "verify": cmd_verify, "scan": cmd_scan}
        return handler[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except BoundViolation as exc:
        print(f"bound violation: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
