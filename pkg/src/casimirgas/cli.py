"""Command-line front end: configuration, experiment orchestration, and
report emission.

Every command writes a JSON report (plus CSV time series where relevant)
into the output directory and exits nonzero when its checks fail.  Reports
embed the effective configuration and the package version, and identical
configurations produce byte-identical reports.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from .errors import CasimirGasError, ConfigError
from .grid import SCHEMES, Grid, field_to_csv, field_to_json
from .integrator import cfl_dt, evolve, monitors_to_csv
from .models import (
    BornInfeld,
    Chaplygin,
    ModelParams,
    equilibrium_values,
    named_equilibrium,
)
from .reporting import dumps_json
from .solutions import borninfeld_solution, chaplygin_solution, oracle_values, residual, sample
from .stability import (
    VERDICT_CONSISTENT,
    borninfeld_reduced_closed_form,
    chaplygin_reduced_closed_form,
    check_equilibrium,
    first_variation_report,
    reduced_first_variation,
    sample_manifold_state,
    sample_off_manifold_state,
    stability_sweep_report,
    verify_convexity_estimates,
)

EQUILIBRIUM_TOL = 1e-10
FIRST_VARIATION_TOL = 1e-12
SOLUTION_RESIDUAL_TOL = 1e-10
ORACLE_REL_TOL = 1e-12
RK4_RATIO_BAND = (12.8, 19.2)  # 16 within 20 percent


@dataclass
class RunConfig:
    """Effective configuration of one command invocation."""

    model: str = "chaplygin"
    lam: float = 0.5
    a: float = 1.0
    c: float = 1.0
    n: int = 128
    scheme: str = "spectral"
    dt: float | None = None
    cfl_fraction: float = 0.5
    T: float = 10.0
    seed: int = 42
    amplitudes: tuple = (1e-3, 1e-2, 1e-1)
    samples: int = 100
    amplitude: float | None = None
    modes: int = 4
    snapshot_every: int = 10
    out: str = "out"
    format: str = "csv"
    off_manifold: bool = False
    bound: float = 10.0

    _KEYMAP = {"lam": "lambda", "bound": "K"}

    def validate(self):
        if self.model not in ("chaplygin", "born-infeld"):
            raise ConfigError(f"model: expected 'chaplygin' or 'born-infeld', got {self.model!r}")
        if not self.lam > 0:
            raise ConfigError(f"lambda: must be positive, got {self.lam}")
        if not self.a > 0:
            raise ConfigError(f"a: must be positive, got {self.a}")
        if not self.c > 0:
            raise ConfigError(f"c: must be positive, got {self.c}")
        if self.n < 8 or self.n % 2:
            raise ConfigError(f"n: must be even and at least 8, got {self.n}")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme: expected one of {SCHEMES}, got {self.scheme!r}")
        if self.dt is not None and not self.dt > 0:
            raise ConfigError(f"dt: must be positive, got {self.dt}")
        if not self.cfl_fraction > 0:
            raise ConfigError(f"cfl_fraction: must be positive, got {self.cfl_fraction}")
        if not self.T > 0:
            raise ConfigError(f"T: must be positive, got {self.T}")
        if self.seed < 0:
            raise ConfigError(f"seed: must be nonnegative, got {self.seed}")
        if any(a < 0 for a in self.amplitudes):
            raise ConfigError(f"amplitudes: must be nonnegative, got {list(self.amplitudes)}")
        if self.samples < 1:
            raise ConfigError(f"samples: must be at least 1, got {self.samples}")
        if self.amplitude is not None and not 0.0 <= self.amplitude < 1.0:
            raise ConfigError(f"amplitude: must lie in [0, 1), got {self.amplitude}")
        if not 1 <= self.modes < self.n // 3:
            raise ConfigError(f"modes: must lie in [1, n/3), got {self.modes}")
        if self.snapshot_every < 1:
            raise ConfigError(f"snapshot_every: must be at least 1, got {self.snapshot_every}")
        if self.format not in ("csv", "json", "both"):
            raise ConfigError(f"format: expected csv, json, or both, got {self.format!r}")
        if not self.bound > 0:
            raise ConfigError(f"K: must be positive, got {self.bound}")

    def to_dict(self) -> dict:
        d = {}
        for f in fields(self):
            key = self._KEYMAP.get(f.name, f.name)
            val = getattr(self, f.name)
            d[key] = list(val) if isinstance(val, tuple) else val
        return d

    def model_params(self) -> ModelParams:
        if self.model == "chaplygin":
            return Chaplygin(lam=self.lam)
        return BornInfeld(a=self.a, c=self.c)


COMMANDS = ("simulate", "check-equilibrium", "first-variation",
            "verify-inequalities", "stability-sweep", "verify-solution",
            "convergence")


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override its values")
    common.add_argument("--model", choices=["chaplygin", "born-infeld"])
    common.add_argument("--lambda", dest="lam", type=float,
                        help="Chaplygin pressure constant (positive)")
    common.add_argument("--a", type=float, help="Born-Infeld interaction strength")
    common.add_argument("--c", type=float, help="Born-Infeld light speed")
    common.add_argument("--n", type=int, help="grid points (even, >= 8)")
    common.add_argument("--scheme", choices=list(SCHEMES))
    common.add_argument("--dt", type=float, help="explicit time step")
    common.add_argument("--cfl-fraction", dest="cfl_fraction", type=float,
                        help="dt as a fraction of the CFL estimate")
    common.add_argument("--T", type=float, help="final time")
    common.add_argument("--seed", type=int)
    common.add_argument("--amplitudes", type=str,
                        help="comma-separated perturbation amplitudes")
    common.add_argument("--samples", type=int, help="inequality sample count")
    common.add_argument("--amplitude", type=float, help="sampling amplitude")
    common.add_argument("--modes", type=int, help="random perturbation modes")
    common.add_argument("--snapshot-every", dest="snapshot_every", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("--format", choices=["csv", "json", "both"],
                        help="field snapshot format")
    common.add_argument("--off-manifold", dest="off_manifold",
                        action="store_const", const=True,
                        help="add exploratory off-constraint perturbations")
    common.add_argument("--K", dest="bound", type=float,
                        help="amplification bound for the stability verdict")

    parser = argparse.ArgumentParser(
        prog="casimir-gas",
        description="Simulate the Chaplygin and Born-Infeld gas models and "
                    "verify their energy-Casimir stability analysis numerically.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "simulate": "evolve initial data and write monitor/field time series",
        "check-equilibrium": "tendency residual at the distinguished equilibrium",
        "first-variation": "first variation of energy plus Casimir at the equilibrium",
        "verify-inequalities": "sample the quadratic-form convexity estimates",
        "stability-sweep": "perturbation experiments across amplitudes",
        "verify-solution": "residual and functional oracles of the exact solution",
        "convergence": "time-step order and spatial resolution checks",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def _load_config_file(path: str) -> dict:
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as e:
        raise ConfigError(f"config: cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config: {path} is not valid JSON: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigError(f"config: {path} must hold a JSON object")
    known = {RunConfig._KEYMAP.get(f.name, f.name): f.name for f in fields(RunConfig)}
    out = {}
    for key, val in raw.items():
        if key not in known:
            raise ConfigError(f"config: unknown key {key!r} in {path}")
        out[known[key]] = val
    return out


def _parse_amplitudes(value) -> tuple:
    if isinstance(value, str):
        parts = [p for p in value.split(",") if p.strip()]
        try:
            return tuple(float(p) for p in parts)
        except ValueError as e:
            raise ConfigError(f"amplitudes: {e}") from e
    try:
        return tuple(float(v) for v in value)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"amplitudes: expected a list of numbers, got {value!r}") from e


def parse_config(argv=None) -> tuple[str, RunConfig]:
    """Parse flags and the optional config file; flags take precedence."""
    ns = _build_parser().parse_args(argv)
    file_vals = _load_config_file(ns.config) if ns.config else {}
    cfg = RunConfig()
    for f in fields(RunConfig):
        flag = getattr(ns, f.name, None)
        if flag is None and f.name in file_vals:
            flag = file_vals[f.name]
        if flag is None:
            continue
        if f.name == "amplitudes":
            flag = _parse_amplitudes(flag)
        try:
            cfg = replace(cfg, **{f.name: flag})
        except TypeError as e:
            raise ConfigError(f"{f.name}: {e}") from e
    cfg.validate()
    return ns.command, cfg


# ---------------------------------------------------------------------------
# command implementations
# ---------------------------------------------------------------------------

def _outdir(cfg: RunConfig) -> Path:
    path = Path(cfg.out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_report(cmd: str, cfg: RunConfig, payload: dict) -> dict:
    report = {"command": cmd, "version": __version__, "config": cfg.to_dict()}
    report.update(payload)
    (_outdir(cfg) / "report.json").write_text(dumps_json(report))
    return report


def _exact_solution(cfg: RunConfig):
    if cfg.model == "chaplygin":
        return chaplygin_solution(cfg.lam)
    if (cfg.a, cfg.c) != (1.0, 1.0):
        raise ConfigError("a/c: the born-infeld exact solution requires a = c = 1")
    return borninfeld_solution()


def _cmd_simulate(cfg: RunConfig) -> int:
    m = cfg.model_params()
    grid = Grid(cfg.n)
    if cfg.amplitude:
        if cfg.off_manifold:
            s0 = sample_off_manifold_state(cfg.seed, cfg.amplitude, m, grid, cfg.modes)
            initial = "perturbed-off-manifold"
        else:
            p_e, _ = equilibrium_values(m)
            s0 = sample_manifold_state(cfg.seed, cfg.amplitude, m.kappa, cfg.modes,
                                       grid, p_center=p_e)
            initial = "perturbed-on-manifold"
        reference = named_equilibrium(m, grid)
    else:
        s0 = sample(_exact_solution(cfg), 0.0, grid)
        initial = "exact-solution"
        reference = s0
    dt = cfg.dt if cfg.dt is not None else cfg.cfl_fraction * cfl_dt(s0, m)
    traj = evolve(s0, cfg.T, dt, m, snapshot_every=cfg.snapshot_every,
                  scheme=cfg.scheme, reference=reference)
    out = _outdir(cfg)
    (out / "monitors.csv").write_text(monitors_to_csv(traj))
    for i, st in enumerate(traj.states):
        stem = f"fields_t{i:04d}"
        if cfg.format in ("csv", "both"):
            lines = ["x,p,rho"]
            lines += [f"{x:.17g},{pv:.17g},{rv:.17g}"
                      for x, pv, rv in zip(grid.x, st.p.values, st.rho.values)]
            (out / f"{stem}.csv").write_text("\n".join(lines) + "\n")
        if cfg.format in ("json", "both"):
            body = (f'{{"t": {st.time:.17g}, "p": {field_to_json(st.p)}, '
                    f'"rho": {field_to_json(st.rho)}}}\n')
            (out / f"{stem}.json").write_text(body)
    h = traj.monitors["H"]
    c = traj.monitors["C"]
    _write_report("simulate", cfg, {
        "initial": initial,
        "dt": dt,
        "n_snapshots": len(traj.states),
        "H0": float(h[0]),
        "C0": float(c[0]),
        "H_drift": float(np.max(np.abs(h - h[0])) / max(abs(h[0]), 1e-300)),
        "C_drift": float(np.max(np.abs(c - c[0])) / max(abs(c[0]), 1e-300)),
        "constraint_residual_max": float(traj.monitors["constraint_residual"].max()),
        "aliasing_flagged": traj.aliasing_flagged,
        "aliasing_first_time": traj.aliasing_first_time,
    })
    return 0


def _cmd_check_equilibrium(cfg: RunConfig) -> int:
    m = cfg.model_params()
    grid = Grid(cfg.n)
    res = check_equilibrium(named_equilibrium(m, grid), m, cfg.scheme)
    passed = res < EQUILIBRIUM_TOL
    _write_report("check-equilibrium", cfg, {
        "equilibrium": list(equilibrium_values(m)),
        "residual": res,
        "tolerance": EQUILIBRIUM_TOL,
        "passed": passed,
    })
    return 0 if passed else 1


def _cmd_first_variation(cfg: RunConfig) -> int:
    m = cfg.model_params()
    grid = Grid(cfg.n)
    u_e = named_equilibrium(m, grid)
    value = first_variation_report(m, cfg.n)
    reduced = reduced_first_variation(m, u_e).values
    if cfg.model == "chaplygin":
        closed = chaplygin_reduced_closed_form(u_e.p.values, cfg.lam)
    else:
        closed = borninfeld_reduced_closed_form(u_e.rho.values)
    pointwise = float(np.max(np.abs(reduced - closed)))
    passed = value < FIRST_VARIATION_TOL and pointwise < FIRST_VARIATION_TOL
    _write_report("first-variation", cfg, {
        "first_variation_norm": value,
        "reduced_integrand_max_deviation": pointwise,
        "tolerance": FIRST_VARIATION_TOL,
        "passed": passed,
    })
    return 0 if passed else 1


def _cmd_verify_inequalities(cfg: RunConfig) -> int:
    m = cfg.model_params()
    stats = verify_convexity_estimates(
        m, cfg.samples, cfg.amplitude if cfg.amplitude is not None else 0.2,
        cfg.seed, cfg.n, cfg.modes)
    _write_report("verify-inequalities", cfg, stats.to_dict())
    return 0 if stats.n_violations == 0 else 1


def _cmd_stability_sweep(cfg: RunConfig) -> int:
    m = cfg.model_params()
    report = stability_sweep_report(
        m, cfg.amplitudes, cfg.T, cfg.seed,
        include_off_manifold=cfg.off_manifold,
        n=cfg.n, n_modes=cfg.modes, scheme=cfg.scheme,
        amplification_bound=cfg.bound, cfl_fraction=cfg.cfl_fraction,
        snapshot_every=cfg.snapshot_every, n_inequality_samples=cfg.samples,
        inequality_amplitude=cfg.amplitude if cfg.amplitude is not None else 0.2)
    _write_report("stability-sweep", cfg, report.to_dict())
    (_outdir(cfg) / "summary.txt").write_text(report.summary())
    print(report.summary(), end="")
    return 0 if report.verdict == VERDICT_CONSISTENT else 1


def _cmd_verify_solution(cfg: RunConfig) -> int:
    m = cfg.model_params()
    sol = _exact_solution(cfg)
    grid = Grid(cfg.n)
    res = residual(sol, grid, cfg.scheme)
    oracle = oracle_values(sol)
    from .functionals import evaluate
    from .models import casimir_density, hamiltonian_density
    st = sample(sol, 0.0, grid)
    h_num = evaluate(hamiltonian_density(m), st)
    c_num = evaluate(casimir_density(m), st)
    h_err = abs(h_num - oracle["H"]) / abs(oracle["H"])
    c_err = abs(c_num - oracle["C"]) / abs(oracle["C"])
    passed = (res < SOLUTION_RESIDUAL_TOL and h_err < ORACLE_REL_TOL
              and c_err < ORACLE_REL_TOL)
    _write_report("verify-solution", cfg, {
        "residual": res,
        "residual_tolerance": SOLUTION_RESIDUAL_TOL,
        "oracle": oracle,
        "H_numeric": h_num,
        "C_numeric": c_num,
        "H_rel_error": h_err,
        "C_rel_error": c_err,
        "oracle_rel_tolerance": ORACLE_REL_TOL,
        "passed": passed,
    })
    return 0 if passed else 1


def _cmd_convergence(cfg: RunConfig) -> int:
    m = cfg.model_params()
    grid = Grid(cfg.n)
    s0 = sample_off_manifold_state(cfg.seed, 0.3, m, grid, cfg.modes)
    dt0 = cfg.dt if cfg.dt is not None else 0.5 * cfl_dt(s0, m)
    T = min(cfg.T, 1.0)

    def final_state(dt):
        traj = evolve(s0, T, dt, m, snapshot_every=10**9, scheme=cfg.scheme)
        return traj.states[-1]

    ref = final_state(dt0 / 16.0)

    def err(dt):
        st = final_state(dt)
        return float(max(np.max(np.abs(st.p.values - ref.p.values)),
                         np.max(np.abs(st.rho.values - ref.rho.values))))

    e_coarse = err(dt0)
    e_fine = err(dt0 / 2.0)
    ratio = e_coarse / e_fine if e_fine > 0 else float("inf")
    spatial = residual(_exact_solution(cfg), grid, cfg.scheme)
    ok_ratio = RK4_RATIO_BAND[0] <= ratio <= RK4_RATIO_BAND[1]
    ok_spatial = spatial < SOLUTION_RESIDUAL_TOL
    _write_report("convergence", cfg, {
        "dt": dt0,
        "T": T,
        "error_coarse": e_coarse,
        "error_fine": e_fine,
        "rk4_ratio": ratio,
        "rk4_ratio_band": list(RK4_RATIO_BAND),
        "spatial_residual": spatial,
        "spatial_tolerance": SOLUTION_RESIDUAL_TOL,
        "passed": ok_ratio and ok_spatial,
    })
    return 0 if ok_ratio and ok_spatial else 1


_DISPATCH = {
    "simulate": _cmd_simulate,
    "check-equilibrium": _cmd_check_equilibrium,
    "first-variation": _cmd_first_variation,
    "verify-inequalities": _cmd_verify_inequalities,
    "stability-sweep": _cmd_stability_sweep,
    "verify-solution": _cmd_verify_solution,
    "convergence": _cmd_convergence,
}


def run_command(cmd: str, cfg: RunConfig) -> int:
    """Execute one subcommand; returns the process exit status."""
    return _DISPATCH[cmd](cfg)


def main(argv=None) -> int:
    try:
        cmd, cfg = parse_config(argv)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    try:
        return run_command(cmd, cfg)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except CasimirGasError as e:
        payload = {"error": {"type": type(e).__name__, "message": str(e)},
                   "version": __version__, "config": cfg.to_dict()}
        try:
            (_outdir(cfg) / "error.json").write_text(dumps_json(payload))
        except OSError:
            pass
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
