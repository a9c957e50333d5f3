"""Configuration-driven command line: run, compare, project, oracle.

Config files are flat `section.key = value` text (blank lines and # comments
ignored). Unknown keys are rejected by name; kind-dependent defaults (grid
bounds, time step, replica count) are resolved at load and the fully-resolved
config is echoed next to every run's outputs. All numeric CSV output uses
repr() so files round-trip bit-exactly.
"""

from __future__ import annotations

import argparse
import sys
import time as _time
from dataclasses import dataclass, fields as dc_fields
from pathlib import Path

import numpy as np

from . import helmholtz, langevin, oracle
from .diagnostics import realization_variance
from .fields import (
    Grid2,
    VectorField2,
    read_vector_field,
    read_weight_field,
    write_scalar_field,
    write_vector_field,
)
from .langevin import RunRecord, RunSetup, ToyModel, TrimerModel
from .potentials import PairPotentialParams, ToyPotential


class ConfigError(ValueError):
    """Invalid or unknown configuration content."""


_D1_DEFAULT = 2.0 ** (1.0 / 6.0)

# key -> (type, default); None defaults are resolved per system kind
_SCHEMA: dict[str, tuple[type, object]] = {
    "system.kind": (str, "trimer"),
    "system.beta": (float, 1.0),
    "system.n_particles": (int, 100),
    "system.box_length": (float, 15.0),
    "potential.sigma": (float, 1.0),
    "potential.epsilon": (float, 1.0),
    "potential.sigma_prime": (float, 1.0),
    "potential.epsilon_prime": (float, 0.1),
    "potential.d1": (float, _D1_DEFAULT),
    "potential.omega": (float, 2.0),
    "potential.h": (float, 2.0),
    "potential.k_theta": (float, 1.0),
    "potential.cos_theta0": (float, 1.0 / 3.0),
    "potential.barrier": (float, 1.5),
    "potential.transverse": (float, 0.75),
    "potential.axial_well": (float, None),
    "potential.coupling": (float, None),
    "langevin.dt": (float, None),
    "langevin.total_time": (float, None),
    "langevin.n_replicas": (int, None),
    "langevin.seed": (int, 1),
    "langevin.mode": (str, "pabf"),
    "grid.xi_min": (float, None),
    "grid.xi_max": (float, None),
    "grid.n_bins": (int, None),
    "projection.stride": (int, 10),
    "projection.weighted": (bool, False),
    "projection.solver": (str, "direct"),
    "projection.tolerance": (float, 1e-12),
    "diagnostics.every": (float, None),
    "diagnostics.distance_stride": (int, 10),
    "diagnostics.reference": (str, ""),
    "output.directory": (str, ""),
}

_KIND_DEFAULTS = {
    "trimer": {
        "langevin.dt": 2.5e-4,
        "langevin.total_time": 20.0,
        "langevin.n_replicas": 100,
        "grid.xi_min": -0.2,
        "grid.xi_max": 1.2,
        "grid.n_bins": 50,
        "potential.axial_well": 0.0,
        "potential.coupling": 0.0,
        "diagnostics.every": 1.0,
    },
    "toy_a": {
        "langevin.dt": 5e-4,
        "langevin.total_time": 10.0,
        "langevin.n_replicas": 32,
        "grid.xi_min": 0.0,
        "grid.xi_max": 1.0,
        "grid.n_bins": 32,
        "potential.axial_well": 0.0,
        "potential.coupling": 0.0,
        "diagnostics.every": 1.0,
    },
    "toy_b": {
        "langevin.dt": 5e-4,
        "langevin.total_time": 10.0,
        "langevin.n_replicas": 32,
        "grid.xi_min": 0.0,
        "grid.xi_max": 1.0,
        "grid.n_bins": 32,
        "potential.axial_well": 1.0,
        "potential.coupling": 1.0,
        "diagnostics.every": 1.0,
    },
}


@dataclass
class SystemConfig:
    """Fully-resolved run configuration (one attribute per config key)."""

    kind: str
    beta: float
    n_particles: int
    box_length: float
    sigma: float
    epsilon: float
    sigma_prime: float
    epsilon_prime: float
    d1: float
    omega: float
    h: float
    k_theta: float
    cos_theta0: float
    barrier: float
    transverse: float
    axial_well: float
    coupling: float
    dt: float
    total_time: float
    n_replicas: int
    seed: int
    mode: str
    xi_min: float
    xi_max: float
    n_bins: int
    stride: int
    weighted: bool
    solver: str
    tolerance: float
    diag_every: float
    distance_stride: int
    reference: str
    out_dir: str

    def validate(self) -> None:
        if self.kind not in ("trimer", "toy_a", "toy_b"):
            raise ConfigError(f"system.kind must be trimer, toy_a or toy_b, got {self.kind!r}")
        if self.mode not in langevin.BIAS_MODES:
            raise ConfigError(f"langevin.mode must be one of {langevin.BIAS_MODES}, got {self.mode!r}")
        if self.solver not in ("direct", "cg"):
            raise ConfigError(f"projection.solver must be direct or cg, got {self.solver!r}")
        for name in ("beta", "dt", "box_length"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.total_time < 0:
            raise ConfigError("langevin.total_time must be >= 0")
        if self.n_replicas < 1:
            raise ConfigError("langevin.n_replicas must be >= 1")
        if self.kind == "trimer":
            if self.n_particles < 3:
                raise ConfigError("system.n_particles must be >= 3 for the trimer")
            if self.weighted:
                raise ConfigError("projection.weighted requires a periodic (toy) system")
        if self.xi_max <= self.xi_min:
            raise ConfigError("grid.xi_max must exceed grid.xi_min")
        if self.n_bins < 2:
            raise ConfigError("grid.n_bins must be >= 2")

    # -- construction of runtime objects -----------------------------------

    def grid(self) -> Grid2:
        return Grid2(self.xi_min, self.xi_max, self.n_bins)

    def trimer_params(self) -> PairPotentialParams:
        return PairPotentialParams(
            sigma=self.sigma,
            epsilon=self.epsilon,
            sigma_prime=self.sigma_prime,
            epsilon_prime=self.epsilon_prime,
            d0=2.0 ** (1.0 / 6.0) * self.sigma,
            d1=self.d1,
            omega=self.omega,
            h=self.h,
            k_theta=self.k_theta,
            cos_theta0=self.cos_theta0,
        )

    def toy_potential(self) -> ToyPotential:
        n = 2 if self.kind == "toy_a" else 3
        return ToyPotential(n, self.barrier, self.transverse, self.axial_well, self.coupling)

    def model(self):
        if self.kind == "trimer":
            return TrimerModel(self.trimer_params(), self.n_particles, self.box_length)
        return ToyModel(self.toy_potential())

    def toy_system(self) -> oracle.ToySystem:
        if self.kind == "trimer":
            raise ConfigError("no quadrature oracle for the trimer system")
        return oracle.ToySystem(self.toy_potential(), self.beta)

    def setup(self, reference: VectorField2 | None = None) -> RunSetup:
        n_steps = round(self.total_time / self.dt)
        diag_stride = max(1, round(self.diag_every / self.dt)) if self.diag_every > 0 else 0
        return RunSetup(
            model=self.model(),
            grid=self.grid(),
            mode=self.mode,
            beta=self.beta,
            dt=self.dt,
            n_steps=n_steps,
            n_replicas=self.n_replicas,
            seed=self.seed,
            projection_stride=self.stride,
            weighted=self.weighted,
            solver=self.solver,
            solver_tol=self.tolerance,
            diag_stride=diag_stride,
            distance_stride=self.distance_stride,
            reference=reference,
        )

    def echo(self) -> str:
        """Resolved config as parseable key = value lines."""
        pairs = [
            ("system.kind", self.kind),
            ("system.beta", self.beta),
            ("system.n_particles", self.n_particles),
            ("system.box_length", self.box_length),
            ("potential.sigma", self.sigma),
            ("potential.epsilon", self.epsilon),
            ("potential.sigma_prime", self.sigma_prime),
            ("potential.epsilon_prime", self.epsilon_prime),
            ("potential.d1", self.d1),
            ("potential.omega", self.omega),
            ("potential.h", self.h),
            ("potential.k_theta", self.k_theta),
            ("potential.cos_theta0", self.cos_theta0),
            ("potential.barrier", self.barrier),
            ("potential.transverse", self.transverse),
            ("potential.axial_well", self.axial_well),
            ("potential.coupling", self.coupling),
            ("langevin.dt", self.dt),
            ("langevin.total_time", self.total_time),
            ("langevin.n_replicas", self.n_replicas),
            ("langevin.seed", self.seed),
            ("langevin.mode", self.mode),
            ("grid.xi_min", self.xi_min),
            ("grid.xi_max", self.xi_max),
            ("grid.n_bins", self.n_bins),
            ("projection.stride", self.stride),
            ("projection.weighted", self.weighted),
            ("projection.solver", self.solver),
            ("projection.tolerance", self.tolerance),
            ("diagnostics.every", self.diag_every),
            ("diagnostics.distance_stride", self.distance_stride),
            ("diagnostics.reference", self.reference),
            ("output.directory", self.out_dir),
        ]
        out = []
        for key, val in pairs:
            if isinstance(val, bool):
                val = "true" if val else "false"
            elif isinstance(val, float):
                val = repr(val)
            out.append(f"{key} = {val}")
        return "\n".join(out) + "\n"


def parse_config_text(text: str, path: str = "<config>") -> SystemConfig:
    raw: dict[str, object] = {}
    for ln, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{ln}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _SCHEMA:
            raise ConfigError(f"{path}:{ln}: unknown key {key!r}")
        typ, _ = _SCHEMA[key]
        try:
            if typ is bool:
                if value.lower() not in ("true", "false"):
                    raise ValueError
                raw[key] = value.lower() == "true"
            else:
                raw[key] = typ(value)
        except ValueError:
            raise ConfigError(f"{path}:{ln}: key {key!r} expects a {typ.__name__}, got {value!r}") from None

    kind = raw.get("system.kind", _SCHEMA["system.kind"][1])
    if kind not in _KIND_DEFAULTS:
        raise ConfigError(f"{path}: system.kind must be trimer, toy_a or toy_b, got {kind!r}")
    resolved = {}
    for key, (_, default) in _SCHEMA.items():
        if key in raw:
            resolved[key] = raw[key]
        elif default is None or key in _KIND_DEFAULTS[kind]:
            resolved[key] = _KIND_DEFAULTS[kind].get(key, default)
        else:
            resolved[key] = default

    cfg = SystemConfig(
        kind=resolved["system.kind"],
        beta=resolved["system.beta"],
        n_particles=resolved["system.n_particles"],
        box_length=resolved["system.box_length"],
        sigma=resolved["potential.sigma"],
        epsilon=resolved["potential.epsilon"],
        sigma_prime=resolved["potential.sigma_prime"],
        epsilon_prime=resolved["potential.epsilon_prime"],
        d1=resolved["potential.d1"],
        omega=resolved["potential.omega"],
        h=resolved["potential.h"],
        k_theta=resolved["potential.k_theta"],
        cos_theta0=resolved["potential.cos_theta0"],
        barrier=resolved["potential.barrier"],
        transverse=resolved["potential.transverse"],
        axial_well=resolved["potential.axial_well"],
        coupling=resolved["potential.coupling"],
        dt=resolved["langevin.dt"],
        total_time=resolved["langevin.total_time"],
        n_replicas=resolved["langevin.n_replicas"],
        seed=resolved["langevin.seed"],
        mode=resolved["langevin.mode"],
        xi_min=resolved["grid.xi_min"],
        xi_max=resolved["grid.xi_max"],
        n_bins=resolved["grid.n_bins"],
        stride=resolved["projection.stride"],
        weighted=resolved["projection.weighted"],
        solver=resolved["projection.solver"],
        tolerance=resolved["projection.tolerance"],
        diag_every=resolved["diagnostics.every"],
        distance_stride=resolved["diagnostics.distance_stride"],
        reference=resolved["diagnostics.reference"],
        out_dir=resolved["output.directory"],
    )
    cfg.validate()
    return cfg


def parse_config(path) -> SystemConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text, str(path))


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _diag_header() -> str:
    return "time,l2_error,var_F,var_gradA,trans_bond1,trans_bond2\n"


def _diag_line(row) -> str:
    return (
        f"{_fmt(row.time)},{_fmt(row.l2_error)},{_fmt(row.var_f)},{_fmt(row.var_grad_a)},"
        f"{row.transitions[0]},{row.transitions[1]}\n"
    )


def _write_marginals(path, row) -> None:
    with open(path, "w") as fh:
        fh.write("bin,marginal1,marginal2\n")
        for b, (m1, m2) in enumerate(zip(row.marginal1, row.marginal2)):
            fh.write(f"{b},{float(m1)!r},{float(m2)!r}\n")


def _write_distances(path, distances) -> None:
    t, r1, r2 = distances
    with open(path, "w") as fh:
        fh.write("time,dist_q0q1,dist_q1q2\n")
        for k in range(len(t)):
            fh.write(f"{float(t[k])!r},{float(r1[k])!r},{float(r2[k])!r}\n")


def _auto_reference(cfg: SystemConfig) -> VectorField2 | None:
    if cfg.reference:
        return read_vector_field(cfg.reference)
    if cfg.kind != "trimer":
        return oracle.reference_mean_force(cfg.toy_system(), cfg.grid(), n_quad=512)
    return None


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_run(cfg: SystemConfig, out_dir: Path) -> int:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config_echo.cfg").write_text(cfg.echo())
    reference = _auto_reference(cfg)
    setup = cfg.setup(reference)

    t0 = _time.perf_counter()
    last: RunRecord | None = None
    with open(out_dir / "diagnostics.csv", "w") as diag:
        diag.write(_diag_header())
        for rec in langevin.run(setup):
            diag.write(_diag_line(rec.diagnostics))
            tag = f"{rec.step:09d}"
            _write_marginals(out_dir / f"marginals_{tag}.csv", rec.diagnostics)
            write_vector_field(out_dir / f"mean_force_{tag}.csv", rec.mean_force)
            if rec.free_energy is not None:
                write_scalar_field(out_dir / f"free_energy_{tag}.csv", rec.free_energy)
            last = rec
    if last.distances is not None:
        _write_distances(out_dir / "distances.csv", last.distances)
    wall = _time.perf_counter() - t0

    final_err = last.diagnostics.l2_error
    err_text = f"{final_err:.4f}" if final_err is not None else "n/a"
    print(
        f"run complete: {setup.n_steps} steps x {setup.n_replicas} replicas "
        f"(mode {cfg.mode}), wall {wall:.1f} s, final error {err_text}"
    )
    print(f"outputs in {out_dir}")
    return 0


def cmd_compare(cfg: SystemConfig, out_dir: Path, realizations: int, modes: list[str]) -> int:
    if realizations < 2:
        raise ConfigError("--realizations must be >= 2")
    for mode in modes:
        if mode not in ("abf", "pabf"):
            raise ConfigError(f"compare supports modes abf and pabf, got {mode!r}")
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config_echo.cfg").write_text(cfg.echo())
    reference = _auto_reference(cfg)

    # bias-field snapshots per mode, per realization, per diagnostic time
    times: list[float] | None = None
    bias_fields: dict[str, list[list[np.ndarray]]] = {}
    errors: dict[str, list[list[float]]] = {}
    for mode in modes:
        bias_fields[mode] = []
        errors[mode] = []
        for k in range(realizations):
            run_cfg = _replace(cfg, mode=mode, seed=cfg.seed + k)
            setup = run_cfg.setup(reference)
            t_list, f_list, e_list = [], [], []
            for rec in langevin.run(setup):
                t_list.append(rec.time)
                f_list.append(rec.bias.values.copy())
                e_list.append(rec.diagnostics.l2_error)
            if times is None:
                times = t_list
            elif len(times) != len(t_list):
                raise RuntimeError("realizations produced mismatched diagnostic schedules")
            bias_fields[mode].append(f_list)
            errors[mode].append(e_list)

    with open(out_dir / "comparison.csv", "w") as fh:
        headers = ["time", "var_F", "var_gradA"] + [f"err_{m}" for m in modes]
        fh.write(",".join(headers) + "\n")
        for idx, t in enumerate(times):
            var_f = var_ga = None
            if "abf" in modes:
                stack = np.stack([bias_fields["abf"][k][idx] for k in range(realizations)])
                _, var_f = realization_variance(stack)
            if "pabf" in modes:
                stack = np.stack([bias_fields["pabf"][k][idx] for k in range(realizations)])
                _, var_ga = realization_variance(stack)
            cells = [_fmt(t), _fmt(var_f), _fmt(var_ga)]
            for m in modes:
                errs = [errors[m][k][idx] for k in range(realizations)]
                cells.append(_fmt(float(np.mean(errs))) if errs[0] is not None else "")
            fh.write(",".join(cells) + "\n")
    print(f"comparison table ({realizations} realizations x modes {modes}) in {out_dir}")
    return 0


def _replace(cfg: SystemConfig, **kw) -> SystemConfig:
    values = {f.name: getattr(cfg, f.name) for f in dc_fields(SystemConfig)}
    values.update(kw)
    return SystemConfig(**values)


def cmd_project(
    in_path: Path,
    out_dir: Path,
    periodic: bool,
    weights_path: Path | None,
    solver: str,
    tol: float,
) -> int:
    f = read_vector_field(in_path)
    phi = None
    if weights_path is not None:
        phi = read_weight_field(weights_path)
    if periodic or phi is not None:
        a = helmholtz.project_periodic_weighted(f, phi, solver, tol)
    else:
        a = helmholtz.project_neumann(f, solver, tol)
    grad = helmholtz.gradient_at_bins(a)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_scalar_field(out_dir / "free_energy.csv", a)
    write_vector_field(out_dir / "projected_gradient.csv", grad)

    w = phi.values if phi is not None else None
    norm_f = helmholtz.weighted_norm2(f.values, f.grid, w)
    norm_g = helmholtz.weighted_norm2(grad.values, f.grid, w)
    norm_r = helmholtz.weighted_norm2(f.values - grad.values, f.grid, w)
    defect = abs(norm_f - norm_g - norm_r) / max(norm_f, 1e-300)
    print(f"|F|^2 = {norm_f:.6e}  |gradA|^2 = {norm_g:.6e}  |F - gradA|^2 = {norm_r:.6e}")
    print(f"pythagoras relative defect = {defect:.3e}")
    return 0


def cmd_oracle(cfg: SystemConfig, out_dir: Path, n_quad: int = 512) -> int:
    toy = cfg.toy_system()
    grid = cfg.grid()
    out_dir.mkdir(parents=True, exist_ok=True)
    write_scalar_field(out_dir / "reference_free_energy.csv", oracle.reference_free_energy(toy, grid, n_quad))
    write_vector_field(out_dir / "reference_mean_force.csv", oracle.reference_mean_force(toy, grid, n_quad))
    print(f"reference fields for {cfg.kind} in {out_dir}")
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pabf", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="path to the run configuration file")
        p.add_argument("--out", default=None, help="output directory (overrides output.directory)")
        p.add_argument("--seed-override", type=int, default=None)
        p.add_argument("--mode", default=None, help="override langevin.mode")

    p_run = sub.add_parser("run", help="simulate one configuration")
    common(p_run)

    p_cmp = sub.add_parser("compare", help="K seeded realizations per mode, variance/error table")
    common(p_cmp)
    p_cmp.add_argument("--realizations", type=int, default=8)
    p_cmp.add_argument("--modes", default="abf,pabf", help="comma-separated subset of abf,pabf")

    p_prj = sub.add_parser("project", help="project a bin field CSV onto a gradient")
    p_prj.add_argument("--input", required=True, help="vector field CSV to project")
    p_prj.add_argument("--out", required=True)
    p_prj.add_argument("--periodic", action="store_true")
    p_prj.add_argument("--weights", default=None, help="weight field CSV (implies periodic)")
    p_prj.add_argument("--solver", default="direct", choices=["direct", "cg"])
    p_prj.add_argument("--tolerance", type=float, default=1e-12)

    p_orc = sub.add_parser("oracle", help="write quadrature reference fields for a toy config")
    common(p_orc)
    p_orc.add_argument("--quad-points", type=int, default=512)
    return parser


def _load_with_overrides(args) -> SystemConfig:
    cfg = parse_config(args.config)
    kw = {}
    if args.seed_override is not None:
        kw["seed"] = args.seed_override
    if args.mode is not None:
        kw["mode"] = args.mode
    if args.out is not None:
        kw["out_dir"] = args.out
    if kw:
        cfg = _replace(cfg, **kw)
        cfg.validate()
    if not cfg.out_dir:
        raise ConfigError("no output directory: set output.directory or pass --out")
    return cfg


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            cfg = _load_with_overrides(args)
            return cmd_run(cfg, Path(cfg.out_dir))
        if args.command == "compare":
            cfg = _load_with_overrides(args)
            modes = [m.strip() for m in args.modes.split(",") if m.strip()]
            return cmd_compare(cfg, Path(cfg.out_dir), args.realizations, modes)
        if args.command == "project":
            return cmd_project(
                Path(args.input), Path(args.out), args.periodic,
                Path(args.weights) if args.weights else None, args.solver, args.tolerance,
            )
        if args.command == "oracle":
            cfg = _load_with_overrides(args)
            return cmd_oracle(cfg, Path(cfg.out_dir), args.quad_points)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (langevin.UnstableStepError, helmholtz.SolverError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
