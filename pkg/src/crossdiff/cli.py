"""Command line front end.

Configs are sectioned key=value text ([grid], [time], [system],
[species k], [output]); unknown keys are rejected with their line number
so experiment files stay diffable and typo-proof. Subcommands cover a
single run, the steady-state solver, a coupling-strength sweep (parallel
across processes), admissibility bounds, the particle system, and the
built-in example presets. CSV output is full-precision scientific
notation, UTF-8 with LF endings.

Exit codes: 0 success, 1 configuration or usage error, 2 numerical
blowup, 3 I/O error.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .bounds import bounds_report
from .core import (KernelSpec, PotentialSpec, SpeciesSpec, SystemSpec,
                   build_initial_state, make_grid)
from .diagnostics import integrated_norms
from .energy import steady_state
from .errors import ConfigurationError, NumericalBlowupError, SolverError
from .fv import AdaptiveDt, FixedDt, RunRecorder, run


@dataclass(frozen=True)
class SpeciesConfig:
    """One [species k] section, kept as the literal config words."""

    potential: str = "zero"
    kernel: str = "none"
    mass: float = 1.0
    ic: str = "uniform"


def _default_species():
    return (SpeciesConfig(), SpeciesConfig())


@dataclass(frozen=True)
class RunConfig:
    x_min: float = -1.0
    x_max: float = 1.0
    j: int = 64
    mode: str = "fixed"
    dt: float = 1e-6
    safety: float = 0.9
    t_end: float = 3.0
    record_count: int = 10
    m: int = 2
    delta: float = 0.0
    epsilon: float = 0.0
    species: tuple[SpeciesConfig, ...] = field(default_factory=_default_species)
    directory: str = "."
    prefix: str = ""


def _parse_potential(text):
    parts = text.split(None, 1)
    kind = parts[0] if parts else ""
    if kind == "zero":
        return PotentialSpec.zero()
    if kind == "quadratic":
        if len(parts) != 2:
            raise ConfigurationError("quadratic potential needs a coefficient")
        return PotentialSpec.quadratic(float(parts[1]))
    if kind == "tabulated":
        if len(parts) != 2:
            raise ConfigurationError("tabulated potential needs values")
        return PotentialSpec.tabulated([float(v) for v in parts[1].split(",")])
    raise ConfigurationError(f"unknown potential {text!r}")


def _parse_kernel(text):
    parts = text.split(None, 1)
    kind = parts[0] if parts else ""
    if kind == "none":
        return KernelSpec.none()
    if kind == "tabulated":
        if len(parts) != 2:
            raise ConfigurationError("tabulated kernel needs values")
        return KernelSpec.tabulated([float(v) for v in parts[1].split(",")])
    raise ConfigurationError(f"unknown kernel {text!r}")


def _species_spec(sc):
    parts = sc.ic.split(None, 1)
    if parts and parts[0] == "tabulated":
        if len(parts) != 2:
            raise ConfigurationError("tabulated ic needs values")
        ic, values = "tabulated", [float(v) for v in parts[1].split(",")]
    else:
        ic, values = sc.ic, None
    return SpeciesSpec(potential=_parse_potential(sc.potential),
                       kernel=_parse_kernel(sc.kernel),
                       mass=sc.mass, ic=ic, ic_values=values)


def build_grid(cfg):
    return make_grid(cfg.x_min, cfg.x_max, cfg.j)


def build_system(cfg):
    return SystemSpec(m=cfg.m, delta=cfg.delta, epsilon=cfg.epsilon,
                      species=tuple(_species_spec(s) for s in cfg.species))


def time_mode(cfg):
    if cfg.mode == "fixed":
        return FixedDt(cfg.dt)
    return AdaptiveDt(safety=cfg.safety)


def record_times(cfg):
    return np.linspace(0.0, cfg.t_end, cfg.record_count + 1)


_SCALARS = {
    "grid": {"x_min": ("x_min", float), "x_max": ("x_max", float),
             "J": ("j", int)},
    "time": {"mode": ("mode", str), "dt": ("dt", float),
             "safety": ("safety", float), "t_end": ("t_end", float),
             "record_count": ("record_count", int)},
    "system": {"M": ("m", int), "delta": ("delta", float),
               "epsilon": ("epsilon", float)},
    "output": {"directory": ("directory", str), "prefix": ("prefix", str)},
}
_SPECIES_KEYS = {"potential": str, "kernel": str, "mass": float, "ic": str}


def parse_config(text):
    """Parse sectioned key=value text into a RunConfig.

    Diagnostics carry the offending key and 1-based line number.
    """
    top = {}
    species = {}
    seen = set()
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            if name in _SCALARS:
                section = name
            elif name.startswith("species"):
                try:
                    idx = int(name.split(None, 1)[1])
                except (IndexError, ValueError):
                    raise ConfigurationError(
                        f"bad species section {name!r} (line {lineno})")
                if idx < 1:
                    raise ConfigurationError(
                        f"species index must be >= 1 (line {lineno})")
                section = ("species", idx)
                species.setdefault(idx, {})
            else:
                raise ConfigurationError(
                    f"unknown section [{name}] (line {lineno})")
            continue
        if "=" not in line:
            raise ConfigurationError(
                f"expected key = value, got {line!r} (line {lineno})")
        if section is None:
            raise ConfigurationError(
                f"key outside any section (line {lineno})")
        key, value = (part.strip() for part in line.split("=", 1))
        if (section if isinstance(section, str) else section[0] + str(section[1]),
                key) in seen:
            raise ConfigurationError(f"duplicate key {key!r} (line {lineno})")
        seen.add((section if isinstance(section, str)
                  else section[0] + str(section[1]), key))
        if isinstance(section, str):
            table = _SCALARS[section]
            if key not in table:
                raise ConfigurationError(
                    f"unknown key {key!r} in [{section}] (line {lineno})")
            attr, typ = table[key]
            try:
                top[attr] = typ(value)
            except ValueError:
                raise ConfigurationError(
                    f"bad value for {key!r}: {value!r} (line {lineno})")
        else:
            _, idx = section
            if key not in _SPECIES_KEYS:
                raise ConfigurationError(
                    f"unknown key {key!r} in [species {idx}] (line {lineno})")
            try:
                species[idx][key] = _SPECIES_KEYS[key](value)
            except ValueError:
                raise ConfigurationError(
                    f"bad value for {key!r}: {value!r} (line {lineno})")

    cfg = RunConfig(**top) if top else RunConfig()
    if species:
        want = set(range(1, cfg.m + 1))
        if set(species) - want:
            extra = sorted(set(species) - want)[0]
            raise ConfigurationError(
                f"species section {extra} exceeds M={cfg.m}")
        missing = sorted(want - set(species))
        if missing:
            raise ConfigurationError(
                f"missing required section [species {missing[0]}]")
        cfg = replace(cfg, species=tuple(
            SpeciesConfig(**species[i]) for i in range(1, cfg.m + 1)))
    elif cfg.m != len(cfg.species):
        cfg = replace(cfg, species=tuple(
            SpeciesConfig() for _ in range(cfg.m)))
    if cfg.mode not in ("fixed", "adaptive"):
        raise ConfigurationError(f"mode must be fixed or adaptive, got {cfg.mode!r}")
    for i, sc in enumerate(cfg.species, start=1):
        try:
            _species_spec(sc)
        except ConfigurationError as e:
            raise ConfigurationError(f"[species {i}]: {e}")
    return cfg


def render_config(cfg):
    """Canonical text form; parse_config(render_config(c)) == c."""
    out = ["[grid]",
           f"x_min = {cfg.x_min!r}", f"x_max = {cfg.x_max!r}", f"J = {cfg.j}",
           "", "[time]",
           f"mode = {cfg.mode}", f"dt = {cfg.dt!r}", f"safety = {cfg.safety!r}",
           f"t_end = {cfg.t_end!r}", f"record_count = {cfg.record_count}",
           "", "[system]",
           f"M = {cfg.m}", f"delta = {cfg.delta!r}", f"epsilon = {cfg.epsilon!r}"]
    for i, sc in enumerate(cfg.species, start=1):
        out += ["", f"[species {i}]",
                f"potential = {sc.potential}", f"kernel = {sc.kernel}",
                f"mass = {sc.mass!r}", f"ic = {sc.ic}"]
    out += ["", "[output]",
            f"directory = {cfg.directory}", f"prefix = {cfg.prefix}", ""]
    return "\n".join(out)


def _fmt(x):
    return "%.17e" % float(x)


def write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(c if isinstance(c, str) else _fmt(c)
                             for c in row) + "\n")


def _density_rows(records, grid):
    for r in records:
        for i in range(r.u.shape[0]):
            for j in range(grid.j):
                yield (r.t, str(i + 1), grid.centers[j], r.u[i, j])


def _norm_rows(records):
    for r in records:
        for i in range(r.mass.size):
            yield (r.t, str(i + 1), r.mass[i], r.min_density[i], r.l2[i],
                   r.h1semi[i], r.tv[i], r.entropy_pos[i], r.energy)


def _run_once(cfg, out_dir, prefix):
    grid = build_grid(cfg)
    spec = build_system(cfg)
    rec = RunRecorder()
    run(spec, grid, cfg.t_end, time_mode(cfg), record_times(cfg), rec)
    os.makedirs(out_dir, exist_ok=True)
    write_csv(os.path.join(out_dir, prefix + "densities.csv"),
              ("t", "species", "x", "u"), _density_rows(rec.records, grid))
    write_csv(os.path.join(out_dir, prefix + "norms.csv"),
              ("t", "species", "mass", "min", "l2", "h1semi", "tv",
               "entropy_pos", "energy"), _norm_rows(rec.records))
    return rec


def _read_config_file(path):
    try:
        with open(path, encoding="utf-8") as f:
            return parse_config(f.read())
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path}")


def cmd_run(args):
    cfg = _read_config_file(args.config)
    _run_once(cfg, cfg.directory, cfg.prefix)
    return 0


def cmd_steady(args):
    cfg = _read_config_file(args.config)
    grid = build_grid(cfg)
    spec = build_system(cfg)
    sol = steady_state(spec, grid)
    os.makedirs(cfg.directory, exist_ok=True)
    rows = ((str(i + 1), grid.centers[j], sol.u[i, j], sol.c[i])
            for i in range(spec.m) for j in range(grid.j))
    write_csv(os.path.join(cfg.directory, cfg.prefix + "steady.csv"),
              ("species", "x", "u_inf", "c"), rows)
    print(f"iterations {sol.iterations}  residual {sol.residual:.3e}")
    return 0


def _sweep_worker(payload):
    cfg, delta = payload
    cfg = replace(cfg, delta=delta)
    prefix = f"{cfg.prefix}delta{delta:g}_"
    rec = _run_once(cfg, cfg.directory, prefix)
    s = integrated_norms(rec.records, delta=delta)
    return (s.delta, s.u_2T, s.grad_u_2T, s.tv_T)


def sweep(cfg, deltas, parallel=True):
    """Run once per delta (each with its own file set) and collect the
    integrated-norm summary rows in input order."""
    payloads = [(cfg, float(d)) for d in deltas]
    if parallel and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=min(len(payloads),
                                                 os.cpu_count() or 1)) as ex:
            rows = list(ex.map(_sweep_worker, payloads))
    else:
        rows = [_sweep_worker(p) for p in payloads]
    os.makedirs(cfg.directory, exist_ok=True)
    write_csv(os.path.join(cfg.directory, cfg.prefix + "sweep.csv"),
              ("delta", "u_2T", "grad_u_2T", "tv_T"), rows)
    return rows


def cmd_sweep(args):
    cfg = _read_config_file(args.config)
    try:
        deltas = [float(v) for v in args.delta.split(",") if v.strip()]
    except ValueError:
        raise ConfigurationError(f"bad --delta list: {args.delta!r}")
    if not deltas:
        raise ConfigurationError("--delta needs at least one value")
    sweep(cfg, deltas, parallel=not args.serial)
    return 0


def cmd_bounds(args):
    rep = bounds_report(T=args.T, c_l=args.c_l, omega_len=args.omega,
                        c_p=args.c_p)
    for line in rep.lines():
        print(line)
    if args.csv:
        write_csv(args.csv,
                  ("T", "c_l", "omega_len", "c_p", "c_f", "c_omega",
                   "delta_max"),
                  [(rep.T, rep.c_l, rep.omega_len, rep.c_p, rep.c_f,
                    rep.c_omega, rep.delta_max)])
    return 0


def cmd_particles(args):
    from .particles import (ParticleSpec, empirical_density,
                            sample_initial_positions, step_particles)

    cfg = _read_config_file(args.config)
    grid = build_grid(cfg)
    spec = build_system(cfg)
    try:
        counts = [int(v) for v in str(args.n).split(",")]
    except ValueError:
        raise ConfigurationError(f"bad --n list: {args.n!r}")
    if len(counts) == 1:
        counts = counts * cfg.m
    if len(counts) != cfg.m:
        raise ConfigurationError("--n needs one count, or one per species")
    pspec = ParticleSpec(m=cfg.m, counts=tuple(counts), delta=cfg.delta,
                         eps=args.eps, seed=args.seed,
                         potentials=tuple(_parse_potential(s.potential)
                                          for s in cfg.species),
                         x_min=cfg.x_min, x_max=cfg.x_max)
    state = sample_initial_positions(pspec, spec, grid)
    hist_rows = []

    def snapshot(st):
        for i in range(cfg.m):
            h = empirical_density(st, grid, i)
            for j in range(grid.j):
                hist_rows.append((st.t, str(i + 1), grid.centers[j], h[j]))

    snapshot(state)
    for t_stop in record_times(cfg)[1:]:
        while state.t < t_stop - 1e-14 * (1.0 + t_stop):
            state = step_particles(state, pspec,
                                   min(args.pdt, t_stop - state.t))
        snapshot(state)

    pde = run(spec, grid, cfg.t_end, AdaptiveDt(0.9))
    comp_rows = []
    for i in range(cfg.m):
        hist = empirical_density(state, grid, i) * spec.species[i].mass
        dist = grid.dx * float(np.abs(hist - pde.u[i]).sum())
        comp_rows.append((cfg.t_end, str(counts[i]), float(pspec.eps[i, i]),
                          dist))
    os.makedirs(cfg.directory, exist_ok=True)
    write_csv(os.path.join(cfg.directory, cfg.prefix + "particles.csv"),
              ("t", "species", "x", "density"), hist_rows)
    write_csv(os.path.join(cfg.directory, cfg.prefix + "comparison.csv"),
              ("T", "N", "eps", "l1_distance"), comp_rows)
    return 0


_EX_DELTAS = (0.4, 0.6, 0.8, 0.99)
_EX4_DELTAS = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99)


def example_config(n):
    bumps = (SpeciesConfig(potential="zero", ic="leftbump"),
             SpeciesConfig(potential="quadratic 2.0", ic="rightbump"))
    if n == 1:
        return RunConfig(species=bumps)
    if n == 2:
        return RunConfig(species=(
            SpeciesConfig(potential="zero", ic="uniform"),
            SpeciesConfig(potential="quadratic 2.0", ic="uniform")))
    if n == 3:
        return RunConfig(species=(
            SpeciesConfig(potential="quadratic 0.5", ic="leftbump"),
            SpeciesConfig(potential="quadratic 50.0", ic="rightbump")))
    if n == 4:
        return RunConfig(t_end=5.0, species=(
            SpeciesConfig(potential="zero", ic="uniform"),
            SpeciesConfig(potential="quadratic 2.0", ic="uniform")))
    raise ConfigurationError(f"example must be 1..4, got {n}")


def run_example(n, output_dir, deltas=None):
    """Run preset n for each of its delta values; emit per-run CSV files,
    the steady-state profile, and for preset 4 the sweep summary."""
    base = example_config(n)
    base = replace(base, directory=output_dir, prefix=f"ex{n}_")
    if deltas is None:
        deltas = _EX4_DELTAS if n == 4 else _EX_DELTAS
    if n == 4:
        sweep(base, deltas)
    else:
        for d in deltas:
            _sweep_worker((base, float(d)))
    grid = build_grid(base)
    for d in deltas:
        spec = build_system(replace(base, delta=float(d)))
        sol = steady_state(spec, grid)
        rows = ((str(i + 1), grid.centers[j], sol.u[i, j], sol.c[i])
                for i in range(spec.m) for j in range(grid.j))
        write_csv(os.path.join(output_dir, f"ex{n}_delta{d:g}_steady.csv"),
                  ("species", "x", "u_inf", "c"), rows)
    return 0


def cmd_example(args):
    os.makedirs(args.output, exist_ok=True)
    return run_example(args.n, args.output)


class _Parser(argparse.ArgumentParser):
    # argparse normally exits(2) on bad usage; remap to the config error code
    def error(self, message):
        raise ConfigurationError(message)


def _build_parser():
    p = _Parser(prog="crossdiff",
                description="Finite-volume lab for cross-diffusion systems")
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("run", help="single simulation from a config file")
    q.add_argument("config")
    q.set_defaults(func=cmd_run)

    q = sub.add_parser("steady", help="steady-state minimizer only")
    q.add_argument("config")
    q.set_defaults(func=cmd_steady)

    q = sub.add_parser("sweep", help="one run per delta, plus summary CSV")
    q.add_argument("config")
    q.add_argument("--delta", required=True, help="comma-separated values")
    q.add_argument("--serial", action="store_true",
                   help="disable process parallelism")
    q.set_defaults(func=cmd_sweep)

    q = sub.add_parser("bounds", help="admissibility constants report")
    q.add_argument("--T", type=float, required=True)
    q.add_argument("--c-l", type=float, required=True)
    q.add_argument("--omega", type=float, default=2.0)
    q.add_argument("--c-p", type=float, default=None)
    q.add_argument("--csv", default=None, help="also write bounds.csv here")
    q.set_defaults(func=cmd_bounds)

    q = sub.add_parser("particles", help="particle system and PDE comparison")
    q.add_argument("config")
    q.add_argument("--n", default="4000", help="particles per species")
    q.add_argument("--eps", type=float, default=0.05)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--pdt", type=float, default=1e-3,
                   help="particle time step")
    q.set_defaults(func=cmd_particles)

    q = sub.add_parser("example", help="built-in experiment presets")
    q.add_argument("n", type=int, choices=(1, 2, 3, 4))
    q.add_argument("--output", "-o", default=".")
    q.set_defaults(func=cmd_example)
    return p


def main(argv=None):
    try:
        args = _build_parser().parse_args(argv)
        return args.func(args)
    except ConfigurationError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (NumericalBlowupError, SolverError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
