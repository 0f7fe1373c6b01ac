"""Command-line front end.

Every subcommand accepts ``--config FILE`` (JSON) plus flags; flags override
the file, the file overrides a ``--preset``, and the preset overrides
built-in defaults.  Outputs are written atomically to ``--out`` and named
``<experiment>-<preset-or-hash>-<seed>[-<part>].<ext>``; a manifest with the
fully resolved configuration is written next to them.  A one-line JSON
summary is printed on success.

Exit codes:
  0  success
  2  usage error (unknown subcommand or malformed flags)
  3  invalid configuration
  4  solver failure (shooting, integration, limit cycle, adjoint, Monte Carlo)
  5  I/O error
"""
from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import shutil
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_SOLVER, EXIT_IO = 0, 2, 3, 4, 5

EXPERIMENTS = ("prc-compute", "solve", "approx", "pair-run", "beta-sweep", "population",
               "monte-carlo")
WAVEFORM_LABELS = ("optimal", "approx1", "approx2", "none")
POPULATION_KEYS = ("N", "alpha", "D", "I_b", "threshold", "duration", "dt", "seed", "jitter",
                   "noise_scheme")


class ConfigError(ValueError):
    def __init__(self, problems):
        self.problems = [problems] if isinstance(problems, str) else list(problems)
        super().__init__("; ".join(self.problems))


@dataclass
class ExperimentConfig:
    experiment: str
    prc: str | None = None
    preset: str | None = None
    beta: float | None = None
    omega: float | None = None
    phi0: float | None = None
    betas: list | None = None
    dt: float | None = None
    tol: float = 1e-8
    K: int = 200
    I_b: float = 10.0
    waveform: str = "approx2"
    runs: int = 100
    population: dict = field(default_factory=dict)
    out: str = "."

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


CONFIG_KEYS = tuple(f.name for f in dataclasses.fields(ExperimentConfig))


def _no_duplicates(pairs):
    seen = {}
    for k, v in pairs:
        if k in seen:
            raise ConfigError(f"duplicate key {k!r}")
        seen[k] = v
    return seen


def parse_config_text(text: str, source: str = "<config>") -> dict:
    try:
        data = json.loads(text, object_pairs_hook=_no_duplicates)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}: parse error at line {exc.lineno}, column {exc.colno}: "
                          f"{exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a JSON object")
    return data


def _resolve_prc_ref(ref, base: Path | None):
    # anything that is not a built-in name is a coefficient file path
    from .prc import BUILTIN_PRCS
    if ref is None or ref in BUILTIN_PRCS:
        return ref
    p = Path(ref)
    if base is not None and not p.is_absolute():
        p = base / p
    return str(p)


def build_config(data: dict, base: Path | None = None) -> ExperimentConfig:
    """Validate a raw mapping and fill defaults; all problems are reported together."""
    from .experiments import PRESETS
    from .population import PopulationConfig

    problems = [f"unknown key {k!r}" for k in data if k not in CONFIG_KEYS]
    pop = data.get("population", {}) or {}
    if not isinstance(pop, dict):
        problems.append("population must be an object")
        pop = {}
    problems += [f"unknown key 'population.{k}'" for k in pop if k not in POPULATION_KEYS]
    kind = data.get("experiment")
    if kind not in EXPERIMENTS:
        problems.append(f"experiment must be one of {list(EXPERIMENTS)}, got {kind!r}")
    if problems:
        raise ConfigError(problems)

    cfg = ExperimentConfig(**{k: v for k, v in data.items() if v is not None})
    cfg.prc = _resolve_prc_ref(cfg.prc, base)
    if cfg.preset is not None:
        if cfg.preset not in PRESETS:
            problems.append(f"unknown preset {cfg.preset!r}; choose from {sorted(PRESETS)}")
        else:
            pr = PRESETS[cfg.preset]
            cfg.prc = cfg.prc or pr.prc
            cfg.omega = pr.omega if cfg.omega is None else cfg.omega
            cfg.beta = pr.beta if cfg.beta is None else cfg.beta
            cfg.phi0 = pr.phi0 if cfg.phi0 is None else cfg.phi0
    if kind in ("population", "monte-carlo") and cfg.preset is None and cfg.prc is None:
        cfg.preset = "rhh"
        pr = PRESETS["rhh"]
        cfg.prc, cfg.omega = pr.prc, pr.omega if cfg.omega is None else cfg.omega
        cfg.beta = pr.beta if cfg.beta is None else cfg.beta
    if kind in ("solve", "approx", "pair-run", "beta-sweep", "population", "monte-carlo"):
        if cfg.prc is None:
            problems.append("prc is required (built-in name or coefficient file)")
        elif not _builtin(cfg.prc) and not Path(cfg.prc).is_file():
            problems.append(f"PRC file {cfg.prc!r} does not exist")
        if cfg.omega is None:
            cfg.omega = 1.0
        if not _num(cfg.omega) or cfg.omega <= 0:
            problems.append(f"omega must be a positive number, got {cfg.omega!r}")
    if kind in ("solve", "approx", "pair-run", "population", "monte-carlo"):
        if cfg.beta is None:
            problems.append("beta is required")
        elif not _num(cfg.beta):
            problems.append(f"beta must be a number, got {cfg.beta!r}")
    if kind in ("pair-run", "beta-sweep"):
        if cfg.phi0 is None:
            cfg.phi0 = 0.01
        if not _num(cfg.phi0):
            problems.append(f"phi0 must be a number, got {cfg.phi0!r}")
    if kind == "beta-sweep":
        if cfg.betas is None:
            cfg.betas = [2.0, 4.0, 6.0, 8.0, 10.0]
        if not (isinstance(cfg.betas, list) and cfg.betas and all(_num(b) for b in cfg.betas)):
            problems.append("betas must be a non-empty list of numbers")
    if kind == "prc-compute":
        if not (isinstance(cfg.K, int) and cfg.K >= 1):
            problems.append(f"K must be a positive integer, got {cfg.K!r}")
        if not _num(cfg.I_b):
            problems.append(f"I_b must be a number, got {cfg.I_b!r}")
    if cfg.dt is not None and (not _num(cfg.dt) or cfg.dt <= 0):
        problems.append(f"dt must be positive, got {cfg.dt!r}")
    if not _num(cfg.tol) or cfg.tol <= 0:
        problems.append(f"tol must be positive, got {cfg.tol!r}")
    if cfg.waveform not in WAVEFORM_LABELS and not Path(cfg.waveform).is_file():
        problems.append(f"waveform must be one of {list(WAVEFORM_LABELS)} or a CSV file")
    if kind == "monte-carlo" and not (isinstance(cfg.runs, int) and cfg.runs >= 2):
        problems.append(f"runs must be an integer >= 2, got {cfg.runs!r}")
    if kind in ("population", "monte-carlo"):
        try:
            cfg.population = PopulationConfig(**pop).to_dict()
        except (TypeError, ValueError) as exc:
            problems.append(f"population: {exc}")
    if problems:
        raise ConfigError(problems)
    return cfg


def _num(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _builtin(name) -> bool:
    from .prc import BUILTIN_PRCS
    return name in BUILTIN_PRCS


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return build_config(parse_config_text(text, str(path)), base=path.parent)


# ---------------------------------------------------------------- output helpers

class Outputs:
    """Stages files in a hidden temporary directory; :meth:`commit` renames them into place."""

    def __init__(self, out_dir, stem):
        self.out_dir = Path(out_dir)
        self.stem = stem
        self._tmp = None

    @property
    def staging(self) -> Path:
        if self._tmp is None:
            self.out_dir.mkdir(parents=True, exist_ok=True)
            self._tmp = Path(tempfile.mkdtemp(prefix=".tmp-", dir=self.out_dir))
        return self._tmp

    def path(self, part: str | None, ext: str) -> Path:
        name = f"{self.stem}-{part}.{ext}" if part else f"{self.stem}.{ext}"
        return self.staging / name

    def json(self, part, obj):
        self.path(part, "json").write_text(json.dumps(obj, indent=1, default=float))

    def commit(self) -> list[str]:
        if self._tmp is None:
            return []
        files = []
        for f in sorted(self._tmp.iterdir()):
            final = self.out_dir / f.name
            os.replace(f, final)
            files.append(str(final))
        self._tmp.rmdir()
        self._tmp = None
        return files

    def discard(self):
        if self._tmp is not None:
            shutil.rmtree(self._tmp, ignore_errors=True)
            self._tmp = None


def _stem(cfg: ExperimentConfig) -> str:
    seed = cfg.population.get("seed", 0) if cfg.population else 0
    if cfg.preset:
        tag = cfg.preset
    else:
        blob = json.dumps({k: v for k, v in cfg.to_dict().items() if k != "out"}, sort_keys=True)
        tag = hashlib.sha1(blob.encode()).hexdigest()[:8]
    return f"{cfg.experiment}-{tag}-{seed}"


# ---------------------------------------------------------------- experiments

def _load_prc(ref):
    from .prc import builtin_prc, load_prc
    return builtin_prc(ref) if _builtin(ref) else load_prc(ref)


def _run_prc_compute(cfg, out):
    from .rhh import RHHParams, compute_adjoint_prc, find_limit_cycle
    params = RHHParams(I_b=cfg.I_b)
    cycle = find_limit_cycle(params, dt=cfg.dt or 0.001)
    prc = compute_adjoint_prc(cycle, K=cfg.K)
    prc.save(out.path("prc", "json"))
    cycle.to_csv(out.path("cycle", "csv"))
    return {"period": cycle.period, "omega": cycle.omega, "K": cfg.K}


def _run_solve(cfg, out):
    from .control import shoot_optimal
    prc = _load_prc(cfg.prc)
    sol = shoot_optimal(prc, cfg.omega, cfg.beta, tol=cfg.tol)
    sol.waveform.to_csv(out.path("waveform", "csv"))
    summary = sol.summary()
    out.json("summary", summary)
    return summary


def _run_approx(cfg, out):
    from .control import approx_lyapunov, approx_u1, approx_u2
    prc = _load_prc(cfg.prc)
    u1 = approx_u1(prc, cfg.omega, cfg.beta)
    u2 = approx_u2(prc, cfg.omega, cfg.beta)
    u1.to_csv(out.path("approx1", "csv"))
    u2.to_csv(out.path("approx2", "csv"))
    summary = {"beta": cfg.beta, "energy_u1": u1.energy, "energy_u2": u2.energy,
               "approx_lyap": approx_lyapunov(prc, cfg.omega, cfg.beta)}
    out.json("summary", summary)
    return summary


def _run_pair(cfg, out):
    from .experiments import LABELS, input_set, two_oscillator_run
    prc = _load_prc(cfg.prc)
    sol, waves = input_set(prc, cfg.omega, cfg.beta, tol=cfg.tol)
    summary = {"beta": cfg.beta, "phi0": cfg.phi0, "energy": sol.waveform.energy}
    for label in LABELS:
        run = two_oscillator_run(prc, cfg.omega, waves[label], cfg.phi0, cfg.dt, label)
        run.to_csv(out.path(label, "csv"))
        waves[label].to_csv(out.path(f"{label}-waveform", "csv"))
        summary[f"phi_T_{label}"] = run.phi_final
    out.json("summary", summary)
    return summary


def _run_sweep(cfg, out):
    from .experiments import beta_sweep, write_sweep_csv
    prc = _load_prc(cfg.prc)
    rows = beta_sweep(prc, cfg.omega, cfg.betas, cfg.phi0, cfg.dt)
    write_sweep_csv(rows, out.path(None, "csv"))
    errors = {str(r.beta): r.error for r in rows if r.error}
    return {"betas": cfg.betas, "failed": errors}


def _population_waveform(cfg):
    from .control import ControlWaveform
    from .experiments import input_set
    if cfg.waveform == "none":
        return None
    if cfg.waveform not in WAVEFORM_LABELS:
        return ControlWaveform.from_csv(cfg.waveform)
    _, waves = input_set(_load_prc(cfg.prc), cfg.omega, cfg.beta, tol=cfg.tol)
    return waves[cfg.waveform]


def _run_population(cfg, out):
    from .population import PopulationConfig, simulate_population
    pc = PopulationConfig(**cfg.population)
    trace = simulate_population(pc, _population_waveform(cfg))
    trace.write_csv(out.staging / out.stem)
    summary = {"energy": trace.energy, "triggers": len(trace.trigger_times),
               "spikes": int(sum(len(s) for s in trace.spikes)), "waveform": cfg.waveform}
    out.json("summary", summary)
    return summary


def _run_monte_carlo(cfg, out):
    from .experiments import input_set
    from .population import PopulationConfig, monte_carlo_energy
    pc = PopulationConfig(**cfg.population)
    _, waves = input_set(_load_prc(cfg.prc), cfg.omega, cfg.beta, tol=cfg.tol)
    stats = monte_carlo_energy(pc, waves, cfg.runs)
    rows = [s.to_dict() for s in stats.values()]
    out.json(None, rows)
    return {r["label"]: {"mean": r["mean_energy"], "stdev": r["stdev_energy"]} for r in rows}


RUNNERS = {
    "prc-compute": _run_prc_compute,
    "solve": _run_solve,
    "approx": _run_approx,
    "pair-run": _run_pair,
    "beta-sweep": _run_sweep,
    "population": _run_population,
    "monte-carlo": _run_monte_carlo,
}


# ---------------------------------------------------------------- argument parsing

def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="phasedesync", description=__doc__.split("\n\n")[0],
        epilog=__doc__[__doc__.index("Exit codes:"):],
        formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="experiment", metavar="SUBCOMMAND")
    sub.required = True
    for name in EXPERIMENTS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--out", help="output directory (default: .)")
        p.add_argument("--tol", type=float)
        p.add_argument("--dt", type=float)
        if name != "prc-compute":
            p.add_argument("--prc", help="built-in PRC (sin, sniper, rhh) or coefficient JSON file")
            p.add_argument("--preset", help="named reference configuration")
            p.add_argument("--omega", type=float)
        if name in ("solve", "approx", "pair-run", "population", "monte-carlo"):
            p.add_argument("--beta", type=float)
        if name in ("pair-run", "beta-sweep"):
            p.add_argument("--phi0", type=float)
        if name == "beta-sweep":
            p.add_argument("--betas", type=lambda s: [float(x) for x in s.split(",")],
                           help="comma-separated beta values")
        if name == "prc-compute":
            p.add_argument("--K", type=int)
            p.add_argument("--I_b", type=float)
        if name in ("population", "monte-carlo"):
            p.add_argument("--waveform", help="optimal, approx1, approx2, none, or a CSV")
            for key, typ in (("N", int), ("alpha", float), ("D", float), ("threshold", float),
                             ("duration", float), ("seed", int), ("jitter", float)):
                p.add_argument(f"--{key}", type=typ, dest=f"pop_{key}")
            p.add_argument("--noise-scheme", dest="pop_noise_scheme")
            p.add_argument("--pop-dt", type=float, dest="pop_dt")
            p.add_argument("--pop-I_b", type=float, dest="pop_I_b")
        if name == "monte-carlo":
            p.add_argument("--runs", type=int)
    return parser


def resolve(args: argparse.Namespace) -> ExperimentConfig:
    data = {}
    base = None
    if args.config:
        path = Path(args.config)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from None
        data = parse_config_text(text, str(path))
        base = path.parent
        if data.get("experiment", args.experiment) != args.experiment:
            raise ConfigError(f"config is for {data['experiment']!r}, not {args.experiment!r}")
    data["experiment"] = args.experiment
    flags = vars(args)
    for key in CONFIG_KEYS:
        if key in ("experiment", "population"):
            continue
        if flags.get(key) is not None:
            data[key] = flags[key]
            if key == "prc":
                base = None
    pop = dict(data.get("population") or {})
    for key in POPULATION_KEYS:
        if flags.get(f"pop_{key}") is not None:
            pop[key] = flags[f"pop_{key}"]
    if pop or "population" in data:
        data["population"] = pop
    if base is not None and "prc" in data:
        data["prc"] = _resolve_prc_ref(data["prc"], base)
    return build_config(data)


def _error(code: int, kind: str, message: str) -> int:
    print(json.dumps({"status": "error", "code": code, "error": kind, "message": message}))
    return code


def run_command(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        cfg = resolve(args)
    except ConfigError as exc:
        return _error(EXIT_CONFIG, "invalid-config", str(exc))

    from .control import CannotRescaleError, ShootingError
    from .numerics import BracketError, IntegrationDivergedError
    from .population import MonteCarloError
    from .rhh import AdjointDivergedError, NoOscillationError
    solver_errors = (ShootingError, IntegrationDivergedError, BracketError, NoOscillationError,
                     AdjointDivergedError, MonteCarloError, CannotRescaleError)

    out = Outputs(cfg.out, _stem(cfg))
    try:
        summary = RUNNERS[cfg.experiment](cfg, out)
        out.json("manifest", {"version": __version__, "config": cfg.to_dict()})
        files = out.commit()
    except solver_errors as exc:
        out.discard()
        return _error(EXIT_SOLVER, "solver-failed", f"{type(exc).__name__}: {exc}")
    except OSError as exc:
        out.discard()
        return _error(EXIT_IO, "io-error", str(exc))
    except BaseException:
        out.discard()
        raise
    print(json.dumps({"status": "ok", "experiment": cfg.experiment, "files": files,
                      **summary}, default=float))
    return EXIT_OK


def main():
    sys.exit(run_command())
