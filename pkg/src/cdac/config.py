"""Experiment configuration: INI-style files with ``key = value`` sections.

Sections and keys (defaults in brackets):

* ``[task]`` -- ``kind`` (task1|task2); ``beta1`` for task1, or
  ``beta1..beta4`` for task2.
* ``[costs]`` -- ``c`` (required), ``c_s`` [0].
* ``[solver]`` -- ``m`` [201], ``tolerance`` [1e-6], ``max_iters`` [1000],
  ``interp`` [barycentric], ``backend`` [auto].
* ``[approx]`` -- ``method`` (rbf|gpr); rbf: ``n_centers`` [45], ``sigma``
  [0.2], ``kernel`` [gaussian], ``epsilon`` [1.0], ``n_samples`` [1000];
  gpr: ``n_points`` [200], ``length_scale`` [1.0], ``signal`` [1.0],
  ``noise`` [0.1]; shared: ``seed`` [0], ``tolerance`` [1e-4 rbf / 1e-3 gpr],
  ``max_iters`` [50].
* ``[sim]`` -- ``policy`` (cdac|infomax|greedy_map), ``threshold`` (required
  for baselines), ``trials`` [10000], ``seed`` [0], ``initial_fixation``
  [l1], ``max_steps`` [1000].
* ``[compare]`` -- ``policies`` [cdac,infomax], ``c_values`` [costs.c],
  ``cs_values`` [costs.c_s], ``calibration_trials`` [3000],
  ``accuracy_tol`` [0.02].
* ``[output]`` -- ``directory`` [out], ``formats`` [csv,ppm].

All validation problems are reported together with their ``section.key``
paths.  ``--set section.key=value`` overrides are applied before validation.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .approx import GprConfig, RbfConfig
from .model import CostParams, TaskSpec


class ConfigError(Exception):
    """One or more configuration problems, each tagged with its field path."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("\n".join(self.problems))


@dataclass
class SolverConfig:
    m: int = 201
    tolerance: float = 1e-6
    max_iters: int = 1000
    interp: str = "barycentric"
    backend: str | None = None


@dataclass
class SimConfig:
    policy: str = "cdac"
    threshold: float | None = None
    trials: int = 10000
    seed: int = 0
    initial_fixation: str = "l1"
    max_steps: int = 1000


@dataclass
class CompareConfig:
    policies: tuple[str, ...] = ("cdac", "infomax")
    c_values: tuple[float, ...] = ()
    cs_values: tuple[float, ...] = ()
    calibration_trials: int = 3000
    accuracy_tol: float = 0.02


@dataclass
class OutputConfig:
    directory: str = "out"
    formats: tuple[str, ...] = ("csv", "ppm")


@dataclass
class ExperimentConfig:
    task: TaskSpec
    costs: CostParams
    solver: SolverConfig = field(default_factory=SolverConfig)
    approx_method: str | None = None
    rbf: RbfConfig = field(default_factory=RbfConfig)
    gpr: GprConfig = field(default_factory=GprConfig)
    sim: SimConfig = field(default_factory=SimConfig)
    compare: CompareConfig = field(default_factory=CompareConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def initial_fixation_index(self) -> int:
        return self.task.action_index(self.sim.initial_fixation)


class _Reader:
    """Typed key extraction with path-tagged error collection."""

    def __init__(self, parser: configparser.ConfigParser):
        self.parser = parser
        self.problems: list[str] = []
        self.seen: set[tuple[str, str]] = set()

    def get(self, section, key, default=None, required=False, cast=str):
        self.seen.add((section, key))
        if not self.parser.has_option(section, key):
            if required:
                self.problems.append(f"{section}.{key}: required key is missing")
            return default
        raw = self.parser.get(section, key)
        try:
            return cast(raw)
        except (TypeError, ValueError):
            self.problems.append(
                f"{section}.{key}: cannot parse {raw!r} as {cast.__name__}")
            return default

    def warn_unknown(self):
        for section in self.parser.sections():
            for key in self.parser.options(section):
                if (section, key) not in self.seen:
                    self.problems.append(f"{section}.{key}: unknown key")


def _float_list(raw: str) -> tuple[float, ...]:
    return tuple(float(v) for v in raw.split(",") if v.strip() != "")


def _str_list(raw: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in raw.split(",") if v.strip() != "")


def load_config(path, overrides=()) -> ExperimentConfig:
    """Parse and validate a config file, applying ``section.key=value``
    overrides first.  Raises :class:`ConfigError` listing every problem."""
    parser = configparser.ConfigParser(interpolation=None)
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except (configparser.Error, OSError) as exc:
        raise ConfigError(f"unreadable config {path}: {exc}") from exc
    problems: list[str] = []
    for item in overrides:
        target, _, value = item.partition("=")
        section, _, key = target.partition(".")
        if not section or not key or not _:
            problems.append(f"override {item!r} is not SECTION.KEY=VALUE")
            continue
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section.strip(), key.strip(), value.strip())
    if problems:
        raise ConfigError(problems)
    return _build(parser)


def _build(parser: configparser.ConfigParser) -> ExperimentConfig:
    r = _Reader(parser)
    task = costs = None

    if not parser.has_section("task"):
        r.problems.append("task: section is missing")
        kind = None
    else:
        kind = r.get("task", "kind", required=True)
    if kind == "task1":
        beta1 = r.get("task", "beta1", required=True, cast=float)
        if beta1 is not None:
            try:
                task = TaskSpec.task1(beta1)
            except ValueError as exc:
                r.problems.append(f"task.beta1: {exc}")
    elif kind == "task2":
        betas = [r.get("task", f"beta{i}", required=True, cast=float)
                 for i in (1, 2, 3, 4)]
        if all(b is not None for b in betas):
            try:
                task = TaskSpec.task2(*betas)
            except ValueError as exc:
                r.problems.append(f"task.beta1..beta4: {exc}")
    elif kind is not None:
        r.problems.append(f"task.kind: expected task1 or task2, got {kind!r}")

    if not parser.has_section("costs"):
        r.problems.append("costs: section is missing")
    else:
        c = r.get("costs", "c", required=True, cast=float)
        c_s = r.get("costs", "c_s", default=0.0, cast=float)
        if c is not None:
            try:
                costs = CostParams(c=c, c_s=c_s)
            except ValueError as exc:
                r.problems.append(f"costs: {exc}")

    solver = SolverConfig(
        m=r.get("solver", "m", default=201, cast=int),
        tolerance=r.get("solver", "tolerance", default=1e-6, cast=float),
        max_iters=r.get("solver", "max_iters", default=1000, cast=int),
        interp=r.get("solver", "interp", default="barycentric"),
        backend=r.get("solver", "backend", default=None),
    ) if parser.has_section("solver") else SolverConfig()
    if solver.backend in ("auto", ""):
        solver.backend = None
    if solver.interp not in ("barycentric", "nearest"):
        r.problems.append(
            f"solver.interp: expected barycentric or nearest, got {solver.interp!r}")
    if solver.m < 2:
        r.problems.append(f"solver.m: must be >= 2, got {solver.m}")

    approx_method = None
    rbf, gpr = RbfConfig(), GprConfig()
    if parser.has_section("approx"):
        approx_method = r.get("approx", "method", required=True)
        if approx_method not in ("rbf", "gpr", None):
            r.problems.append(
                f"approx.method: expected rbf or gpr, got {approx_method!r}")
        try:
            if approx_method == "rbf":
                rbf = RbfConfig(
                    n_centers=r.get("approx", "n_centers", default=45, cast=int),
                    sigma=r.get("approx", "sigma", default=0.2, cast=float),
                    kernel=r.get("approx", "kernel", default="gaussian"),
                    epsilon=r.get("approx", "epsilon", default=1.0, cast=float),
                    n_samples=r.get("approx", "n_samples", default=1000, cast=int),
                    seed=r.get("approx", "seed", default=0, cast=int),
                    tolerance=r.get("approx", "tolerance", default=1e-4, cast=float),
                    max_iters=r.get("approx", "max_iters", default=50, cast=int),
                )
            elif approx_method == "gpr":
                gpr = GprConfig(
                    n_points=r.get("approx", "n_points", default=200, cast=int),
                    length_scale=r.get("approx", "length_scale", default=1.0,
                                       cast=float),
                    signal=r.get("approx", "signal", default=1.0, cast=float),
                    noise=r.get("approx", "noise", default=0.1, cast=float),
                    seed=r.get("approx", "seed", default=0, cast=int),
                    tolerance=r.get("approx", "tolerance", default=1e-3, cast=float),
                    max_iters=r.get("approx", "max_iters", default=50, cast=int),
                )
        except ValueError as exc:
            r.problems.append(f"approx: {exc}")

    sim = SimConfig(
        policy=r.get("sim", "policy", default="cdac"),
        threshold=r.get("sim", "threshold", default=None, cast=float),
        trials=r.get("sim", "trials", default=10000, cast=int),
        seed=r.get("sim", "seed", default=0, cast=int),
        initial_fixation=r.get("sim", "initial_fixation", default="l1"),
        max_steps=r.get("sim", "max_steps", default=1000, cast=int),
    ) if parser.has_section("sim") else SimConfig()
    if sim.policy not in ("cdac", "infomax", "greedy_map"):
        r.problems.append(
            f"sim.policy: expected cdac, infomax or greedy_map, got {sim.policy!r}")
    if sim.trials < 1:
        r.problems.append(f"sim.trials: must be >= 1, got {sim.trials}")
    if sim.max_steps < 1:
        r.problems.append(f"sim.max_steps: must be >= 1, got {sim.max_steps}")

    default_compare = CompareConfig()
    compare = CompareConfig(
        policies=r.get("compare", "policies", default=("cdac", "infomax"),
                       cast=_str_list),
        c_values=r.get("compare", "c_values", default=(), cast=_float_list),
        cs_values=r.get("compare", "cs_values", default=(), cast=_float_list),
        calibration_trials=r.get("compare", "calibration_trials", default=3000,
                                 cast=int),
        accuracy_tol=r.get("compare", "accuracy_tol", default=0.02, cast=float),
    ) if parser.has_section("compare") else default_compare
    for name in compare.policies:
        if name not in ("cdac", "infomax", "greedy_map"):
            r.problems.append(f"compare.policies: unknown policy {name!r}")

    output = OutputConfig(
        directory=r.get("output", "directory", default="out"),
        formats=r.get("output", "formats", default=("csv", "ppm"),
                      cast=_str_list),
    ) if parser.has_section("output") else OutputConfig()
    for fmt in output.formats:
        if fmt not in ("csv", "ppm"):
            r.problems.append(f"output.formats: unknown format {fmt!r}")

    if task is not None and parser.has_section("sim"):
        try:
            task.action_index(sim.initial_fixation)
        except ValueError as exc:
            r.problems.append(f"sim.initial_fixation: {exc}")

    r.warn_unknown()
    if r.problems or task is None or costs is None:
        if not r.problems:
            r.problems.append("config: task and costs sections are required")
        raise ConfigError(r.problems)

    cfg = ExperimentConfig(task=task, costs=costs, solver=solver,
                           approx_method=approx_method, rbf=rbf, gpr=gpr,
                           sim=sim, compare=compare, output=output)
    if not cfg.compare.c_values:
        cfg.compare = CompareConfig(
            policies=cfg.compare.policies, c_values=(costs.c,),
            cs_values=cfg.compare.cs_values or (costs.c_s,),
            calibration_trials=cfg.compare.calibration_trials,
            accuracy_tol=cfg.compare.accuracy_tol)
    elif not cfg.compare.cs_values:
        cfg.compare = CompareConfig(
            policies=cfg.compare.policies, c_values=cfg.compare.c_values,
            cs_values=(costs.c_s,),
            calibration_trials=cfg.compare.calibration_trials,
            accuracy_tol=cfg.compare.accuracy_tol)
    return cfg


def effective_config_text(cfg: ExperimentConfig) -> str:
    """Render the fully resolved configuration back to INI text; re-loading
    this text reproduces the same configuration."""
    lines = ["[task]", f"kind = {cfg.task.kind}"]
    if cfg.task.kind == "task1":
        lines.append(f"beta1 = {cfg.task.betas[0]!r}")
    else:
        for i, b in enumerate(cfg.task.betas, start=1):
            lines.append(f"beta{i} = {b!r}")
    lines += ["", "[costs]", f"c = {cfg.costs.c!r}", f"c_s = {cfg.costs.c_s!r}"]
    lines += ["", "[solver]", f"m = {cfg.solver.m}",
              f"tolerance = {cfg.solver.tolerance!r}",
              f"max_iters = {cfg.solver.max_iters}",
              f"interp = {cfg.solver.interp}",
              f"backend = {cfg.solver.backend or 'auto'}"]
    if cfg.approx_method == "rbf":
        a = cfg.rbf
        lines += ["", "[approx]", "method = rbf",
                  f"n_centers = {a.n_centers}", f"sigma = {a.sigma!r}",
                  f"kernel = {a.kernel}", f"epsilon = {a.epsilon!r}",
                  f"n_samples = {a.n_samples}", f"seed = {a.seed}",
                  f"tolerance = {a.tolerance!r}", f"max_iters = {a.max_iters}"]
    elif cfg.approx_method == "gpr":
        a = cfg.gpr
        lines += ["", "[approx]", "method = gpr",
                  f"n_points = {a.n_points}",
                  f"length_scale = {a.length_scale!r}",
                  f"signal = {a.signal!r}", f"noise = {a.noise!r}",
                  f"seed = {a.seed}", f"tolerance = {a.tolerance!r}",
                  f"max_iters = {a.max_iters}"]
    s = cfg.sim
    lines += ["", "[sim]", f"policy = {s.policy}"]
    if s.threshold is not None:
        lines.append(f"threshold = {s.threshold!r}")
    lines += [f"trials = {s.trials}", f"seed = {s.seed}",
              f"initial_fixation = {s.initial_fixation}",
              f"max_steps = {s.max_steps}"]
    cm = cfg.compare
    lines += ["", "[compare]",
              "policies = " + ",".join(cm.policies),
              "c_values = " + ",".join(repr(v) for v in cm.c_values),
              "cs_values = " + ",".join(repr(v) for v in cm.cs_values),
              f"calibration_trials = {cm.calibration_trials}",
              f"accuracy_tol = {cm.accuracy_tol!r}"]
    lines += ["", "[output]", f"directory = {cfg.output.directory}",
              "formats = " + ",".join(cfg.output.formats), ""]
    return "\n".join(lines)
