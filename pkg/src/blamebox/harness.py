"""Simulation harness: synthetic skills, injected bugs, fingerprint and
sensor-data generators, and ready-made scenarios.

Built-in scenarios: ``fig3``/``fig4``/``fig5`` are four-skill, 241-function
studies with a bug in f2 and differing skill/function overlap structure;
``exoneration`` and ``localizer-ambiguity`` are desk-scale manipulation-stack
studies (a succeeding skill clears its functions; two function groups that
always run together cannot be told apart).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .blame import Belief, coverage_indices
from .core import (ExperienceDb, Fingerprint, FunctionRegistry, Observation,
                   SensorSeries, SkillId)
from .errors import ExecutorError, ScenarioError, ValidationError
from .fpf import BlameConfig, fit_fpf
from .planner import (ExecutionResult, LoopTrace, PlannerConfig,
                      run_testing_loop)


@dataclass(frozen=True)
class SimSkillSpec:
    """Generator description of one artificial skill."""

    skill: SkillId
    used_functions: tuple[str, ...]
    count_mu: float | Mapping[str, float] = 2.0
    count_sigma: float | Mapping[str, float] = 0.5
    T: int = 100
    dt: float = 0.05

    def __post_init__(self):
        object.__setattr__(self, "used_functions", tuple(self.used_functions))
        if not self.used_functions:
            raise ValidationError(f"skill {self.skill!r} must use at least one function")
        if self.T < 1:
            raise ValidationError("T must be >= 1")

    def mu_of(self, name: str) -> float:
        m = self.count_mu
        return float(m[name]) if isinstance(m, Mapping) else float(m)

    def sigma_of(self, name: str) -> float:
        s = self.count_sigma
        v = float(s[name]) if isinstance(s, Mapping) else float(s)
        if v < 0:
            raise ValidationError("count sigma must be >= 0")
        return v


@dataclass(frozen=True)
class SimWorld:
    """Ground truth of a simulated study: which functions are broken."""

    registry: FunctionRegistry
    buggy_functions: frozenset[str] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "buggy_functions", frozenset(self.buggy_functions))
        for name in self.buggy_functions:
            if name not in self.registry:
                raise ValidationError(f"buggy function {name!r} not in registry")


def gen_fingerprint(spec: SimSkillSpec, registry: FunctionRegistry,
                    rng: np.random.Generator) -> Fingerprint:
    """Counts ~ N(mu_f, sigma_f^2) clamped at zero for used functions;
    exactly zero rows for everything else."""
    counts = np.zeros((registry.F, spec.T))
    for name in spec.used_functions:
        i = registry.index(name)
        draw = rng.normal(spec.mu_of(name), spec.sigma_of(name), size=spec.T)
        counts[i] = np.maximum(draw, 0.0)
    return Fingerprint(counts, dt=spec.dt)


def simulate_execution(spec: SimSkillSpec, world: SimWorld,
                       rng: np.random.Generator) -> ExecutionResult:
    """One simulated run. Success is deterministic: the skill fails iff it
    uses a buggy function. Failures get a true failure time drawn uniformly
    from the middle half of the execution; the sensor record is a one-channel
    placeholder (fingerprint-only studies bypass the sensor model)."""
    fingerprint = gen_fingerprint(spec, registry=world.registry, rng=rng)
    success = not (set(spec.used_functions) & world.buggy_functions)
    t_fail = None
    if not success:
        lo, hi = spec.T // 4, max(spec.T // 4 + 1, (3 * spec.T) // 4)
        t_fail = int(rng.integers(lo, hi))
    sensors = SensorSeries(np.zeros((1, spec.T)), dt=spec.dt)
    obs = Observation(sensors=sensors, fingerprint=fingerprint,
                      success=success, skill=spec.skill)
    return ExecutionResult(observation=obs, success=success, t_fail=t_fail)


class SimExecutor:
    """Deterministic executor over simulated skills (one stream per skill)."""

    def __init__(self, specs: Mapping[SkillId, SimSkillSpec], world: SimWorld,
                 seed: int | np.random.SeedSequence = 0):
        self._specs = dict(specs)
        self._world = world
        ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
        self._rngs = {s: np.random.default_rng(child)
                      for s, child in zip(sorted(self._specs), ss.spawn(len(self._specs)))}

    def execute(self, skill: SkillId) -> ExecutionResult:
        if skill not in self._specs:
            raise ExecutorError(f"no simulated skill {skill!r}")
        return simulate_execution(self._specs[skill], self._world, self._rngs[skill])


def build_database(spec: SimSkillSpec, registry: FunctionRegistry,
                   rng: np.random.Generator, size: int) -> ExperienceDb:
    """Simulate ``size`` successful executions (pre-bug world) for one skill."""
    world = SimWorld(registry=registry)  # no bugs: every run succeeds
    obs = [simulate_execution(spec, world, rng).observation for _ in range(size)]
    return ExperienceDb.from_observations(spec.skill, obs, registry)


# ---------------------------------------------------------------------------
# Synthetic sensor data for the observation model.

@dataclass(frozen=True)
class AnomalySpec:
    """Failure mode injected into negative sequences from ``onset`` onward.

    kind "constant-shift" adds magnitude * noise_sigma per channel, signed by
    ``channel_signs`` (0 excludes a channel); "channel-dropout" zeroes one
    channel; "freeze" holds every channel at its onset value.
    """

    kind: str = "constant-shift"
    onset: int = 120
    magnitude: float = 3.0
    channel_signs: tuple[float, ...] | None = None
    channel: int = 0

    _KINDS = ("constant-shift", "channel-dropout", "freeze")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValidationError(f"anomaly kind must be one of {self._KINDS}")
        if self.onset < 0:
            raise ValidationError("anomaly onset must be >= 0")


@dataclass(frozen=True)
class SensorSynthSpec:
    """Per-channel sinusoid family with shared phase jitter and white noise."""

    channels: int = 8
    T: int = 200
    dt: float = 0.05
    frequency: tuple[float, ...] = ()
    phase: tuple[float, ...] = ()
    amplitude: tuple[float, ...] = ()
    offset: tuple[float, ...] = ()
    noise_sigma: float = 0.1
    phase_jitter: float = 0.4
    anomaly: AnomalySpec = field(default_factory=AnomalySpec)

    def __post_init__(self):
        if self.channels < 1 or self.T < 1:
            raise ValidationError("need channels >= 1 and T >= 1")
        if self.anomaly.onset >= self.T:
            raise ValidationError("anomaly onset must lie before T")
        d = self.channels

        def fill(vals, default):
            vals = tuple(float(v) for v in (vals if len(vals) else default))
            if len(vals) != d:
                raise ValidationError(f"per-channel field needs {d} entries")
            return vals

        object.__setattr__(self, "frequency", fill(self.frequency, np.linspace(0.5, 3.0, d)))
        object.__setattr__(self, "phase", fill(self.phase,
                                               np.linspace(0.0, 2 * math.pi, d, endpoint=False)))
        object.__setattr__(self, "amplitude", fill(self.amplitude, [0.35] * d))
        object.__setattr__(self, "offset", fill(self.offset, np.linspace(0.3, 0.7, d)))


@dataclass(frozen=True)
class SensorSuite:
    train: tuple[SensorSeries, ...]
    positive: tuple[SensorSeries, ...]
    negative: tuple[SensorSeries, ...]
    onset: int


def _synth_clean(spec: SensorSynthSpec, rng: np.random.Generator) -> np.ndarray:
    t = np.arange(spec.T)
    jitter = rng.uniform(-spec.phase_jitter, spec.phase_jitter)
    freq = np.asarray(spec.frequency)[:, None]
    phase = (np.asarray(spec.phase) + jitter)[:, None]
    amp = np.asarray(spec.amplitude)[:, None]
    off = np.asarray(spec.offset)[:, None]
    clean = off + amp * np.sin(2 * math.pi * freq * t[None, :] / spec.T + phase)
    return clean + rng.normal(0.0, spec.noise_sigma, size=(spec.channels, spec.T))


def _apply_anomaly(data: np.ndarray, spec: SensorSynthSpec) -> np.ndarray:
    a = spec.anomaly
    out = data.copy()
    if a.kind == "constant-shift":
        signs = (np.asarray(a.channel_signs, dtype=float) if a.channel_signs is not None
                 else np.where(np.arange(spec.channels) % 2 == 0, 1.0, -1.0))
        if signs.size != spec.channels:
            raise ValidationError("channel_signs must have one entry per channel")
        out[:, a.onset:] += (signs * a.magnitude * spec.noise_sigma)[:, None]
    elif a.kind == "channel-dropout":
        out[a.channel, a.onset:] = 0.0
    else:  # freeze
        out[:, a.onset:] = out[:, a.onset][:, None]
    return out


def gen_sensor_suite(spec: SensorSynthSpec, n_train: int, n_pos: int, n_neg: int,
                     rng: np.random.Generator) -> SensorSuite:
    """Labeled sets: train and positive share the generative process, negative
    sequences carry the anomaly from its onset onward."""
    if min(n_train, n_pos, n_neg) < 1:
        raise ValidationError("all set sizes must be >= 1")

    def series(mat):
        return SensorSeries(mat, dt=spec.dt)

    train = tuple(series(_synth_clean(spec, rng)) for _ in range(n_train))
    pos = tuple(series(_synth_clean(spec, rng)) for _ in range(n_pos))
    neg = tuple(series(_apply_anomaly(_synth_clean(spec, rng), spec)) for _ in range(n_neg))
    return SensorSuite(train=train, positive=pos, negative=neg, onset=spec.anomaly.onset)


# ---------------------------------------------------------------------------
# Scenarios.

@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    functions: tuple[str, ...]
    skills: tuple[tuple[SkillId, tuple[str, ...]], ...]
    buggy: tuple[str, ...]
    db_size: int = 70
    T: int = 100
    dt: float = 0.05
    count_mu: float = 2.0
    count_sigma: float = 0.5
    seed: int = 1
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    blame: BlameConfig | None = None

    def resolved_blame(self) -> BlameConfig:
        return self.blame if self.blame is not None else BlameConfig.for_sampling(self.dt)

    def to_dict(self) -> dict:
        blame = self.resolved_blame()
        return {
            "name": self.name,
            "functions": list(self.functions),
            "skills": [{"skill": s, "functions": list(fns)} for s, fns in self.skills],
            "buggy": list(self.buggy),
            "db_size": self.db_size,
            "T": self.T,
            "dt": self.dt,
            "count_mu": self.count_mu,
            "count_sigma": self.count_sigma,
            "seed": self.seed,
            "planner": {
                "samples_per_observation": self.planner.samples_per_observation,
                "convergence_epsilon": self.planner.convergence_epsilon,
                "convergence_patience": self.planner.convergence_patience,
                "max_iterations": self.planner.max_iterations,
                "seed": self.planner.seed,
            },
            "blame": {
                "alpha": blame.alpha,
                "window_steps": blame.window_steps,
                "epsilon_floor": blame.epsilon_floor,
                "var_floor": blame.var_floor,
                "success_deviation_weight": blame.success_deviation_weight,
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        try:
            planner = PlannerConfig(**d.get("planner", {}))
            blame = BlameConfig(**d["blame"]) if "blame" in d else None
            return cls(
                name=d["name"],
                functions=tuple(d["functions"]),
                skills=tuple((sk["skill"], tuple(sk["functions"])) for sk in d["skills"]),
                buggy=tuple(d["buggy"]),
                db_size=int(d.get("db_size", 70)),
                T=int(d.get("T", 100)),
                dt=float(d.get("dt", 0.05)),
                count_mu=float(d.get("count_mu", 2.0)),
                count_sigma=float(d.get("count_sigma", 0.5)),
                seed=int(d.get("seed", 1)),
                planner=planner,
                blame=blame,
            )
        except (KeyError, TypeError) as exc:
            raise ScenarioError(f"malformed scenario description: {exc}") from exc


def _fig_functions() -> tuple[str, ...]:
    return tuple(f"f{i}" for i in range(1, 242))


def _fig_config(name: str, skill_sets: Sequence[Sequence[int]], seed: int) -> ScenarioConfig:
    return ScenarioConfig(
        name=name,
        functions=_fig_functions(),
        skills=tuple((f"a{i + 1}", tuple(f"f{j}" for j in fns))
                     for i, fns in enumerate(skill_sets)),
        buggy=("f2",),
        seed=seed,
    )


_ROBOT_FUNCTIONS = ("localiseObject", "planCartesianTrajectory", "cartesianPtp",
                    "computeIk", "armControl", "closeHand",
                    "planJointTrajectory", "jointPtp")
_ROBOT_SKILLS = (
    ("grasp", ("localiseObject", "planCartesianTrajectory", "cartesianPtp",
               "computeIk", "armControl", "closeHand")),
    ("pressButton", ("planJointTrajectory", "jointPtp", "armControl")),
    ("handover", ("planJointTrajectory", "jointPtp", "armControl", "closeHand")),
)


def built_in_scenario(name: str, seed: int = 1) -> ScenarioConfig:
    if name == "fig3":
        return _fig_config(name, [(1, 2), (2, 4, 5), (3, 4, 6), (3, 4, 5, 6)], seed)
    if name == "fig4":
        return _fig_config(name, [(1, 2), (2, 4, 5), (1, 3, 6), (1, 3, 4, 6)], seed)
    if name == "fig5":
        return _fig_config(name, [(1, 2), (2, 4), (1, 3, 6), (1, 3, 4, 6)], seed)
    if name == "exoneration":
        # A broken Cartesian planner sinks the grasp; the joint-space skills
        # succeed and clear everything they touch.
        return ScenarioConfig(
            name=name, functions=_ROBOT_FUNCTIONS, skills=_ROBOT_SKILLS,
            buggy=("planCartesianTrajectory",), seed=seed,
            planner=PlannerConfig(max_iterations=25, seed=0))
    if name == "localizer-ambiguity":
        # The localiser and the Cartesian-planning functions only ever run
        # together, so blame cannot separate them.
        return ScenarioConfig(
            name=name, functions=_ROBOT_FUNCTIONS, skills=_ROBOT_SKILLS,
            buggy=("localiseObject",), seed=seed,
            planner=PlannerConfig(max_iterations=25, seed=0))
    raise ScenarioError(
        f"unknown scenario {name!r}; built-ins: {', '.join(BUILT_IN_SCENARIOS)}")


BUILT_IN_SCENARIOS = ("fig3", "fig4", "fig5", "exoneration", "localizer-ambiguity")


def load_scenario(source: str, seed: int | None = None) -> ScenarioConfig:
    """Resolve a scenario by built-in name or JSON file path."""
    if source in BUILT_IN_SCENARIOS:
        cfg = built_in_scenario(source, seed=1 if seed is None else seed)
        return cfg
    try:
        with open(source, "r", encoding="utf-8") as fh:
            cfg = ScenarioConfig.from_dict(json.load(fh))
    except FileNotFoundError:
        raise ScenarioError(
            f"unknown scenario {source!r}; built-ins: {', '.join(BUILT_IN_SCENARIOS)}"
        ) from None
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario file {source!r} is not valid JSON: {exc}") from exc
    if seed is not None:
        cfg = replace(cfg, seed=seed,
                      planner=replace(cfg.planner, seed=seed))
    return cfg


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    registry: FunctionRegistry
    belief: Belief
    trace: LoopTrace
    candidates: tuple[str, ...]

    def posterior_of(self, name: str) -> float:
        return float(self.belief.probs[self.registry.index(name)])

    def top(self, k: int = 5) -> list[tuple[str, float]]:
        order = np.argsort(self.belief.probs)[::-1][:k]
        return [(self.registry.names[i], float(self.belief.probs[i])) for i in order]


def candidate_set(belief: Belief, registry: FunctionRegistry,
                  coverage: float = 0.99) -> tuple[str, ...]:
    """Smallest set of functions covering the given share of blame mass,
    reported in registry order."""
    idx = sorted(coverage_indices(belief, coverage))
    return tuple(registry.names[i] for i in idx)


def run_scenario(config: ScenarioConfig, out_dir: str | None = None) -> ScenarioResult:
    """Build the study (registry, databases, models), run the testing loop
    against the buggy world, and optionally write the report bundle.

    The scenario seed drives every stream: database simulation, loop
    executions, and gain sampling."""
    registry = FunctionRegistry(config.functions)
    blame = config.resolved_blame()
    planner = replace(config.planner, seed=config.seed)
    specs = {
        skill: SimSkillSpec(skill=skill, used_functions=fns, count_mu=config.count_mu,
                            count_sigma=config.count_sigma, T=config.T, dt=config.dt)
        for skill, fns in config.skills
    }
    skills = tuple(s for s, _ in config.skills)
    root = np.random.SeedSequence(config.seed)
    db_ss, exec_ss = root.spawn(2)
    dbs = {}
    for child, skill in zip(db_ss.spawn(len(skills)), skills):
        dbs[skill] = build_database(specs[skill], registry,
                                    np.random.default_rng(child), config.db_size)
    fpfs = {s: fit_fpf(dbs[s], blame) for s in skills}
    world = SimWorld(registry=registry, buggy_functions=frozenset(config.buggy))
    executor = SimExecutor(specs, world, seed=exec_ss)
    belief, trace = run_testing_loop(executor, skills, dbs, fpfs, None, planner, blame)
    result = ScenarioResult(config=config, registry=registry, belief=belief,
                            trace=trace, candidates=candidate_set(belief, registry))
    if out_dir is not None:
        from .reports import write_scenario_report
        write_scenario_report(out_dir, result)
    return result
