"""Skill selection by expected information gain and the outer testing loop.

The gain of a skill is estimated by hypothetical Bayesian updates: for every
stored observation of that skill, sample (success, t_fail) pairs with success
uniform over {true, false} and t_fail uniform over the execution window
(success uses the full window), apply the belief update, and average the
posterior entropies. E[I] = H[prior] - mean(H_posterior).

Per (skill, step) randomness comes from spawned generator streams, so gains
for different skills can be evaluated concurrently with reproducible results;
BLAMEBOX_THREADS caps that concurrency.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Protocol, Sequence

import numpy as np

from .blame import Belief, combine_deviation, entropy
from .core import ExperienceDb, Observation, SkillId
from .errors import ConfigError, ExecutorError, ValidationError
from .fpf import BlameConfig, FpfModel, deviation_grid
from .mom import ErrorStats, MomConfig, MomModel, detect_failure_time, error_series

_TIE_TOL = 1e-12


@dataclass(frozen=True)
class PlannerConfig:
    samples_per_observation: int = 8
    convergence_epsilon: float = 0.01
    convergence_patience: int = 3
    max_iterations: int = 60
    seed: int = 0

    def __post_init__(self):
        if self.samples_per_observation < 1:
            raise ConfigError("samples_per_observation must be >= 1")
        if self.convergence_epsilon <= 0:
            raise ConfigError("convergence_epsilon must be positive")
        if self.convergence_patience < 1:
            raise ConfigError("convergence_patience must be >= 1")
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be >= 1")


@dataclass(frozen=True)
class GainEstimate:
    """Monte-Carlo estimate of E[I(a)] with the standard error of the mean."""

    gain: float
    stderr: float
    n_samples: int


@dataclass(frozen=True)
class ExecutionResult:
    """What a skill executor reports back for one run."""

    observation: Observation
    success: bool
    t_fail: int | None = None


class SkillExecutor(Protocol):
    """Boundary to whatever actually runs a skill (simulator, replay, robot)."""

    def execute(self, skill: SkillId) -> ExecutionResult:  # pragma: no cover
        ...


class SkillCache:
    """Precomputed deviation statistics for one skill's database.

    Hypothetical updates need the deviation mass of every stored observation
    for every candidate failure time; computing the whole (n_obs, F, T) grid
    once per loop makes a gain evaluation a gather plus vector arithmetic.
    """

    def __init__(self, db: ExperienceDb, fpf: FpfModel, config: BlameConfig):
        if len(db) == 0:
            raise ValidationError(f"empty database for skill {db.skill!r}")
        self.skill = db.skill
        self.T = fpf.T
        self.pd, self.inactive = deviation_grid(fpf, db.counts_stack(), config)
        self.n_obs = self.pd.shape[0]


def _sampled_entropies(belief: Belief, cache: SkillCache, config: BlameConfig,
                       samples: int, rng: np.random.Generator) -> np.ndarray:
    n, T = cache.n_obs, cache.T
    succ = rng.integers(0, 2, size=(n, samples)).astype(bool)
    t_fail = rng.integers(0, T, size=(n, samples))
    t_eff = np.where(succ, T - 1, t_fail)  # successes judge the full window
    obs_idx = np.arange(n)[:, None]
    pd = cache.pd[obs_idx, :, t_eff]            # (n, samples, F)
    inactive = cache.inactive[obs_idx, :, t_eff]
    lik = np.where(
        succ[:, :, None],
        combine_deviation(pd, inactive, True, config),
        combine_deviation(pd, inactive, False, config),
    )
    w = lik * belief.probs[None, None, :]
    w /= w.sum(axis=2, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(w > 0, w * np.log(w), 0.0)
    return -terms.sum(axis=2).ravel()


def information_gain_stats(belief: Belief, db: ExperienceDb, fpf: FpfModel,
                           planner: PlannerConfig, blame: BlameConfig,
                           rng: np.random.Generator,
                           cache: SkillCache | None = None) -> GainEstimate:
    """E[I] with its Monte-Carlo standard error."""
    if cache is None:
        cache = SkillCache(db, fpf, blame)
    h_sam = _sampled_entropies(belief, cache, blame, planner.samples_per_observation, rng)
    se = float(h_sam.std(ddof=1) / np.sqrt(h_sam.size)) if h_sam.size > 1 else 0.0
    return GainEstimate(gain=float(entropy(belief) - h_sam.mean()),
                        stderr=se, n_samples=int(h_sam.size))


def expected_information_gain(belief: Belief, skill: SkillId,
                              dbs: Mapping[SkillId, ExperienceDb],
                              fpfs: Mapping[SkillId, FpfModel],
                              planner: PlannerConfig, blame: BlameConfig,
                              rng: np.random.Generator,
                              cache: SkillCache | None = None) -> float:
    return information_gain_stats(belief, dbs[skill], fpfs[skill],
                                  planner, blame, rng, cache=cache).gain


def _worker_count(n_skills: int) -> int:
    raw = os.environ.get("BLAMEBOX_THREADS", "")
    try:
        cap = int(raw) if raw else (os.cpu_count() or 1)
    except ValueError:
        cap = os.cpu_count() or 1
    return max(1, min(n_skills, cap))


def select_skill(belief: Belief, skills: Sequence[SkillId],
                 dbs: Mapping[SkillId, ExperienceDb],
                 fpfs: Mapping[SkillId, FpfModel],
                 planner: PlannerConfig, blame: BlameConfig,
                 rng: np.random.Generator,
                 caches: Mapping[SkillId, SkillCache] | None = None,
                 ) -> tuple[SkillId, GainEstimate, dict[SkillId, GainEstimate]]:
    """Gain-maximizing skill; ties within 1e-12 go to the lowest index."""
    if not skills:
        raise ValidationError("need at least one skill to select from")
    streams = rng.spawn(len(skills))

    def one(i: int) -> GainEstimate:
        s = skills[i]
        return information_gain_stats(
            belief, dbs[s], fpfs[s], planner, blame, streams[i],
            cache=None if caches is None else caches.get(s))

    workers = _worker_count(len(skills))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            estimates = list(pool.map(one, range(len(skills))))
    else:
        estimates = [one(i) for i in range(len(skills))]
    best = 0
    for i in range(1, len(skills)):
        if estimates[i].gain > estimates[best].gain + _TIE_TOL:
            best = i
    return skills[best], estimates[best], dict(zip(skills, estimates))


@dataclass(frozen=True)
class LoopStep:
    step: int
    chosen: SkillId
    gains: dict[SkillId, GainEstimate]
    success: bool
    t_fail: int
    posterior: np.ndarray
    entropy: float


@dataclass
class LoopTrace:
    skills: tuple[SkillId, ...]
    steps: list[LoopStep] = field(default_factory=list)
    converged: bool = False
    aborted: str | None = None


def _resolve_t_fail(result: ExecutionResult,
                    mom: tuple[MomModel, ErrorStats] | None,
                    mom_config: MomConfig, T: int) -> int:
    if mom is not None:
        model, stats = mom
        if result.observation.sensors.D == model.D:
            _, detected = detect_failure_time(
                stats, error_series(model, result.observation.sensors), mom_config)
            if detected is not None:
                return detected
    if result.t_fail is not None:
        return int(result.t_fail)
    return T - 1


def run_testing_loop(world: SkillExecutor, skills: Sequence[SkillId],
                     dbs: Mapping[SkillId, ExperienceDb],
                     fpfs: Mapping[SkillId, FpfModel],
                     mom_by_skill: Mapping[SkillId, tuple[MomModel, ErrorStats]] | None,
                     planner: PlannerConfig, blame: BlameConfig,
                     mom_config: MomConfig | None = None,
                     ) -> tuple[Belief, LoopTrace]:
    """The autonomous testing loop.

    Starts from a uniform belief, repeatedly selects the gain-maximizing
    skill, executes it, locates the failure time (detector first, then the
    executor's report, then the final timestep), and updates the belief.
    Stops once the best gain stays below convergence_epsilon for
    convergence_patience consecutive planning rounds, or at max_iterations.
    An executor error aborts the loop and returns the trace so far.
    """
    from .blame import bayes_update  # local import to keep module load light

    skills = tuple(skills)
    mom_config = mom_config or MomConfig()
    mom_by_skill = mom_by_skill or {}
    for s in skills:
        if s not in dbs or s not in fpfs:
            raise ValidationError(f"skill {s!r} is missing a database or model")
    caches = {s: SkillCache(dbs[s], fpfs[s], blame) for s in skills}
    belief = Belief.uniform(fpfs[skills[0]].F)
    trace = LoopTrace(skills=skills)
    root = np.random.default_rng(planner.seed)
    below = 0
    for step in range(planner.max_iterations):
        chosen, best, gains = select_skill(
            belief, skills, dbs, fpfs, planner, blame, root.spawn(1)[0], caches=caches)
        if best.gain < planner.convergence_epsilon:
            below += 1
            if below >= planner.convergence_patience:
                trace.converged = True
                break
        else:
            below = 0
        try:
            result = world.execute(chosen)
        except ExecutorError as exc:
            trace.aborted = str(exc)
            break
        t_fail = (fpfs[chosen].T - 1 if result.success else
                  _resolve_t_fail(result, mom_by_skill.get(chosen), mom_config,
                                  fpfs[chosen].T))
        belief, record = bayes_update(belief, fpfs, result.observation,
                                      result.success, t_fail, blame)
        trace.steps.append(LoopStep(
            step=step, chosen=chosen, gains=gains, success=result.success,
            t_fail=record.t_fail, posterior=belief.probs,
            entropy=record.posterior_entropy))
    return belief, trace
