import numpy as np
import pytest

from blamebox import (Belief, BlameConfig, ExperienceDb, ExecutionResult,
                      ExecutorError, FunctionRegistry, PlannerConfig, SkillCache,
                      ValidationError, bayes_update, entropy,
                      expected_information_gain, information_gain_stats,
                      run_testing_loop, select_skill)
from blamebox.harness import SimExecutor, SimSkillSpec, SimWorld, build_database
from blamebox.fpf import fit_fpf

CFG = BlameConfig(alpha=0.2, window_steps=3)
PLAN = PlannerConfig(samples_per_observation=64, seed=0)


def toy_setup(used_by_skill, F=2, T=4, n=3, seed=0, mu=2.0, sigma=0.4):
    registry = FunctionRegistry([f"f{i+1}" for i in range(F)])
    specs = {
        s: SimSkillSpec(skill=s, used_functions=fns, count_mu=mu, count_sigma=sigma, T=T)
        for s, fns in used_by_skill.items()
    }
    rng = np.random.default_rng(seed)
    dbs = {s: build_database(specs[s], registry, rng, n) for s in specs}
    fpfs = {s: fit_fpf(dbs[s], CFG) for s in specs}
    return registry, specs, dbs, fpfs


def enumerate_expected_entropy(belief, db, fpf, blame):
    """Exact expected posterior entropy of the uniform (success, t_fail)
    sampler: success outcomes use the final timestep, failure outcomes range
    over every timestep with equal weight."""
    T = fpf.T
    total = 0.0
    for obs in db.observations:
        h_succ = entropy(bayes_update(belief, {db.skill: fpf}, obs, True, None, blame)[0])
        h_fail = [entropy(bayes_update(belief, {db.skill: fpf}, obs, False, t, blame)[0])
                  for t in range(T)]
        total += 0.5 * h_succ + 0.5 * float(np.mean(h_fail))
    return total / len(db.observations)


class TestExpectedInformationGain:
    def test_point_mass_is_exactly_zero(self):
        _, _, dbs, fpfs = toy_setup({"s1": ("f1", "f2")})
        belief = Belief(np.array([1.0, 0.0]))
        g = expected_information_gain(belief, "s1", dbs, fpfs, PLAN, CFG,
                                      np.random.default_rng(0))
        assert abs(g) <= 1e-9

    def test_sampled_matches_enumeration_oracle(self):
        rng = np.random.default_rng(1)
        zscores = []
        for case in range(12):
            _, _, dbs, fpfs = toy_setup({"s1": ("f2",)}, seed=case)
            belief = Belief(rng.dirichlet(np.ones(2)))
            exact = entropy(belief) - enumerate_expected_entropy(
                belief, dbs["s1"], fpfs["s1"], CFG)
            plan = PlannerConfig(samples_per_observation=512, seed=0)
            est = information_gain_stats(belief, dbs["s1"], fpfs["s1"], plan, CFG,
                                         np.random.default_rng(1000 + case))
            zscores.append(abs(est.gain - exact) / max(est.stderr, 1e-12))
        assert sum(1 for z in zscores if z <= 3.0) >= 11, zscores
        assert max(zscores) <= 4.5

    def test_positive_for_discriminating_skill(self):
        _, _, dbs, fpfs = toy_setup({"s1": ("f2",)})
        belief = Belief(np.array([0.5, 0.5]))
        g = expected_information_gain(belief, "s1", dbs, fpfs, PLAN, CFG,
                                      np.random.default_rng(3))
        assert g > 0.1

    def test_disjoint_support_gains_nothing(self):
        registry, _, dbs, fpfs = toy_setup({"s1": ("f3", "f4")}, F=4)
        belief = Belief(np.array([0.5, 0.5, 0.0, 0.0]))
        est = information_gain_stats(belief, dbs["s1"], fpfs["s1"], PLAN, CFG,
                                     np.random.default_rng(4))
        assert abs(est.gain) <= max(3.0 * est.stderr, 1e-6)

    def test_nonnegative_at_uniform(self):
        for seed in range(5):
            _, _, dbs, fpfs = toy_setup({"s1": ("f1", "f2")}, F=3, seed=seed)
            est = information_gain_stats(Belief.uniform(3), dbs["s1"], fpfs["s1"],
                                         PLAN, CFG, np.random.default_rng(seed))
            assert est.gain >= -3.0 * est.stderr

    def test_cache_reuse_identical(self):
        _, _, dbs, fpfs = toy_setup({"s1": ("f1",)})
        cache = SkillCache(dbs["s1"], fpfs["s1"], CFG)
        belief = Belief(np.array([0.7, 0.3]))
        a = expected_information_gain(belief, "s1", dbs, fpfs, PLAN, CFG,
                                      np.random.default_rng(9))
        b = expected_information_gain(belief, "s1", dbs, fpfs, PLAN, CFG,
                                      np.random.default_rng(9), cache=cache)
        assert a == b

    def test_empty_db_rejected(self):
        _, _, dbs, fpfs = toy_setup({"s1": ("f1",)})
        empty = ExperienceDb(skill="s1", observations=(), canonical_T=4)
        with pytest.raises(ValidationError):
            SkillCache(empty, fpfs["s1"], CFG)


class TestSelectSkill:
    def test_single_skill(self):
        _, _, dbs, fpfs = toy_setup({"s1": ("f1",)})
        chosen, est, gains = select_skill(Belief.uniform(2), ("s1",), dbs, fpfs,
                                          PLAN, CFG, np.random.default_rng(0))
        assert chosen == "s1" and set(gains) == {"s1"}

    def test_tie_breaks_to_lowest_index(self, monkeypatch):
        _, _, dbs, fpfs = toy_setup({"s1": ("f1",), "s2": ("f1",)})
        import blamebox.planner as planner_mod
        monkeypatch.setattr(
            planner_mod, "information_gain_stats",
            lambda *a, **k: planner_mod.GainEstimate(gain=0.25, stderr=0.0, n_samples=1))
        chosen, _, _ = select_skill(Belief.uniform(2), ("s2", "s1"), dbs, fpfs,
                                    PLAN, CFG, np.random.default_rng(0))
        assert chosen == "s2"  # first in the given ordering

    def test_discriminating_skill_wins(self):
        _, _, dbs, fpfs = toy_setup({"s1": ("f1", "f2"), "s2": ("f2",)}, F=3)
        belief = Belief(np.array([0.5, 0.5, 0.0]))
        chosen, _, gains = select_skill(belief, ("s1", "s2"), dbs, fpfs, PLAN, CFG,
                                        np.random.default_rng(2))
        assert chosen == "s2"
        assert gains["s2"].gain > gains["s1"].gain

    def test_thread_cap_respected(self, monkeypatch):
        monkeypatch.setenv("BLAMEBOX_THREADS", "1")
        _, _, dbs, fpfs = toy_setup({"s1": ("f1",), "s2": ("f2",)})
        chosen, _, _ = select_skill(Belief.uniform(2), ("s1", "s2"), dbs, fpfs,
                                    PLAN, CFG, np.random.default_rng(1))
        monkeypatch.setenv("BLAMEBOX_THREADS", "8")
        chosen2, _, _ = select_skill(Belief.uniform(2), ("s1", "s2"), dbs, fpfs,
                                     PLAN, CFG, np.random.default_rng(1))
        assert chosen == chosen2  # parallelism does not change the outcome


class TestLoop:
    def _world(self, used_by_skill, buggy, F=4, seed=0, n=20):
        registry, specs, dbs, fpfs = toy_setup(used_by_skill, F=F, T=8, n=n, seed=seed)
        world = SimWorld(registry=registry, buggy_functions=frozenset(buggy))
        executor = SimExecutor(specs, world, seed=seed + 100)
        return registry, executor, dbs, fpfs

    def test_identifies_buggy_function(self):
        registry, executor, dbs, fpfs = self._world(
            {"s1": ("f1", "f2"), "s2": ("f2", "f3")}, buggy=("f2",))
        plan = PlannerConfig(samples_per_observation=16, max_iterations=30, seed=3)
        belief, trace = run_testing_loop(executor, ("s1", "s2"), dbs, fpfs, None,
                                         plan, CFG)
        assert registry.names[int(np.argmax(belief.probs))] == "f2"
        assert trace.aborted is None

    def test_deterministic_given_seed(self):
        def run():
            _, executor, dbs, fpfs = self._world(
                {"s1": ("f1", "f2"), "s2": ("f2", "f3")}, buggy=("f2",))
            plan = PlannerConfig(samples_per_observation=8, max_iterations=12, seed=5)
            return run_testing_loop(executor, ("s1", "s2"), dbs, fpfs, None, plan, CFG)

        (b1, t1), (b2, t2) = run(), run()
        assert np.array_equal(b1.probs, b2.probs)
        assert [s.chosen for s in t1.steps] == [s.chosen for s in t2.steps]
        for a, b in zip(t1.steps, t2.steps):
            assert np.array_equal(a.posterior, b.posterior)
            assert a.gains == b.gains

    def test_bug_free_world_suppresses_used_functions(self):
        registry, executor, dbs, fpfs = self._world(
            {"s1": ("f1", "f2")}, buggy=(), F=4)
        plan = PlannerConfig(samples_per_observation=8, max_iterations=6,
                             convergence_epsilon=1e-12, seed=1)
        belief, trace = run_testing_loop(executor, ("s1",), dbs, fpfs, None, plan, CFG)
        assert all(s.success for s in trace.steps)
        used = belief.probs[[0, 1]]
        untouched = belief.probs[[2, 3]]
        assert used.max() < untouched.min()

    def test_terminates_at_max_iterations(self):
        _, executor, dbs, fpfs = self._world({"s1": ("f1", "f2")}, buggy=("f1",))
        plan = PlannerConfig(samples_per_observation=4, max_iterations=5,
                             convergence_epsilon=1e-12, seed=0)
        _, trace = run_testing_loop(executor, ("s1",), dbs, fpfs, None, plan, CFG)
        assert len(trace.steps) == 5 and not trace.converged

    def test_converges_and_stops(self):
        _, executor, dbs, fpfs = self._world(
            {"s1": ("f1", "f2"), "s2": ("f2", "f3")}, buggy=("f2",))
        plan = PlannerConfig(samples_per_observation=16, max_iterations=50, seed=2)
        _, trace = run_testing_loop(executor, ("s1", "s2"), dbs, fpfs, None, plan, CFG)
        assert trace.converged
        assert len(trace.steps) < 50

    def test_executor_failure_aborts_with_trace(self):
        class Flaky:
            def __init__(self, inner, fail_after):
                self.inner, self.n, self.fail_after = inner, 0, fail_after

            def execute(self, skill):
                self.n += 1
                if self.n > self.fail_after:
                    raise ExecutorError("hardware unavailable")
                return self.inner.execute(skill)

        _, executor, dbs, fpfs = self._world({"s1": ("f1", "f2")}, buggy=("f1",))
        plan = PlannerConfig(samples_per_observation=4, max_iterations=10,
                             convergence_epsilon=1e-12, seed=0)
        _, trace = run_testing_loop(Flaky(executor, 3), ("s1",), dbs, fpfs, None,
                                    plan, CFG)
        assert trace.aborted == "hardware unavailable"
        assert len(trace.steps) == 3

    def test_missing_db_rejected(self):
        _, executor, dbs, fpfs = self._world({"s1": ("f1",)}, buggy=())
        with pytest.raises(ValidationError):
            run_testing_loop(executor, ("s1", "ghost"), dbs, fpfs, None, PLAN, CFG)

    def test_epsilon_mass_stays_suppressed(self):
        registry, executor, dbs, fpfs = self._world(
            {"s1": ("f1", "f2"), "s2": ("f3",)}, buggy=("f1",), F=4)
        plan = PlannerConfig(samples_per_observation=8, max_iterations=20, seed=4)
        belief, trace = run_testing_loop(executor, ("s1", "s2"), dbs, fpfs, None,
                                         plan, CFG)
        # f4 is never used by any skill: failures clear it and it must not recover
        assert belief.probs[3] < 1e-3


class TestExecutionResultTFail:
    def test_loop_uses_executor_t_fail_without_detector(self):
        _, executor, dbs, fpfs = self._records()
        plan = PlannerConfig(samples_per_observation=4, max_iterations=1, seed=0)
        _, trace = run_testing_loop(executor, ("s1",), dbs, fpfs, None, plan, CFG)
        assert trace.steps[0].t_fail == 5

    def _records(self):
        registry, specs, dbs, fpfs = toy_setup({"s1": ("f1",)}, F=2, T=8)

        class Fixed:
            def execute(self, skill):
                obs = dbs["s1"].observations[0]
                from blamebox.core import Observation
                failed = Observation(sensors=obs.sensors, fingerprint=obs.fingerprint,
                                     success=False, skill="s1")
                return ExecutionResult(observation=failed, success=False, t_fail=5)

        return registry, Fixed(), dbs, fpfs
