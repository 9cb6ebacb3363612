import numpy as np
import pytest

from blamebox import (AnomalySpec, FunctionRegistry, ScenarioError,
                      SensorSynthSpec, SimSkillSpec, SimWorld, ValidationError,
                      built_in_scenario, gen_fingerprint, gen_sensor_suite,
                      load_scenario, run_scenario, simulate_execution,
                      validate_observation)
from blamebox.harness import ScenarioConfig, build_database

REG6 = FunctionRegistry([f"f{i}" for i in range(1, 7)])


class TestGenFingerprint:
    def test_zero_sigma_gives_exact_rows(self):
        spec = SimSkillSpec(skill="a", used_functions=("f1", "f2"),
                            count_mu=1.0, count_sigma=0.0, T=4)
        fp = gen_fingerprint(spec, REG6, np.random.default_rng(0))
        assert np.array_equal(fp.counts[:2], np.ones((2, 4)))
        assert np.array_equal(fp.counts[2:], np.zeros((4, 4)))

    def test_unused_rows_exactly_zero(self):
        spec = SimSkillSpec(skill="a", used_functions=("f3",), T=16)
        fp = gen_fingerprint(spec, REG6, np.random.default_rng(1))
        used = REG6.index("f3")
        mask = np.ones(6, dtype=bool)
        mask[used] = False
        assert np.all(fp.counts[mask] == 0.0)

    def test_row_mean_converges_to_mu(self):
        # law of large numbers at T = 10^4, tolerance 5 sigma / sqrt(T)
        T, mu, sigma = 10_000, 2.0, 0.5
        spec = SimSkillSpec(skill="a", used_functions=("f1",), count_mu=mu,
                            count_sigma=sigma, T=T)
        fp = gen_fingerprint(spec, REG6, np.random.default_rng(7))
        assert abs(fp.counts[0].mean() - mu) <= 5 * sigma / np.sqrt(T)

    def test_counts_validate(self):
        spec = SimSkillSpec(skill="a", used_functions=("f1", "f5"), T=30)
        world = SimWorld(registry=REG6)
        res = simulate_execution(spec, world, np.random.default_rng(3))
        assert validate_observation(res.observation, REG6) is res.observation


class TestSimulateExecution:
    def test_success_is_set_logic(self):
        w = SimWorld(registry=REG6, buggy_functions=frozenset({"f2"}))
        rng = np.random.default_rng(0)
        uses_bug = SimSkillSpec(skill="a", used_functions=("f1", "f2"), T=8)
        clean = SimSkillSpec(skill="b", used_functions=("f3", "f4", "f6"), T=8)
        assert not simulate_execution(uses_bug, w, rng).success
        assert simulate_execution(clean, w, rng).success

    def test_bug_free_world_always_succeeds(self):
        w = SimWorld(registry=REG6)
        spec = SimSkillSpec(skill="a", used_functions=("f1", "f2"), T=8)
        assert simulate_execution(spec, w, np.random.default_rng(1)).success

    def test_failure_time_in_middle_half(self):
        w = SimWorld(registry=REG6, buggy_functions=frozenset({"f1"}))
        spec = SimSkillSpec(skill="a", used_functions=("f1",), T=100)
        rng = np.random.default_rng(5)
        for _ in range(50):
            res = simulate_execution(spec, w, rng)
            assert 25 <= res.t_fail < 75

    def test_unknown_buggy_function_rejected(self):
        with pytest.raises(ValidationError):
            SimWorld(registry=REG6, buggy_functions=frozenset({"nope"}))

    def test_build_database_is_all_success(self):
        spec = SimSkillSpec(skill="a", used_functions=("f1", "f2"), T=10)
        db = build_database(spec, REG6, np.random.default_rng(2), 8)
        assert len(db) == 8
        assert all(o.success for o in db.observations)


class TestSensorSuite:
    def test_negative_set_carries_shift(self):
        spec = SensorSynthSpec(channels=4, T=50,
                               anomaly=AnomalySpec(onset=30, magnitude=3.0))
        suite = gen_sensor_suite(spec, 3, 2, 2, np.random.default_rng(0))
        assert len(suite.train) == 3 and len(suite.positive) == 2
        assert suite.onset == 30

    def test_zero_magnitude_shift_is_no_op_anomaly(self):
        spec = SensorSynthSpec(channels=3, T=40,
                               anomaly=AnomalySpec(onset=20, magnitude=0.0))
        rng = np.random.default_rng(1)
        suite = gen_sensor_suite(spec, 2, 2, 2, rng)
        # same generative family: identical channel-wise value ranges
        neg = np.stack([s.data for s in suite.negative])
        pos = np.stack([s.data for s in suite.positive])
        assert abs(neg.mean() - pos.mean()) < 0.2

    def test_dropout_zeroes_channel(self):
        spec = SensorSynthSpec(channels=3, T=40,
                               anomaly=AnomalySpec(kind="channel-dropout", onset=10,
                                                   channel=1))
        suite = gen_sensor_suite(spec, 1, 1, 2, np.random.default_rng(2))
        for s in suite.negative:
            assert np.all(s.data[1, 10:] == 0.0)
            assert np.any(s.data[1, :10] != 0.0)

    def test_freeze_holds_onset_value(self):
        spec = SensorSynthSpec(channels=2, T=30,
                               anomaly=AnomalySpec(kind="freeze", onset=12))
        suite = gen_sensor_suite(spec, 1, 1, 1, np.random.default_rng(3))
        frozen = suite.negative[0].data
        assert np.all(frozen[:, 12:] == frozen[:, 12][:, None])

    def test_onset_must_precede_end(self):
        with pytest.raises(ValidationError):
            SensorSynthSpec(channels=2, T=30, anomaly=AnomalySpec(onset=30))

    def test_bad_kind_rejected(self):
        with pytest.raises(ValidationError):
            AnomalySpec(kind="meteor")


class TestScenarios:
    def test_unknown_name_lists_built_ins(self):
        with pytest.raises(ScenarioError, match="fig3"):
            load_scenario("nosuch")

    def test_round_trip_through_json(self, tmp_path):
        cfg = built_in_scenario("fig5", seed=9)
        d = cfg.to_dict()
        back = ScenarioConfig.from_dict(d)
        assert back.to_dict() == d

    def test_load_from_file(self, tmp_path):
        import json
        cfg = built_in_scenario("exoneration", seed=4)
        path = tmp_path / "scenario.json"
        path.write_text(json.dumps(cfg.to_dict()))
        loaded = load_scenario(str(path))
        assert loaded.name == "exoneration"
        assert loaded.buggy == ("planCartesianTrajectory",)

    def test_seed_override_on_file_load(self, tmp_path):
        import json
        cfg = built_in_scenario("fig5", seed=1)
        path = tmp_path / "s.json"
        path.write_text(json.dumps(cfg.to_dict()))
        loaded = load_scenario(str(path), seed=77)
        assert loaded.seed == 77

    def test_malformed_file_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"name": "x"}')
        with pytest.raises(ScenarioError):
            load_scenario(str(path))

    def test_fig3_shapes(self):
        cfg = built_in_scenario("fig3")
        assert len(cfg.functions) == 241
        assert dict(cfg.skills)["a2"] == ("f2", "f4", "f5")
        assert cfg.buggy == ("f2",)
        assert cfg.db_size == 70

    def test_small_scenario_runs_and_reports(self, tmp_path):
        cfg = ScenarioConfig(
            name="tiny",
            functions=("f1", "f2", "f3"),
            skills=(("a1", ("f1", "f2")), ("a2", ("f2", "f3"))),
            buggy=("f2",),
            db_size=10, T=20, seed=3)
        out = tmp_path / "report"
        res = run_scenario(cfg, out_dir=str(out))
        assert res.posterior_of("f2") > 0.5
        for name in ("gains.csv", "belief.csv", "trace.json", "summary.json", "run.json"):
            assert (out / name).exists()

    def test_same_seed_same_candidates(self):
        cfg = ScenarioConfig(
            name="tiny",
            functions=("f1", "f2", "f3"),
            skills=(("a1", ("f1", "f2")),),
            buggy=("f1",),
            db_size=8, T=16, seed=5)
        a = run_scenario(cfg)
        b = run_scenario(cfg)
        assert a.candidates == b.candidates
        assert np.array_equal(a.belief.probs, b.belief.probs)
