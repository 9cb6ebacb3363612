"""blamebox: Bayesian fault localization over autonomous skill executions.

A skill is an opaque test: running it yields success or failure plus a sensor
record and a function-call profile. From a database of successful runs the
package fits a recurrent-autoencoder observation model (failure times from
reconstruction-error statistics) and per-function Gaussian call-profile
fingerprints; a blame distribution over functions is updated after every
execution, and the next skill is chosen to maximize the expected information
gain about where the bug lives.
"""

from .blame import (Belief, UpdateRecord, bayes_update, coverage_indices,
                    entropy, likelihood, likelihood_vector)
from .core import (ExperienceDb, Fingerprint, FunctionRegistry, Observation,
                   SensorSeries, canonicalize_length, validate_fingerprint,
                   validate_observation, validate_series)
from .errors import (BlameboxError, ConfigError, ExecutorError, KindError,
                     ScenarioError, StoreError, ValidationError, VersionError)
from .fpf import (BlameConfig, FpfModel, deviation_mass, exec_weighted_mean,
                  expected_weighted_stats, fit_fpf)
from .harness import (AnomalySpec, BUILT_IN_SCENARIOS, ScenarioConfig,
                      ScenarioResult, SensorSynthSpec, SimExecutor, SimSkillSpec,
                      SimWorld, built_in_scenario, candidate_set, gen_fingerprint,
                      gen_sensor_suite, load_scenario, run_scenario,
                      simulate_execution)
from .mom import (ErrorStats, MomConfig, MomModel, cosine_objective,
                  detect_failure_time, error_series, fit_error_stats, init_model,
                  reconstruct, train)
from .planner import (ExecutionResult, GainEstimate, LoopStep, LoopTrace,
                      PlannerConfig, SkillCache, SkillExecutor,
                      expected_information_gain, information_gain_stats,
                      run_testing_loop, select_skill)
from .store import (MomBundle, ReplayExecutor, Study, load_db, load_model,
                    load_recorded, load_study, save_db, save_model,
                    save_recorded, save_study)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
