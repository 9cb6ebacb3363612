"""Persistence: experience databases, fingerprint/observation models, and
whole studies, plus a replay executor over recorded executions.

Matrices are stored as plain CSV (one row per function or channel, one column
per timestep, 17 significant digits so round-trips are value-exact); metadata
lives in JSON manifests. Every file is self-describing through ``format``,
``version`` and, for models, ``kind`` fields, and loading validates shapes
and contents rather than trusting them.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .core import (ExperienceDb, Fingerprint, FunctionRegistry, Observation,
                   SensorSeries, SkillId, validate_observation)
from .errors import ExecutorError, KindError, StoreError, ValidationError, VersionError
from .fpf import FpfModel
from .mom import ErrorStats, MomModel, _PARAM_FIELDS
from .planner import ExecutionResult

_DB_FORMAT = "blamebox-db"
_MODEL_FORMAT = "blamebox-model"
_STUDY_FORMAT = "blamebox-study"
_VERSION = 1
_FLOAT_FMT = "%.17g"


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _read_json(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise StoreError(f"{path} is not valid JSON: {exc}") from exc


def _check_header(payload: dict, expected_format: str, path: str) -> None:
    fmt = payload.get("format")
    if fmt != expected_format:
        raise StoreError(f"{path}: expected format {expected_format!r}, found {fmt!r}")
    version = payload.get("version")
    if version != _VERSION:
        raise VersionError(f"{path}: unsupported version {version!r} (supported: {_VERSION})")


def _save_matrix(path: str, mat: np.ndarray) -> None:
    np.savetxt(path, np.atleast_2d(mat), delimiter=",", fmt=_FLOAT_FMT)


def _load_matrix(path: str) -> np.ndarray:
    try:
        return np.loadtxt(path, delimiter=",", ndmin=2)
    except ValueError as exc:
        raise StoreError(f"{path}: unreadable matrix: {exc}") from exc


# ---------------------------------------------------------------------------
# Recorded executions and experience databases share one directory layout.

def _save_records(path: str, skill: SkillId, registry: FunctionRegistry,
                  records: Sequence[ExecutionResult], canonical_T: int, dt: float) -> None:
    os.makedirs(path, exist_ok=True)
    entries = []
    for i, rec in enumerate(records):
        sensors_file = f"obs_{i:04d}.sensors.csv"
        counts_file = f"obs_{i:04d}.counts.csv"
        _save_matrix(os.path.join(path, sensors_file), rec.observation.sensors.data)
        _save_matrix(os.path.join(path, counts_file), rec.observation.fingerprint.counts)
        entries.append({
            "sensors": sensors_file,
            "counts": counts_file,
            "success": bool(rec.success),
            "t_fail": None if rec.t_fail is None else int(rec.t_fail),
        })
    _write_json(os.path.join(path, "manifest.json"), {
        "format": _DB_FORMAT,
        "version": _VERSION,
        "skill": skill,
        "canonical_T": int(canonical_T),
        "dt": float(dt),
        "functions": list(registry.names),
        "observations": entries,
    })


def _load_records(path: str) -> tuple[SkillId, FunctionRegistry, float, int,
                                      list[ExecutionResult]]:
    manifest_path = os.path.join(path, "manifest.json")
    manifest = _read_json(manifest_path)
    _check_header(manifest, _DB_FORMAT, manifest_path)
    registry = FunctionRegistry(manifest["functions"])
    skill = manifest["skill"]
    dt = float(manifest["dt"])
    canonical_T = int(manifest["canonical_T"])
    records = []
    for entry in manifest["observations"]:
        counts_file = os.path.join(path, entry["counts"])
        sensors_file = os.path.join(path, entry["sensors"])
        obs = Observation(
            sensors=SensorSeries(_load_matrix(sensors_file), dt=dt),
            fingerprint=Fingerprint(_load_matrix(counts_file), dt=dt),
            success=bool(entry["success"]),
            skill=skill,
        )
        try:
            validate_observation(obs, registry)
        except ValidationError as exc:
            raise ValidationError(f"{counts_file}: {exc}") from exc
        t_fail = entry.get("t_fail")
        records.append(ExecutionResult(observation=obs, success=obs.success,
                                       t_fail=None if t_fail is None else int(t_fail)))
    return skill, registry, dt, canonical_T, records


def save_db(db: ExperienceDb, path: str, registry: FunctionRegistry) -> None:
    records = [ExecutionResult(observation=o, success=o.success) for o in db.observations]
    _save_records(path, db.skill, registry, records, db.canonical_T,
                  db.observations[0].fingerprint.dt if db.observations else 1.0)


def load_db(path: str) -> ExperienceDb:
    """Load and validate an experience database (successful runs only)."""
    skill, registry, _, _, records = _load_records(path)
    return ExperienceDb.from_observations(skill, [r.observation for r in records], registry)


def save_recorded(records: Sequence[ExecutionResult], path: str, skill: SkillId,
                  registry: FunctionRegistry, dt: float) -> None:
    """Persist raw executions (successes and failures) for later replay."""
    T = records[0].observation.fingerprint.T if records else 0
    _save_records(path, skill, registry, records, T, dt)


def load_recorded(path: str) -> list[ExecutionResult]:
    return _load_records(path)[4]


class ReplayExecutor:
    """Feed recorded executions back to the testing loop, in stored order.

    Requesting a skill more often than it was recorded raises
    :class:`ExecutorError`, which aborts the loop with the trace so far.
    """

    def __init__(self, recorded: Mapping[SkillId, Sequence[ExecutionResult]]):
        self._queues = {skill: list(records) for skill, records in recorded.items()}
        self._cursors = {skill: 0 for skill in self._queues}

    def execute(self, skill: SkillId) -> ExecutionResult:
        if skill not in self._queues:
            raise ExecutorError(f"no recorded executions for skill {skill!r}")
        i = self._cursors[skill]
        if i >= len(self._queues[skill]):
            raise ExecutorError(f"recorded executions for skill {skill!r} exhausted")
        self._cursors[skill] = i + 1
        return self._queues[skill][i]


# ---------------------------------------------------------------------------
# Model files.

@dataclass(frozen=True)
class MomBundle:
    """An observation model plus whatever was fitted alongside it."""

    model: MomModel
    error_stats: ErrorStats | None = None


def save_model(model: FpfModel | MomModel | MomBundle, path: str) -> None:
    if isinstance(model, MomBundle):
        bundle = model
        model = bundle.model
    else:
        bundle = None
    payload: dict = {"format": _MODEL_FORMAT, "version": _VERSION}
    if isinstance(model, FpfModel):
        payload.update(kind="fpf", n_samples=model.n_samples, var_floor=model.var_floor,
                       mean=model.mean.tolist(), var=model.var.tolist())
    elif isinstance(model, MomModel):
        payload.update(
            kind="mom",
            params={name: getattr(model, name).tolist() for name in _PARAM_FIELDS},
            norm_lo=model.norm_lo.tolist(),
            norm_hi=model.norm_hi.tolist(),
            loss_history=list(model.loss_history),
        )
        stats = bundle.error_stats if bundle else None
        payload["error_stats"] = (None if stats is None else
                                  {"mu": stats.mu.tolist(), "sigma": stats.sigma.tolist()})
    else:
        raise StoreError(f"cannot save object of type {type(model).__name__}")
    _write_json(path, payload)


def load_model(path: str, expect: str | None = None):
    """Load a model file; returns FpfModel or MomBundle depending on its kind.

    ``expect`` ("fpf" or "mom") turns a kind mismatch into :class:`KindError`.
    """
    payload = _read_json(path)
    _check_header(payload, _MODEL_FORMAT, path)
    kind = payload.get("kind")
    if expect is not None and kind != expect:
        raise KindError(f"{path}: holds a {kind!r} model, expected {expect!r}")
    if kind == "fpf":
        try:
            return FpfModel(mean=np.array(payload["mean"], dtype=np.float64),
                            var=np.array(payload["var"], dtype=np.float64),
                            n_samples=int(payload["n_samples"]),
                            var_floor=float(payload["var_floor"]))
        except (KeyError, ValidationError) as exc:
            raise StoreError(f"{path}: bad fingerprint model: {exc}") from exc
    if kind == "mom":
        try:
            params = {name: np.array(payload["params"][name], dtype=np.float64)
                      for name in _PARAM_FIELDS}
            model = MomModel(**params,
                             norm_lo=np.array(payload["norm_lo"], dtype=np.float64),
                             norm_hi=np.array(payload["norm_hi"], dtype=np.float64),
                             loss_history=tuple(payload.get("loss_history", ())))
            stats = payload.get("error_stats")
            es = None if stats is None else ErrorStats(
                mu=np.array(stats["mu"], dtype=np.float64),
                sigma=np.array(stats["sigma"], dtype=np.float64))
            return MomBundle(model=model, error_stats=es)
        except (KeyError, ValidationError) as exc:
            raise StoreError(f"{path}: bad observation model: {exc}") from exc
    raise KindError(f"{path}: unknown model kind {kind!r}")


# ---------------------------------------------------------------------------
# Studies: a directory bundling registry, per-skill databases, and optional
# recorded executions for replay.

@dataclass
class Study:
    registry: FunctionRegistry
    skills: tuple[SkillId, ...]
    dbs: dict[SkillId, ExperienceDb]
    dt: float
    replay: dict[SkillId, list[ExecutionResult]]


def save_study(path: str, registry: FunctionRegistry,
               dbs: Mapping[SkillId, ExperienceDb], dt: float,
               replay: Mapping[SkillId, Sequence[ExecutionResult]] | None = None) -> None:
    os.makedirs(path, exist_ok=True)
    skills = sorted(dbs)
    db_paths, replay_paths = {}, {}
    for skill in skills:
        rel = os.path.join("dbs", skill)
        save_db(dbs[skill], os.path.join(path, rel), registry)
        db_paths[skill] = rel
    for skill in sorted(replay or {}):
        rel = os.path.join("replay", skill)
        save_recorded(list(replay[skill]), os.path.join(path, rel), skill, registry, dt)
        replay_paths[skill] = rel
    _write_json(os.path.join(path, "manifest.json"), {
        "format": _STUDY_FORMAT,
        "version": _VERSION,
        "functions": list(registry.names),
        "skills": skills,
        "dt": float(dt),
        "dbs": db_paths,
        "replay": replay_paths,
    })


def load_study(path: str) -> Study:
    manifest_path = os.path.join(path, "manifest.json")
    manifest = _read_json(manifest_path)
    _check_header(manifest, _STUDY_FORMAT, manifest_path)
    registry = FunctionRegistry(manifest["functions"])
    skills = tuple(manifest["skills"])
    dbs = {}
    for skill in skills:
        rel = manifest["dbs"].get(skill)
        if rel is None:
            raise StoreError(f"{manifest_path}: no database listed for skill {skill!r}")
        if registry.names != load_db_registry(os.path.join(path, rel)).names:
            raise StoreError(f"{manifest_path}: registry mismatch in {rel}")
        dbs[skill] = load_db(os.path.join(path, rel))
    replay = {skill: load_recorded(os.path.join(path, rel))
              for skill, rel in manifest.get("replay", {}).items()}
    return Study(registry=registry, skills=skills, dbs=dbs,
                 dt=float(manifest["dt"]), replay=replay)


def load_db_registry(path: str) -> FunctionRegistry:
    manifest_path = os.path.join(path, "manifest.json")
    manifest = _read_json(manifest_path)
    _check_header(manifest, _DB_FORMAT, manifest_path)
    return FunctionRegistry(manifest["functions"])
