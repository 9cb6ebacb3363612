"""Shared domain types: function registry, sensor series, call-count
fingerprints, observations, and the per-skill experience database.

All types are plain containers; content validation lives in the
``validate_*`` functions so that loaders can build objects first and then
report precise errors (row/column) for bad data. Arrays are marked
read-only on construction, so validated objects can be shared freely.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import ValidationError

SkillId = str
FunctionId = str


def _as_matrix(data, what: str) -> np.ndarray:
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 2:
        raise ValidationError(f"{what} must be a 2-d matrix, got ndim={arr.ndim}")
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class FunctionRegistry:
    """Ordered set of function identifiers under study.

    Indices 0..F-1 are stable for the lifetime of a study; every matrix row
    and belief entry is aligned with this ordering.
    """

    names: tuple[FunctionId, ...]

    def __init__(self, names: Sequence[FunctionId]):
        names = tuple(str(n) for n in names)
        if len(names) == 0:
            raise ValidationError("registry needs at least one function")
        if len(set(names)) != len(names):
            raise ValidationError("function names must be unique")
        object.__setattr__(self, "names", names)

    @property
    def F(self) -> int:
        return len(self.names)

    def index(self, name: FunctionId) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise ValidationError(f"unknown function {name!r}") from None

    def indices(self, names: Sequence[FunctionId]) -> np.ndarray:
        return np.array([self.index(n) for n in names], dtype=np.intp)

    def __contains__(self, name: object) -> bool:
        return name in self.names

    def __len__(self) -> int:
        return len(self.names)


@dataclass(frozen=True)
class SensorSeries:
    """One execution's sensor record: rows are channels, columns timesteps."""

    data: np.ndarray
    dt: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "data", _as_matrix(self.data, "sensor data"))
        object.__setattr__(self, "dt", float(self.dt))

    @property
    def D(self) -> int:
        return self.data.shape[0]

    @property
    def T(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class Fingerprint:
    """Call-profile matrix: counts[i, t] is how many executions of function i
    were active during timestep t. Counts are kept real-valued so synthetic
    (Gaussian) and recorded profiles share one representation."""

    counts: np.ndarray
    dt: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "counts", _as_matrix(self.counts, "fingerprint counts"))
        object.__setattr__(self, "dt", float(self.dt))

    @property
    def F(self) -> int:
        return self.counts.shape[0]

    @property
    def T(self) -> int:
        return self.counts.shape[1]


@dataclass(frozen=True)
class Observation:
    """Everything recorded for one skill execution."""

    sensors: SensorSeries
    fingerprint: Fingerprint
    success: bool
    skill: SkillId


@dataclass(frozen=True)
class ExperienceDb:
    """Per-skill store of positive (successful) executions.

    ``canonical_T`` is fixed from the first ingested batch (its lower-median
    length); everything added later is canonicalized to it so per-timestep
    models stay well defined.
    """

    skill: SkillId
    observations: tuple[Observation, ...] = field(default_factory=tuple)
    canonical_T: int = 0

    @classmethod
    def from_observations(cls, skill: SkillId, observations: Sequence[Observation],
                          registry: FunctionRegistry) -> "ExperienceDb":
        obs = list(observations)
        if not obs:
            raise ValidationError("experience database needs at least one observation")
        for o in obs:
            validate_observation(o, registry)
            if not o.success:
                raise ValidationError(
                    f"experience databases hold successful executions only; "
                    f"got a failure for skill {o.skill!r}")
            if o.skill != skill:
                raise ValidationError(
                    f"observation for skill {o.skill!r} added to db of {skill!r}")
        lengths = sorted(o.fingerprint.T for o in obs)
        canonical_T = int(lengths[(len(lengths) - 1) // 2])
        canon = tuple(_canonicalize_observation(o, canonical_T) for o in obs)
        return cls(skill=skill, observations=canon, canonical_T=canonical_T)

    def with_added(self, obs: Observation, registry: FunctionRegistry) -> "ExperienceDb":
        validate_observation(obs, registry)
        if not obs.success:
            raise ValidationError("only successful executions belong in the experience db")
        return replace(self, observations=self.observations
                       + (_canonicalize_observation(obs, self.canonical_T),))

    def __len__(self) -> int:
        return len(self.observations)

    def counts_stack(self) -> np.ndarray:
        """(n, F, T) array of all stored fingerprints."""
        return np.stack([o.fingerprint.counts for o in self.observations])


def canonicalize_length(item, target_T: int):
    """Force a series or fingerprint to ``target_T`` timesteps.

    Shorter inputs are padded by repeating the final column, longer ones are
    truncated. Idempotent for matching lengths (the same object is returned).
    """
    if target_T < 1:
        raise ValidationError(f"target_T must be >= 1, got {target_T}")
    if isinstance(item, SensorSeries):
        mat, rebuild = item.data, lambda m: SensorSeries(m, dt=item.dt)
    elif isinstance(item, Fingerprint):
        mat, rebuild = item.counts, lambda m: Fingerprint(m, dt=item.dt)
    else:
        raise ValidationError(f"cannot canonicalize {type(item).__name__}")
    T = mat.shape[1]
    if T == 0:
        raise ValidationError("cannot canonicalize an empty (T == 0) matrix")
    if T == target_T:
        return item
    if T < target_T:
        pad = np.repeat(mat[:, -1:], target_T - T, axis=1)
        return rebuild(np.hstack([mat, pad]))
    return rebuild(mat[:, :target_T])


def _canonicalize_observation(obs: Observation, target_T: int) -> Observation:
    return Observation(
        sensors=canonicalize_length(obs.sensors, target_T),
        fingerprint=canonicalize_length(obs.fingerprint, target_T),
        success=obs.success,
        skill=obs.skill,
    )


def validate_series(series: SensorSeries) -> SensorSeries:
    d = series.data
    if d.shape[0] < 1 or d.shape[1] < 1:
        raise ValidationError(f"sensor series needs D >= 1 and T >= 1, got shape {d.shape}")
    if series.dt <= 0:
        raise ValidationError(f"sampling interval must be positive, got {series.dt}")
    bad = np.argwhere(~np.isfinite(d))
    if bad.size:
        r, c = bad[0]
        raise ValidationError(f"non-finite sensor value at channel {r}, timestep {c}")
    return series


def validate_fingerprint(fp: Fingerprint, registry: FunctionRegistry | None = None) -> Fingerprint:
    c = fp.counts
    if c.shape[0] < 1 or c.shape[1] < 1:
        raise ValidationError(f"fingerprint needs F >= 1 and T >= 1, got shape {c.shape}")
    if fp.dt <= 0:
        raise ValidationError(f"sampling interval must be positive, got {fp.dt}")
    bad = np.argwhere(~np.isfinite(c))
    if bad.size:
        r, t = bad[0]
        raise ValidationError(f"non-finite count at function {r}, timestep {t}")
    neg = np.argwhere(c < 0)
    if neg.size:
        r, t = neg[0]
        raise ValidationError(f"negative count {c[r, t]} at function {r}, timestep {t}")
    if registry is not None and fp.F != registry.F:
        raise ValidationError(
            f"fingerprint has {fp.F} function rows, registry has {registry.F}")
    return fp


def validate_observation(obs: Observation, registry: FunctionRegistry) -> Observation:
    """Return ``obs`` unchanged iff every invariant holds."""
    validate_series(obs.sensors)
    validate_fingerprint(obs.fingerprint, registry)
    if obs.sensors.T != obs.fingerprint.T:
        raise ValidationError(
            f"sensor series has T={obs.sensors.T} but fingerprint has T={obs.fingerprint.T}")
    return obs
