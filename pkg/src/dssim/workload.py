"""Streaming job generation.

Jobs (DAG instances) arrive under a seeded stochastic process. Inter-arrival
times are exponential by default (fixed-interval is available for
deterministic experiments); the application of each job is drawn from a
configured mixture.

Randomness comes from numpy's PCG64 generator. The workload seed feeds a
SeedSequence that is split into two independent streams, one for
inter-arrival draws and one for mixture draws, so enabling or disabling
either never perturbs the other.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .resources import ConfigError, ValidationError

DISTRIBUTIONS = ("exponential", "fixed")

PROBABILITY_TOL = 1e-9


@dataclass(frozen=True)
class WorkloadSpec:
    """Mixture, injection rate, stopping condition, and seed for one run."""

    mixture: tuple[tuple[str, float], ...]
    rate_jobs_per_ms: float
    jobs: int | None = None
    duration_us: float | None = None
    seed: int = 0
    distribution: str = "exponential"

    def __post_init__(self):
        if not self.mixture:
            raise ValidationError("workload mixture is empty")
        total = 0.0
        for name, prob in self.mixture:
            if prob < 0:
                raise ValidationError(f"negative probability for {name!r}")
            total += prob
        if abs(total - 1.0) > PROBABILITY_TOL:
            raise ValidationError(f"mixture probabilities sum to {total}, expected 1")
        if self.rate_jobs_per_ms <= 0:
            raise ValidationError("rate_jobs_per_ms must be > 0")
        if (self.jobs is None) == (self.duration_us is None):
            raise ValidationError("exactly one of jobs / duration_us must be set")
        if self.jobs is not None and self.jobs < 0:
            raise ValidationError("jobs must be >= 0")
        if self.duration_us is not None and self.duration_us <= 0:
            raise ValidationError("duration_us must be > 0")
        if self.distribution not in DISTRIBUTIONS:
            raise ValidationError(f"unknown distribution {self.distribution!r}")

    @property
    def mean_interarrival_ns(self) -> float:
        return 1e6 / self.rate_jobs_per_ms


@dataclass(frozen=True)
class Job:
    """One streamed instance of an application."""

    job_id: int
    app_name: str
    arrival_ns: int


class JobSource:
    """Deterministic arrival stream for a WorkloadSpec.

    Two PCG64 streams are spawned from the seed: stream 0 draws inter-arrival
    times, stream 1 draws the application mixture.
    """

    def __init__(self, spec: WorkloadSpec):
        self.spec = spec
        seq = np.random.SeedSequence(spec.seed)
        arrival_seq, mixture_seq = seq.spawn(2)
        self._rng_arrival = np.random.Generator(np.random.PCG64(arrival_seq))
        self._rng_mixture = np.random.Generator(np.random.PCG64(mixture_seq))
        self._names = [name for name, _ in spec.mixture]
        self._cum = np.cumsum([prob for _, prob in spec.mixture])
        self._next_id = 0
        self._clock_ns = 0

    def _draw_interarrival_ns(self) -> int:
        mean = self.spec.mean_interarrival_ns
        if self.spec.distribution == "fixed":
            return round(mean)
        return round(self._rng_arrival.exponential(mean))

    def _draw_app(self) -> str:
        u = self._rng_mixture.random()
        idx = int(np.searchsorted(self._cum, u, side="right"))
        return self._names[min(idx, len(self._names) - 1)]

    def __iter__(self):
        return self

    def __next__(self) -> Job:
        spec = self.spec
        if spec.jobs is not None and self._next_id >= spec.jobs:
            raise StopIteration
        self._clock_ns += self._draw_interarrival_ns()
        if spec.duration_us is not None and self._clock_ns > spec.duration_us * 1000:
            raise StopIteration
        job = Job(self._next_id, self._draw_app(), self._clock_ns)
        self._next_id += 1
        return job


def next_arrival(source: JobSource) -> Job | None:
    """Pull the next job from the stream, or None once the stop rule hits."""
    try:
        return next(source)
    except StopIteration:
        return None


# Workload mixtures used by the bundled scheduler comparison studies.
_STUDY_MIXTURES = {
    "fig11a": (("wifi-tx", 0.2), ("wifi-rx", 0.8)),
    "fig11b": (("wifi-tx", 0.8), ("wifi-rx", 0.2)),
    "fig11c": (("range-detection", 0.8), ("pulse-doppler", 0.2)),
    "fig11d": (("wifi-tx", 0.3), ("wifi-rx", 0.3),
               ("range-detection", 0.3), ("pulse-doppler", 0.1)),
}


def mixture_for_study(study: str, rate_jobs_per_ms: float = 1.0,
                      jobs: int = 1000, seed: int = 1) -> WorkloadSpec:
    """Preset application mixtures for the bundled case studies."""
    try:
        mixture = _STUDY_MIXTURES[study]
    except KeyError:
        raise ValidationError(
            f"unknown study {study!r}; known: {sorted(_STUDY_MIXTURES)}") from None
    return WorkloadSpec(mixture=mixture, rate_jobs_per_ms=rate_jobs_per_ms,
                        jobs=jobs, seed=seed)


_WORKLOAD_KEYS = {"mixture", "rate_jobs_per_ms", "jobs", "duration_us", "seed",
                  "distribution", "name"}


def parse_workload(raw: dict, source: str = "<dict>") -> WorkloadSpec:
    unknown = set(raw) - _WORKLOAD_KEYS
    if unknown:
        raise ValidationError(f"unknown key(s) {sorted(unknown)} in {source}")
    if "mixture" not in raw or "rate_jobs_per_ms" not in raw:
        raise ValidationError(f"workload needs mixture and rate_jobs_per_ms in {source}")
    mixture = tuple(sorted((str(k), float(v)) for k, v in raw["mixture"].items()))
    return WorkloadSpec(
        mixture=mixture,
        rate_jobs_per_ms=float(raw["rate_jobs_per_ms"]),
        jobs=int(raw["jobs"]) if raw.get("jobs") is not None else None,
        duration_us=float(raw["duration_us"]) if raw.get("duration_us") is not None else None,
        seed=int(raw.get("seed", 0)),
        distribution=str(raw.get("distribution", "exponential")),
    )


def load_workload(path: str | Path) -> WorkloadSpec:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read workload {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
    return parse_workload(raw, source=str(path))


def workload_to_dict(spec: WorkloadSpec) -> dict:
    out = {
        "mixture": {name: prob for name, prob in spec.mixture},
        "rate_jobs_per_ms": spec.rate_jobs_per_ms,
        "seed": spec.seed,
        "distribution": spec.distribution,
    }
    if spec.jobs is not None:
        out["jobs"] = spec.jobs
    if spec.duration_us is not None:
        out["duration_us"] = spec.duration_us
    return out
