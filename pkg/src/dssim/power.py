"""Power, thermal, and DVFS governor models.

Dynamic power follows the switching law C * V^2 * A * f. Static power is a
linear-in-temperature leakage approximation V * (a*T + b). Each cluster has
a first-order RC thermal node; crossing the trip temperature throttles the
whole cluster to its minimum operating point until the temperature falls
below trip minus hysteresis.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .resources import (OppPoint, PeDescriptor, PowerParams, SocConfig,
                        ThermalParams, ValidationError)

DEFAULT_ONDEMAND_THRESHOLDS = (0.3, 0.8)


def dynamic_power(params: PowerParams, opp: OppPoint, activity: float) -> float:
    """Dynamic watts at one operating point.

    `activity` is the effective switching activity in [0, 1], i.e. the busy
    fraction over the accounting interval times the configured activity
    factor. Idle silicon (activity 0) burns zero dynamic power.
    """
    return params.cap_f * opp.voltage_v ** 2 * activity * opp.frequency_hz


def static_power(params: PowerParams, voltage_v: float, temp_c: float) -> float:
    """Leakage watts at a given rail voltage and silicon temperature."""
    return max(0.0, voltage_v * (params.leak_a * temp_c + params.leak_b))


def step_thermal(model: ThermalParams, total_power_w: float, dt_us: float,
                 t_prev_c: float) -> float:
    """One forward-Euler step of the cluster RC node over dt microseconds."""
    if dt_us <= 0:
        raise ValueError("dt_us must be > 0")
    dt_s = dt_us * 1e-6
    tau = model.r_k_per_w * model.c_j_per_k
    return t_prev_c + (dt_s / tau) * (
        model.r_k_per_w * total_power_w + model.ambient_c - t_prev_c)


def ondemand_step(current_index: int, n_opps: int, utilization: float,
                  thresholds: tuple[float, float] = DEFAULT_ONDEMAND_THRESHOLDS) -> int:
    """Utilization-driven OPP choice.

    Below the low threshold the OPP steps down by one; above the high
    threshold it jumps straight to the maximum; otherwise it holds. The
    asymmetry (single-step down, jump-to-max up) is deliberate: ramping up
    lazily costs latency, ramping down lazily only costs a little power.
    """
    lo, hi = thresholds
    if not lo < hi:
        raise ValueError("ondemand thresholds must satisfy lo < hi")
    if utilization < lo:
        return max(0, current_index - 1)
    if utilization > hi:
        return n_opps - 1
    return current_index


def fixed_governor_index(policy: str, n_opps: int) -> int | None:
    """OPP index for the static policies; None for ondemand."""
    if policy == "performance":
        return n_opps - 1
    if policy == "powersave":
        return 0
    if policy.startswith("fixed:"):
        idx = int(policy.split(":", 1)[1])
        if not 0 <= idx < n_opps:
            raise ValidationError(f"fixed OPP index {idx} out of range")
        return idx
    if policy == "ondemand":
        return None
    raise ValidationError(f"unknown dvfs_policy {policy!r}")


def initial_opp_index(policy: str, n_opps: int) -> int:
    """OPP applied before the first DTPM epoch. Ondemand starts at maximum."""
    idx = fixed_governor_index(policy, n_opps)
    return n_opps - 1 if idx is None else idx


@dataclass
class ClusterThermalState:
    params: ThermalParams
    temp_c: float
    throttled: bool = False

    def step(self, total_power_w: float, dt_us: float) -> float:
        self.temp_c = step_thermal(self.params, total_power_w, dt_us, self.temp_c)
        if self.temp_c >= self.params.trip_c:
            self.throttled = True
        elif self.throttled and self.temp_c < self.params.trip_c - self.params.hysteresis_c:
            self.throttled = False
        return self.temp_c


@dataclass
class DtpmController:
    """Epoch-driven governor and thermal bookkeeping for one kernel instance."""

    soc: SocConfig
    governor_override: str | None = None
    ondemand_thresholds: tuple[float, float] = DEFAULT_ONDEMAND_THRESHOLDS
    clusters: dict[str, ClusterThermalState] = field(default_factory=dict)

    def __post_init__(self):
        for cluster in self.soc.clusters():
            params = self.soc.thermal_for(cluster)
            self.clusters[cluster] = ClusterThermalState(params=params,
                                                         temp_c=params.ambient_c)

    def policy_for(self, pe: PeDescriptor) -> str:
        return self.governor_override or pe.dvfs_policy

    def initial_index(self, pe: PeDescriptor) -> int:
        return initial_opp_index(self.policy_for(pe), len(pe.opps))

    def next_index(self, pe: PeDescriptor, current_index: int, utilization: float) -> int:
        """Governor output for the next epoch, honoring thermal throttling."""
        if self.clusters[pe.cluster].throttled:
            return 0
        policy = self.policy_for(pe)
        fixed = fixed_governor_index(policy, len(pe.opps))
        if fixed is not None:
            return fixed
        return ondemand_step(current_index, len(pe.opps), utilization,
                             self.ondemand_thresholds)

    def step_cluster(self, cluster: str, total_power_w: float, dt_us: float) -> float:
        return self.clusters[cluster].step(total_power_w, dt_us)

    def temperature(self, cluster: str) -> float:
        return self.clusters[cluster].temp_c

    def is_throttled(self, cluster: str) -> bool:
        return self.clusters[cluster].throttled
