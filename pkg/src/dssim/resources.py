"""Processing elements, SoC configurations, and the resource database.

An SoC is described by a JSON file listing its processing elements (general
purpose cores and fixed-function accelerators), the NoC and DRAM contention
models, thermal parameters per cluster, and the DTPM epoch. Configurations
are immutable after loading and safe to share across simulation instances.
"""
from __future__ import annotations

import json
import warnings
from collections import deque
from dataclasses import dataclass, field, replace
from pathlib import Path

from .timebase import us_to_ns

GENERAL_CORE = "general-core"
ACCELERATOR = "accelerator"

PE_TYPES = (GENERAL_CORE, ACCELERATOR)
BASE_DVFS_POLICIES = ("ondemand", "performance", "powersave")

# Default DTPM epoch. Epochs outside DTPM_EPOCH_RANGE_US are accepted with a
# warning; the range reflects common practice for low-overhead management.
DEFAULT_DTPM_EPOCH_US = 20_000.0
DTPM_EPOCH_RANGE_US = (10_000.0, 100_000.0)


class ConfigError(Exception):
    """Raised for malformed or inconsistent configuration input."""


class ValidationError(ConfigError):
    """A configuration field failed validation; message names the field."""


@dataclass(frozen=True)
class OppPoint:
    """One operating performance point: a supported (voltage, frequency) pair."""

    voltage_v: float
    frequency_hz: int

    @property
    def frequency_mhz(self) -> float:
        return self.frequency_hz / 1e6


@dataclass(frozen=True)
class PowerParams:
    """Per-PE power model coefficients.

    Dynamic power is cap_f * V^2 * activity * f. Static (leakage) power is
    V * (leak_a * T_celsius + leak_b), clamped at zero.
    """

    cap_f: float
    activity: float
    leak_a: float
    leak_b: float


@dataclass(frozen=True)
class PeDescriptor:
    """Static attributes of one processing element."""

    pe_id: int
    name: str
    pe_type: str
    subtype: str
    capacity: int
    opps: tuple[OppPoint, ...]
    latency_profile_us: dict[str, float]
    power: PowerParams
    area_mm2: float
    dvfs_policy: str
    cluster: str

    def supports(self, kind: str) -> bool:
        return kind in self.latency_profile_us

    @property
    def max_opp_index(self) -> int:
        return len(self.opps) - 1

    @property
    def max_frequency_hz(self) -> int:
        return self.opps[-1].frequency_hz

    def latency_ns(self, kind: str) -> int:
        """Profile latency at the reference (maximum frequency) OPP, in ns."""
        return us_to_ns(self.latency_profile_us[kind])


class UnsupportedTaskError(ConfigError):
    """A task kind was requested on a PE that does not implement it."""

    def __init__(self, pe: PeDescriptor, kind: str):
        super().__init__(f"PE {pe.pe_id} ({pe.name}) does not support task kind {kind!r}")
        self.pe_id = pe.pe_id
        self.kind = kind


def scaled_latency_ns(pe: PeDescriptor, kind: str, opp_index: int) -> int:
    """Execution time of `kind` on `pe` at OPP `opp_index`, integer ns.

    Latency profiles are measured at the PE's maximum OPP; lower frequencies
    scale execution time by f_max / f (integer arithmetic, round to nearest).
    """
    if not pe.supports(kind):
        raise UnsupportedTaskError(pe, kind)
    if not 0 <= opp_index < len(pe.opps):
        raise ValidationError(f"opp_index {opp_index} out of range for PE {pe.pe_id}")
    base = pe.latency_ns(kind)
    f = pe.opps[opp_index].frequency_hz
    f_max = pe.max_frequency_hz
    return (base * f_max + f // 2) // f


def scaled_latency(pe: PeDescriptor, kind: str, opp_index: int) -> float:
    """Same as scaled_latency_ns but reported in microseconds."""
    return scaled_latency_ns(pe, kind, opp_index) / 1000.0


@dataclass
class PeRuntimeState:
    """Mutable per-PE bookkeeping owned by a single kernel instance."""

    pe: PeDescriptor
    opp_index: int = 0
    busy_slots: int = 0
    busy_ns: int = 0              # lifetime slot-weighted busy integral
    last_change_ns: int = 0
    window_samples: deque = field(default_factory=lambda: deque(maxlen=64))
    busy_when_ready: int = 0      # blocking numerator
    ready_observations: int = 0   # blocking denominator

    def accumulate_busy(self, now_ns: int) -> None:
        """Fold the busy integral forward to `now_ns` before a slot change."""
        if now_ns > self.last_change_ns:
            self.busy_ns += self.busy_slots * (now_ns - self.last_change_ns)
            self.last_change_ns = now_ns

    def utilization_since(self, busy_snapshot_ns: int, t0_ns: int, now_ns: int) -> float:
        """Slot-weighted utilization over [t0, now] given a busy snapshot at t0."""
        if now_ns <= t0_ns:
            return 0.0
        span = (now_ns - t0_ns) * self.pe.capacity
        return min(1.0, (self.busy_ns - busy_snapshot_ns) / span)

    def blocking(self) -> tuple[float, bool]:
        """(blocking probability, has_data). Zero with has_data=False if unobserved."""
        if self.ready_observations == 0:
            return 0.0, False
        return self.busy_when_ready / self.ready_observations, True


def record_blocking_observation(state: PeRuntimeState, pe_busy: bool) -> PeRuntimeState:
    """Record one (ready task, candidate PE) observation; returns the state."""
    state.ready_observations += 1
    if pe_busy:
        state.busy_when_ready += 1
    return state


def _interp_table(table: tuple[tuple[float, int], ...], x: float) -> tuple[int, bool]:
    """Piecewise-linear lookup with clamping. Returns (value, clamped_high)."""
    if x <= table[0][0]:
        return table[0][1], False
    if x >= table[-1][0]:
        return table[-1][1], x > table[-1][0]
    for (x0, y0), (x1, y1) in zip(table, table[1:]):
        if x0 <= x <= x1:
            if x1 == x0:
                return y1, False
            frac = (x - x0) / (x1 - x0)
            return round(y0 + frac * (y1 - y0)), False
    return table[-1][1], True


@dataclass(frozen=True)
class NocModel:
    """Interconnect model: fixed bandwidth plus a load-dependent latency table.

    `load_latency` maps a load fraction in [0, 1] (in-flight inter-PE
    transfers over `link_capacity`) to an added latency in ns; lookups
    interpolate linearly and clamp at the ends.
    """

    bandwidth_bytes_per_us: int
    load_latency: tuple[tuple[float, int], ...]
    link_capacity: int

    def latency_ns(self, load: float) -> int:
        return _interp_table(self.load_latency, load)[0]

    def transfer_ns(self, volume_bytes: int, load: float) -> int:
        return (volume_bytes * 1000) // self.bandwidth_bytes_per_us + self.latency_ns(load)


@dataclass(frozen=True)
class DramModel:
    """Bandwidth to latency lookup fed by a sliding window of memory requests."""

    window_ns: int
    table: tuple[tuple[float, int], ...]   # (bandwidth bytes/us, latency ns)

    def latency_ns(self, bandwidth_bytes_per_us: float) -> tuple[int, bool]:
        """Returns (latency ns, saturated) where saturated marks clamping
        beyond the last knot."""
        return _interp_table(self.table, bandwidth_bytes_per_us)


@dataclass(frozen=True)
class ThermalParams:
    """First-order RC node for one cluster."""

    r_k_per_w: float
    c_j_per_k: float
    ambient_c: float = 25.0
    trip_c: float = 95.0
    hysteresis_c: float = 5.0


DEFAULT_THERMAL = ThermalParams(r_k_per_w=17.5, c_j_per_k=0.05)


@dataclass(frozen=True)
class SocConfig:
    """A validated SoC description. Immutable after load."""

    name: str
    pes: tuple[PeDescriptor, ...]
    noc: NocModel
    dram: DramModel
    uncore_area_mm2: float
    dtpm_epoch_us: float
    thermal: dict[str, ThermalParams]
    extra_task_kinds: tuple[str, ...] = ()

    @property
    def dtpm_epoch_ns(self) -> int:
        return us_to_ns(self.dtpm_epoch_us)

    def pe_by_id(self, pe_id: int) -> PeDescriptor:
        for pe in self.pes:
            if pe.pe_id == pe_id:
                return pe
        raise KeyError(pe_id)

    def clusters(self) -> list[str]:
        seen: list[str] = []
        for pe in self.pes:
            if pe.cluster not in seen:
                seen.append(pe.cluster)
        return seen

    def thermal_for(self, cluster: str) -> ThermalParams:
        return self.thermal.get(cluster, self.thermal.get("default", DEFAULT_THERMAL))

    def supporting_pes(self, kind: str) -> list[PeDescriptor]:
        return [pe for pe in self.pes if pe.supports(kind)]


def _require_keys(obj: dict, allowed: set[str], required: set[str], where: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise ValidationError(f"unknown key(s) {sorted(unknown)} in {where}")
    missing = required - set(obj)
    if missing:
        raise ValidationError(f"missing key(s) {sorted(missing)} in {where}")


def _parse_opps(raw: list, where: str) -> tuple[OppPoint, ...]:
    if not raw:
        raise ValidationError(f"empty opps list in {where}")
    opps = []
    for i, entry in enumerate(raw):
        _require_keys(entry, {"voltage_v", "frequency_mhz"}, {"voltage_v", "frequency_mhz"},
                      f"{where}.opps[{i}]")
        v = float(entry["voltage_v"])
        f_mhz = float(entry["frequency_mhz"])
        if v <= 0:
            raise ValidationError(f"voltage_v must be > 0 in {where}.opps[{i}]")
        if f_mhz <= 0:
            raise ValidationError(f"frequency_mhz must be > 0 in {where}.opps[{i}]")
        opps.append(OppPoint(voltage_v=v, frequency_hz=round(f_mhz * 1e6)))
    for a, b in zip(opps, opps[1:]):
        if b.frequency_hz <= a.frequency_hz:
            raise ValidationError(f"opp frequencies must strictly increase in {where}")
        if b.voltage_v < a.voltage_v:
            raise ValidationError(f"opp voltages must be non-decreasing in {where}")
    return tuple(opps)


def _validate_policy(policy: str, n_opps: int, where: str) -> str:
    if policy in BASE_DVFS_POLICIES:
        return policy
    if policy.startswith("fixed:"):
        try:
            idx = int(policy.split(":", 1)[1])
        except ValueError:
            raise ValidationError(f"bad fixed OPP index in dvfs_policy at {where}") from None
        if not 0 <= idx < n_opps:
            raise ValidationError(f"fixed OPP index {idx} out of range in {where}")
        return policy
    raise ValidationError(f"unknown dvfs_policy {policy!r} in {where}")


_PE_KEYS = {"id", "name", "type", "subtype", "capacity", "opps", "latency_profile_us",
            "power", "area_mm2", "dvfs_policy", "cluster"}
_PE_REQUIRED = _PE_KEYS - {"cluster"}


def _parse_pe(raw: dict, known_kinds: set[str], where: str) -> PeDescriptor:
    _require_keys(raw, _PE_KEYS, _PE_REQUIRED, where)
    pe_type = raw["type"]
    if pe_type not in PE_TYPES:
        raise ValidationError(f"type must be one of {PE_TYPES} in {where}")
    capacity = int(raw["capacity"])
    if capacity < 1:
        raise ValidationError(f"capacity must be >= 1 in {where}")
    profile = {}
    for kind, us in raw["latency_profile_us"].items():
        if kind not in known_kinds:
            raise ValidationError(f"unknown task kind {kind!r} in {where}.latency_profile_us")
        us = float(us)
        if us <= 0:
            raise ValidationError(f"latency for {kind!r} must be > 0 in {where}")
        profile[kind] = us
    if not profile:
        raise ValidationError(f"empty latency_profile_us in {where}")
    p = raw["power"]
    _require_keys(p, {"cap_f", "activity", "leak_a", "leak_b"},
                  {"cap_f", "activity", "leak_a", "leak_b"}, f"{where}.power")
    activity = float(p["activity"])
    if not 0.0 <= activity <= 1.0:
        raise ValidationError(f"power.activity must be in [0, 1] in {where}")
    area = float(raw["area_mm2"])
    if area < 0:
        raise ValidationError(f"area_mm2 must be >= 0 in {where}")
    opps = _parse_opps(raw["opps"], where)
    policy = _validate_policy(str(raw["dvfs_policy"]), len(opps), where)
    return PeDescriptor(
        pe_id=int(raw["id"]),
        name=str(raw["name"]),
        pe_type=pe_type,
        subtype=str(raw["subtype"]),
        capacity=capacity,
        opps=opps,
        latency_profile_us=profile,
        power=PowerParams(cap_f=float(p["cap_f"]), activity=activity,
                          leak_a=float(p["leak_a"]), leak_b=float(p["leak_b"])),
        area_mm2=area,
        dvfs_policy=policy,
        cluster=str(raw.get("cluster", raw["subtype"])),
    )


def _parse_rate_table(raw: list, where: str, y_name: str) -> tuple[tuple[float, int], ...]:
    if not raw:
        raise ValidationError(f"empty table in {where}")
    table = []
    for i, pair in enumerate(raw):
        if len(pair) != 2:
            raise ValidationError(f"{where}[{i}] must be a [x, {y_name}] pair")
        x, y = float(pair[0]), float(pair[1])
        if x < 0 or y < 0:
            raise ValidationError(f"negative value in {where}[{i}]")
        table.append((x, round(y)))
    xs = [x for x, _ in table]
    ys = [y for _, y in table]
    if sorted(xs) != xs or len(set(xs)) != len(xs):
        raise ValidationError(f"x values must strictly increase in {where}")
    if sorted(ys) != ys:
        raise ValidationError(f"latencies must be non-decreasing in {where}")
    return tuple(table)


_THERMAL_KEYS = {"r_k_per_w", "c_j_per_k", "ambient_c", "trip_c", "hysteresis_c"}


def _parse_thermal(raw: dict, where: str) -> ThermalParams:
    _require_keys(raw, _THERMAL_KEYS, {"r_k_per_w", "c_j_per_k"}, where)
    params = ThermalParams(
        r_k_per_w=float(raw["r_k_per_w"]),
        c_j_per_k=float(raw["c_j_per_k"]),
        ambient_c=float(raw.get("ambient_c", 25.0)),
        trip_c=float(raw.get("trip_c", 95.0)),
        hysteresis_c=float(raw.get("hysteresis_c", 5.0)),
    )
    if params.r_k_per_w <= 0 or params.c_j_per_k <= 0:
        raise ValidationError(f"thermal resistance and capacitance must be > 0 in {where}")
    if params.trip_c <= params.ambient_c:
        raise ValidationError(f"trip_c must exceed ambient_c in {where}")
    return params


_SOC_KEYS = {"name", "pes", "noc", "dram", "uncore_area_mm2", "dtpm_epoch_us",
             "thermal", "extra_task_kinds"}


def parse_soc_config(raw: dict, source: str = "<dict>") -> SocConfig:
    """Validate a raw SoC dict; raises ValidationError naming the bad field."""
    from .apps import known_task_kinds

    _require_keys(raw, _SOC_KEYS, {"pes", "noc", "dram", "uncore_area_mm2"}, source)

    extra = tuple(raw.get("extra_task_kinds", ()))
    known = known_task_kinds() | set(extra)

    if not raw["pes"]:
        raise ValidationError(f"pes list is empty in {source}")
    pes = tuple(_parse_pe(pe_raw, known, f"{source}.pes[{i}]")
                for i, pe_raw in enumerate(raw["pes"]))
    ids = [pe.pe_id for pe in pes]
    dupes = {i for i in ids if ids.count(i) > 1}
    if dupes:
        raise ValidationError(f"duplicate PE id(s) {sorted(dupes)} in {source}")

    noc_raw = raw["noc"]
    _require_keys(noc_raw, {"bandwidth_bytes_per_us", "load_latency_us", "link_capacity"},
                  {"bandwidth_bytes_per_us", "load_latency_us", "link_capacity"},
                  f"{source}.noc")
    load_latency = tuple(
        (float(load), us_to_ns(float(lat_us)))
        for load, lat_us in noc_raw["load_latency_us"]
    )
    for (l0, y0), (l1, y1) in zip(load_latency, load_latency[1:]):
        if l1 <= l0 or y1 < y0:
            raise ValidationError(f"load_latency_us must be increasing in load and "
                                  f"non-decreasing in latency in {source}.noc")
    noc = NocModel(
        bandwidth_bytes_per_us=int(noc_raw["bandwidth_bytes_per_us"]),
        load_latency=load_latency,
        link_capacity=int(noc_raw["link_capacity"]),
    )
    if noc.bandwidth_bytes_per_us <= 0 or noc.link_capacity <= 0:
        raise ValidationError(f"noc bandwidth and link_capacity must be > 0 in {source}")

    dram_raw = raw["dram"]
    _require_keys(dram_raw, {"window_us", "table"}, {"window_us", "table"}, f"{source}.dram")
    dram = DramModel(
        window_ns=us_to_ns(float(dram_raw["window_us"])),
        table=_parse_rate_table(dram_raw["table"], f"{source}.dram.table", "latency_ns"),
    )
    if dram.window_ns <= 0:
        raise ValidationError(f"dram.window_us must be > 0 in {source}")

    epoch_us = float(raw.get("dtpm_epoch_us", DEFAULT_DTPM_EPOCH_US))
    if epoch_us <= 0:
        raise ValidationError(f"dtpm_epoch_us must be > 0 in {source}")
    lo, hi = DTPM_EPOCH_RANGE_US
    if not lo <= epoch_us <= hi:
        warnings.warn(f"dtpm_epoch_us {epoch_us} outside the usual [{lo}, {hi}] range",
                      stacklevel=2)

    thermal_raw = raw.get("thermal", {})
    thermal = {name: _parse_thermal(params, f"{source}.thermal.{name}")
               for name, params in thermal_raw.items()}

    return SocConfig(
        name=str(raw.get("name", Path(source).stem)),
        pes=pes,
        noc=noc,
        dram=dram,
        uncore_area_mm2=float(raw["uncore_area_mm2"]),
        dtpm_epoch_us=epoch_us,
        thermal=thermal,
        extra_task_kinds=extra,
    )


def load_soc_config(path: str | Path) -> SocConfig:
    """Load and validate an SoC configuration file."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read SoC config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
    return parse_soc_config(raw, source=str(path))


def soc_to_dict(soc: SocConfig) -> dict:
    """Serialize a SocConfig back to its JSON form (round-trip safe)."""
    return {
        "name": soc.name,
        "pes": [
            {
                "id": pe.pe_id,
                "name": pe.name,
                "type": pe.pe_type,
                "subtype": pe.subtype,
                "capacity": pe.capacity,
                "opps": [{"voltage_v": o.voltage_v, "frequency_mhz": o.frequency_hz / 1e6}
                         for o in pe.opps],
                "latency_profile_us": dict(pe.latency_profile_us),
                "power": {"cap_f": pe.power.cap_f, "activity": pe.power.activity,
                          "leak_a": pe.power.leak_a, "leak_b": pe.power.leak_b},
                "area_mm2": pe.area_mm2,
                "dvfs_policy": pe.dvfs_policy,
                "cluster": pe.cluster,
            }
            for pe in soc.pes
        ],
        "noc": {
            "bandwidth_bytes_per_us": soc.noc.bandwidth_bytes_per_us,
            "load_latency_us": [[load, ns / 1000.0] for load, ns in soc.noc.load_latency],
            "link_capacity": soc.noc.link_capacity,
        },
        "dram": {
            "window_us": soc.dram.window_ns / 1000.0,
            "table": [[bw, float(ns)] for bw, ns in soc.dram.table],
        },
        "uncore_area_mm2": soc.uncore_area_mm2,
        "dtpm_epoch_us": soc.dtpm_epoch_us,
        "thermal": {
            name: {"r_k_per_w": t.r_k_per_w, "c_j_per_k": t.c_j_per_k,
                   "ambient_c": t.ambient_c, "trip_c": t.trip_c,
                   "hysteresis_c": t.hysteresis_c}
            for name, t in soc.thermal.items()
        },
        "extra_task_kinds": list(soc.extra_task_kinds),
    }


def save_soc_config(soc: SocConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(soc_to_dict(soc), indent=2, sort_keys=True) + "\n")


def with_governor(soc: SocConfig, policy: str) -> SocConfig:
    """Return a copy of `soc` with every PE's DVFS policy replaced."""
    pes = []
    for pe in soc.pes:
        _validate_policy(policy, len(pe.opps), f"PE {pe.pe_id}")
        pes.append(replace(pe, dvfs_policy=policy))
    return replace(soc, pes=tuple(pes))
