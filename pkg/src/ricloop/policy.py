"""Typed A1 policy catalog: schemas, guardrail validation, rate limiting, publication.

The three agents (qoe / load / energy) each register a fixed field schema once.
The store is single-writer: only the orchestrator publishes; xApps read the
latest complete instance via snapshots. Hard limits (ranges, max step per edit,
edit cooldowns) live in the guardrail spec and are enforced on every publish.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Optional

AGENT_QOE = "qoe"
AGENT_LOAD = "load"
AGENT_ENERGY = "energy"
AGENTS = (AGENT_QOE, AGENT_LOAD, AGENT_ENERGY)

SOURCE_INTENT = "intent-l2"
SOURCE_TUNER = "apt"
SOURCE_PLATFORM = "platform"
SOURCE_DEFAULT = "default"

# Fields the slow tuner may edit ("soft" fields). Everything else is set only
# by intent translation or platform config.
TUNER_EDITABLE = frozenset({
    "headroom_min", "min_dwell_s", "ue_ban_s",
    "cool_prb", "cio_step_db", "mcs_min",
    "idle_window_min", "idle_prb_max", "idle_sched_mbps_max",
    "wake_ue_min", "wake_sched_mbps_min", "ho_arrival_max_hz",
})

# Set only from platform config, never by intent translation or the tuner.
PLATFORM_ONLY = frozenset({"ul_p95_dbm_max"})


class PolicyError(Exception):
    """Schema registration or publication contract violation."""


@dataclass(frozen=True)
class FieldDescriptor:
    name: str
    unit: str
    kind: str  # "float" | "int"


@dataclass(frozen=True)
class FieldBound:
    min: float
    max: float
    max_step_per_edit: float
    edit_cooldown_s: float

    def __post_init__(self):
        if self.min > self.max:
            raise PolicyError(f"bound min {self.min} > max {self.max}")


@dataclass(frozen=True)
class GuardrailSpec:
    """Config-owned safety envelope enforced outside the A1 payload."""

    fields: dict[str, FieldBound]
    offset_clamp_db: tuple[float, float] = (-6.0, 6.0)
    budget_offset_steps: int = 3
    budget_window_s: float = 60.0
    offset_cooldown_s: float = 10.0
    min_active_cells_per_site: int = 1
    global_dwell_floor_s: float = 1.0

    def __post_init__(self):
        if self.budget_offset_steps <= 0 or self.budget_window_s <= 0:
            raise PolicyError("budgets must be positive")
        lo, hi = self.offset_clamp_db
        if lo > hi:
            raise PolicyError("offset clamp inverted")

    def bound(self, name: str) -> FieldBound:
        return self.fields[name]


@dataclass(frozen=True)
class QoePolicy:
    dl_target_mbps: float
    sinr_target_db: float
    headroom_min: float
    min_dwell_s: float
    ue_ban_s: float


@dataclass(frozen=True)
class LoadPolicy:
    hot_prb: float
    cool_prb: float
    cio_step_db: float
    mcs_min: int
    ul_p95_dbm_max: float
    ue_ban_s: float


@dataclass(frozen=True)
class EnergyPolicy:
    idle_window_min: float
    idle_prb_max: float
    idle_sched_mbps_max: float
    idle_ue_max: int
    wake_ue_min: int
    wake_sched_mbps_min: float
    ho_arrival_max_hz: float


POLICY_TYPES = {AGENT_QOE: QoePolicy, AGENT_LOAD: LoadPolicy, AGENT_ENERGY: EnergyPolicy}

INT_FIELDS = frozenset({"mcs_min", "idle_ue_max", "wake_ue_min"})


def descriptors_for(agent: str) -> list[FieldDescriptor]:
    """Canonical descriptor set for an agent, in catalog order."""
    units = {
        "dl_target_mbps": "Mbps", "sinr_target_db": "dB", "headroom_min": "fraction",
        "min_dwell_s": "s", "ue_ban_s": "s", "hot_prb": "fraction", "cool_prb": "fraction",
        "cio_step_db": "dB", "mcs_min": "index", "ul_p95_dbm_max": "dBm",
        "idle_window_min": "min", "idle_prb_max": "fraction", "idle_sched_mbps_max": "Mbps",
        "idle_ue_max": "count", "wake_ue_min": "count", "wake_sched_mbps_min": "Mbps",
        "ho_arrival_max_hz": "1/s",
    }
    cls = POLICY_TYPES[agent]
    out = []
    for name in cls.__dataclass_fields__:
        kind = "int" if name in INT_FIELDS else "float"
        out.append(FieldDescriptor(name=name, unit=units[name], kind=kind))
    return out


@dataclass(frozen=True)
class PolicyInstance:
    agent: str
    values: object  # QoePolicy | LoadPolicy | EnergyPolicy
    version: int
    issued_at: float
    source: str
    ttl_s: Optional[float] = None

    def values_dict(self) -> dict[str, float]:
        return values_as_dict(self.values)


@dataclass(frozen=True)
class Violation:
    field: str
    value: float
    bound: str  # human-readable bound description, e.g. "max 1.5"


def values_as_dict(values) -> dict[str, float]:
    return {name: getattr(values, name) for name in type(values).__dataclass_fields__}


def values_from_dict(agent: str, data: dict[str, float]):
    cls = POLICY_TYPES[agent]
    kwargs = {}
    for name in cls.__dataclass_fields__:
        v = data[name]
        kwargs[name] = int(round(v)) if name in INT_FIELDS else float(v)
    return cls(**kwargs)


def serialize_values(values) -> str:
    """Canonical byte form used for TTL-revert equality checks."""
    return json.dumps(values_as_dict(values), sort_keys=True, separators=(",", ":"))


# Cross-field orderings each policy type must satisfy (lhs strictly below rhs).
_CROSS_FIELD_ORDER = {
    AGENT_LOAD: (("cool_prb", "hot_prb"),),
    AGENT_ENERGY: (("idle_ue_max", "wake_ue_min"), ("idle_sched_mbps_max", "wake_sched_mbps_min")),
}


def validate_values(agent: str, values, spec: GuardrailSpec) -> list[Violation]:
    """Range/type/cross-field check. Empty list means the instance is valid."""
    out: list[Violation] = []
    for name, v in values_as_dict(values).items():
        if not math.isfinite(v):
            out.append(Violation(name, v, "finite"))
            continue
        if name in INT_FIELDS and float(v) != int(v):
            out.append(Violation(name, v, "integer"))
        b = spec.fields.get(name)
        if b is None:
            out.append(Violation(name, v, "no guardrail bound configured"))
        elif v < b.min:
            out.append(Violation(name, v, f"min {b.min}"))
        elif v > b.max:
            out.append(Violation(name, v, f"max {b.max}"))
    for lo_name, hi_name in _CROSS_FIELD_ORDER.get(agent, ()):
        lo, hi = getattr(values, lo_name), getattr(values, hi_name)
        if not lo < hi:
            out.append(Violation(lo_name, lo, f"must be < {hi_name} ({hi})"))
    if agent == AGENT_LOAD and values.cio_step_db <= 0:
        out.append(Violation("cio_step_db", values.cio_step_db, "must be > 0"))
    return out


def clamp_rate_limit(
    proposed: dict[str, float],
    previous: dict[str, float],
    spec: GuardrailSpec,
    last_edit_t: dict[str, float],
    now: float,
) -> dict[str, float]:
    """Clamp to [min,max], cap |new-old| at max_step_per_edit, hold fields under cooldown.

    Pure and idempotent: re-applying with the same previous/now yields the output.
    """
    out: dict[str, float] = {}
    for name, old in previous.items():
        want = proposed.get(name, old)
        b = spec.fields[name]
        if not math.isfinite(want):
            out[name] = old
            continue
        want = min(max(want, b.min), b.max)
        delta = want - old
        if abs(delta) > b.max_step_per_edit:
            want = old + math.copysign(b.max_step_per_edit, delta)
        last = last_edit_t.get(name)
        if want != old and last is not None and (now - last) < b.edit_cooldown_s:
            want = old
        if name in INT_FIELDS:
            want = float(int(round(want)))
        out[name] = want
    return out


AuditHook = Callable[[str, dict], None]  # (kind, payload) -> None


@dataclass
class _TtlEntry:
    agent: str
    revert_at: float
    serialized_prev: str


class PolicyStore:
    """Versioned publication point for the three agents.

    Single-writer (the orchestrator tick); snapshots are immutable instances so
    readers always see the last complete publication.
    """

    def __init__(self, spec: GuardrailSpec, on_event: Optional[AuditHook] = None):
        self.spec = spec
        self._schemas: dict[str, tuple[FieldDescriptor, ...]] = {}
        self._latest: dict[str, PolicyInstance] = {}
        self._versions: dict[str, int] = {}
        self._last_edit_t: dict[str, dict[str, float]] = {}
        self._ttl_queue: list[_TtlEntry] = []
        self._on_event = on_event or (lambda kind, payload: None)
        self.frozen = False  # test hook: drop publications while keeping readers live

    # -- schema registration ------------------------------------------------

    def register_schema(self, agent: str, field_descriptors: list[FieldDescriptor]) -> tuple[FieldDescriptor, ...]:
        if agent in self._schemas:
            raise PolicyError(f"agent {agent!r} already registered")
        if not field_descriptors:
            raise PolicyError("empty descriptor list")
        if agent not in POLICY_TYPES:
            raise PolicyError(f"unknown agent {agent!r}")
        expected = set(POLICY_TYPES[agent].__dataclass_fields__)
        got = {d.name for d in field_descriptors}
        if got != expected:
            raise PolicyError(f"descriptor set {sorted(got)} does not match catalog {sorted(expected)}")
        handle = tuple(field_descriptors)
        self._schemas[agent] = handle
        return handle

    def registered(self, agent: str) -> bool:
        return agent in self._schemas

    # -- validation / publication --------------------------------------------

    def validate_instance(self, instance: PolicyInstance) -> list[Violation]:
        if instance.agent not in self._schemas:
            raise PolicyError(f"agent {instance.agent!r} not registered")
        return validate_values(instance.agent, instance.values, self.spec)

    def publish(self, agent: str, values, source: str, now: float, ttl_s: Optional[float] = None) -> int:
        """Validate and publish; returns the new version. Refusals raise and are audited."""
        if agent not in self._schemas:
            raise PolicyError(f"agent {agent!r} not registered")
        violations = validate_values(agent, values, self.spec)
        if violations:
            self._on_event("refuse", {
                "agent": agent,
                "source": source,
                "violations": [{"field": v.field, "value": v.value, "bound": v.bound} for v in violations],
            })
            raise PolicyError(f"publication refused for {agent}: {violations[0].field} {violations[0].bound}")
        if self.frozen:
            return self._versions.get(agent, 0)
        prev = self._latest.get(agent)
        version = self._versions.get(agent, 0) + 1
        inst = PolicyInstance(agent=agent, values=values, version=version,
                              issued_at=now, source=source, ttl_s=ttl_s)
        self._versions[agent] = version
        self._latest[agent] = inst
        if source == SOURCE_TUNER and prev is not None:
            # edit cooldowns damp the slow tuner; intent translation is the
            # authoritative path and is rate-limited by max_step alone
            edits = self._last_edit_t.setdefault(agent, {})
            for name, old in prev.values_dict().items():
                if getattr(values, name) != old:
                    edits[name] = now
        if ttl_s is not None and prev is not None:
            self._ttl_queue.append(_TtlEntry(agent, now + ttl_s, serialize_values(prev.values)))
        self._on_event("publish", {
            "agent": agent, "version": version, "source": source,
            "ttl_s": ttl_s, "values": values_as_dict(values),
        })
        return version

    def snapshot(self, agent: str) -> Optional[PolicyInstance]:
        return self._latest.get(agent)

    def last_edit_times(self, agent: str) -> dict[str, float]:
        return dict(self._last_edit_t.get(agent, {}))

    def clamp_against_current(self, agent: str, proposed: dict[str, float], now: float) -> dict[str, float]:
        prev = self._latest[agent].values_dict()
        return clamp_rate_limit(proposed, prev, self.spec, self._last_edit_t.get(agent, {}), now)

    # -- TTL auto-revert ------------------------------------------------------

    def process_ttl(self, now: float) -> list[PolicyInstance]:
        """Publish reverts for all TTL entries that are due. Returns the reverted instances."""
        due = [e for e in self._ttl_queue if e.revert_at <= now]
        if not due:
            return []
        self._ttl_queue = [e for e in self._ttl_queue if e.revert_at > now]
        out = []
        for entry in due:
            restored = values_from_dict(entry.agent, json.loads(entry.serialized_prev))
            if serialize_values(restored) != entry.serialized_prev:
                raise PolicyError("ttl revert failed byte-identity check")
            version = self._versions[entry.agent] + 1
            inst = PolicyInstance(agent=entry.agent, values=restored, version=version,
                                  issued_at=now, source=SOURCE_PLATFORM, ttl_s=None)
            self._versions[entry.agent] = version
            self._latest[entry.agent] = inst
            self._on_event("ttl_revert", {
                "agent": entry.agent, "version": version, "values": values_as_dict(restored),
            })
            out.append(inst)
        return out


def default_guardrails() -> GuardrailSpec:
    """Configuration defaults; every range is overridable from the scenario file.

    max_step_per_edit defaults to 10% of the range width, edit cooldown to 120 s.
    """
    ranges = {
        "dl_target_mbps": (0.3, 0.8),
        "sinr_target_db": (-3.0, 6.0),
        "headroom_min": (0.05, 0.30),
        "min_dwell_s": (1.0, 10.0),
        "ue_ban_s": (5.0, 30.0),
        "hot_prb": (0.70, 0.95),
        "cool_prb": (0.30, 0.60),
        "cio_step_db": (0.5, 1.5),
        "mcs_min": (0.0, 15.0),
        "ul_p95_dbm_max": (-120.0, -60.0),
        "idle_window_min": (1.0, 10.0),
        "idle_prb_max": (0.01, 0.10),
        "idle_sched_mbps_max": (0.05, 1.0),
        "idle_ue_max": (0.0, 2.0),
        "wake_ue_min": (1.0, 5.0),
        "wake_sched_mbps_min": (1.0, 5.0),
        "ho_arrival_max_hz": (0.01, 0.5),
    }
    fields = {}
    for name, (lo, hi) in ranges.items():
        step = max((hi - lo) * 0.10, 1.0 if name in INT_FIELDS else 0.0)
        fields[name] = FieldBound(min=lo, max=hi, max_step_per_edit=step, edit_cooldown_s=120.0)
    return GuardrailSpec(fields=fields)


def default_values(agent: str, spec: GuardrailSpec):
    """Mid-range defaults, valid by construction."""
    if agent == AGENT_QOE:
        return QoePolicy(dl_target_mbps=0.55, sinr_target_db=1.0, headroom_min=0.15,
                         min_dwell_s=3.0, ue_ban_s=15.0)
    if agent == AGENT_LOAD:
        return LoadPolicy(hot_prb=0.85, cool_prb=0.50, cio_step_db=1.0, mcs_min=5,
                          ul_p95_dbm_max=-75.0, ue_ban_s=15.0)
    if agent == AGENT_ENERGY:
        return EnergyPolicy(idle_window_min=2.0, idle_prb_max=0.05, idle_sched_mbps_max=0.5,
                            idle_ue_max=1, wake_ue_min=2, wake_sched_mbps_min=2.0,
                            ho_arrival_max_hz=0.2)
    raise PolicyError(f"unknown agent {agent!r}")
