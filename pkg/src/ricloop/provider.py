"""Pluggable decision-suggestion interface with strict logical deadlines.

The deterministic stub is the reference provider: a pure function of
(context digest, seed). A remote adapter can be configured for interactive
use but is never required; every caller treats timeout and invalid
responses identically by falling back to its base heuristic.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from typing import Optional

MAX_CONTEXT_BYTES = 64 * 1024

KIND_L2_BLEND = "l2_blend"
KIND_QOE_HINT = "qoe_hint"
KIND_LOAD_HINT = "load_hint"
KIND_ENERGY_HINT = "energy_hint"


class ProviderError(Exception):
    pass


@dataclass(frozen=True)
class ProviderDeadlines:
    tau_llm_ms: float = 500.0
    tau_xapp_ms: float = 100.0

    def __post_init__(self):
        if self.tau_llm_ms <= 0 or self.tau_xapp_ms <= 0:
            raise ProviderError("deadlines must be positive")
        if self.tau_xapp_ms > self.tau_llm_ms:
            raise ProviderError("tau_xapp_ms must not exceed tau_llm_ms")


@dataclass(frozen=True)
class PromptRequest:
    kind: str
    context: dict
    deadline_ms: float
    seed: int

    def __post_init__(self):
        if self.deadline_ms <= 0:
            raise ProviderError("deadline must be positive")
        if len(canonical_context(self.context)) > MAX_CONTEXT_BYTES:
            raise ProviderError("context exceeds 64 KiB bound")


@dataclass(frozen=True)
class PromptResponse:
    valid: bool
    payload: dict
    latency_ms: float


def canonical_context(context: dict) -> bytes:
    return json.dumps(context, sort_keys=True, separators=(",", ":")).encode("utf-8")


def context_digest(context: dict, *seeds: int) -> int:
    h = hashlib.sha256(canonical_context(context) + repr(seeds).encode("ascii"))
    return int.from_bytes(h.digest()[:8], "big")


class StubProvider:
    """Deterministic stand-in: hints vary with state via the context digest, never with time."""

    def __init__(self, seed: int = 0, latency_ms: float = 0.0):
        self.seed = seed
        self.latency_ms = latency_ms

    def prompt(self, request: PromptRequest) -> Optional[PromptResponse]:
        if self.latency_ms > request.deadline_ms:
            return None  # timeout on the logical clock
        digest = context_digest(request.context, self.seed, request.seed)
        payload = self._payload(request.kind, request.context, digest)
        if payload is None:
            return PromptResponse(valid=False, payload={}, latency_ms=self.latency_ms)
        return PromptResponse(valid=True, payload=payload, latency_ms=self.latency_ms)

    def _payload(self, kind: str, ctx: dict, digest: int) -> Optional[dict]:
        if kind == KIND_L2_BLEND:
            base = ctx.get("base_weights")
            if not base:
                return None
            jitter = ((digest % 11) - 5) / 100.0
            return {
                "w_qoe": _clamp01(base["w_qoe"] + jitter),
                "w_load": _clamp01(base["w_load"] + jitter),
                "w_energy": _clamp01(base["w_energy"] - jitter),
            }
        if kind == KIND_QOE_HINT:
            cands = ctx.get("candidates") or []
            if not cands:
                return None
            ordered = sorted(cands, key=lambda c: (-c["sinr_db"], -c["free_prb"], c["cell_id"]))
            pick = ordered[0]
            if digest % 5 == 0 and len(ordered) > 1:
                pick = ordered[1]
            return {"preferred_neighbor": pick["cell_id"]}
        if kind == KIND_LOAD_HINT:
            pairs = ctx.get("pairs") or []
            order = [list(p) for p in (tuple(p) for p in pairs)]
            if len(order) > 1 and digest % 7 == 0:
                order[0], order[1] = order[1], order[0]
            return {"pair_order": order, "elephant": ctx.get("base_elephants", {})}
        if kind == KIND_ENERGY_HINT:
            sleep = dict(ctx.get("idle_verdicts") or {})
            wake = dict(ctx.get("wake_verdicts") or {})
            if digest % 13 == 0 and sleep:
                flip = sorted(sleep)[digest % len(sleep)]
                sleep[flip] = not sleep[flip]
            return {"sleep": sleep, "wake": wake}
        return None


class TimeoutProvider:
    """Fault-injection provider: every prompt misses its deadline."""

    def prompt(self, request: PromptRequest) -> Optional[PromptResponse]:
        return None


class InvalidProvider:
    """Fault-injection provider: always answers, never validly."""

    def prompt(self, request: PromptRequest) -> Optional[PromptResponse]:
        return PromptResponse(valid=False, payload={}, latency_ms=0.0)


class RemoteProvider:
    """Optional HTTP adapter; reads its endpoint from the environment.

    Excluded from all acceptance paths: any error or missing configuration
    degrades to a timeout, which callers already handle.
    """

    ENDPOINT_VAR = "RICLOOP_PROVIDER_URL"

    def __init__(self, timeout_s: float = 2.0):
        self.endpoint = os.environ.get(self.ENDPOINT_VAR)
        self.timeout_s = timeout_s

    def prompt(self, request: PromptRequest) -> Optional[PromptResponse]:
        if not self.endpoint:
            return None
        try:
            import requests

            resp = requests.post(self.endpoint, timeout=self.timeout_s, json={
                "kind": request.kind, "context": request.context,
            })
            resp.raise_for_status()
            body = resp.json()
        except Exception:
            return None
        if not isinstance(body, dict):
            return PromptResponse(valid=False, payload={}, latency_ms=0.0)
        return PromptResponse(valid=True, payload=body, latency_ms=0.0)


def _clamp01(x: float) -> float:
    return min(1.0, max(0.0, x))


# (phase, condition) -> (w_qoe, w_load, w_energy). The emergency row is already
# saturated toward firefighting, so a hotspot cannot push it further; a fully
# quiet network hands the budget to energy saving.
_BLEND_TABLE = {
    ("normal", "nominal"): (0.4, 0.4, 0.4),
    ("normal", "hotspot"): (0.6, 0.6, 0.2),
    ("normal", "quiet"): (0.2, 0.2, 1.0),
    ("emergency", "nominal"): (0.8, 0.8, 0.0),
    ("emergency", "hotspot"): (0.8, 0.8, 0.0),
    ("emergency", "quiet"): (0.6, 0.6, 0.2),
    ("recovery", "nominal"): (0.5, 0.5, 0.6),
    ("recovery", "hotspot"): (0.7, 0.7, 0.4),
    ("recovery", "quiet"): (0.3, 0.3, 0.8),
}

QUIET_PRB = 0.3


def heuristic_blend(phase: str, cell_prbs: dict[int, float], hot_prb: float) -> dict[str, float]:
    """Deterministic fallback objective weights keyed on phase and coarse load."""
    prbs = list(cell_prbs.values())
    if prbs and any(p > hot_prb for p in prbs):
        condition = "hotspot"
    elif prbs and all(p < QUIET_PRB for p in prbs):
        condition = "quiet"
    else:
        condition = "nominal"
    wq, wl, we = _BLEND_TABLE[(phase, condition)]
    return {"w_qoe": wq, "w_load": wl, "w_energy": we}
