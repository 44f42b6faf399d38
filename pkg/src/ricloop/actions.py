"""Action proposal and dispatch batch types shared by the xApps and the orchestrator."""

from __future__ import annotations

from dataclasses import dataclass

KIND_HO = "ho"
KIND_OFFSET = "offset_step"
KIND_SLEEP = "sleep"
KIND_WAKE = "wake"

E2_KINDS = frozenset({KIND_HO, KIND_OFFSET})
O1_KINDS = frozenset({KIND_SLEEP, KIND_WAKE})

# Fixed merge priority: Energy > QoE > Load.
SOURCE_PRIORITY = {"energy": 3, "qoe": 2, "load": 1}


@dataclass(frozen=True)
class ActionProposal:
    source: str          # proposing agent: qoe | load | energy
    kind: str            # ho | offset_step | sleep | wake
    subject: tuple       # ("ue", id) | ("pair", cell, neighbor) | ("cell", id)
    params: tuple        # sorted (key, value) pairs; hashable
    reason: str
    t_proposed: float

    def param(self, key: str):
        for k, v in self.params:
            if k == key:
                return v
        raise KeyError(key)

    @staticmethod
    def make(source: str, kind: str, subject: tuple, params: dict,
             reason: str, t_proposed: float) -> "ActionProposal":
        expected = {KIND_HO: "ue", KIND_OFFSET: "pair", KIND_SLEEP: "cell", KIND_WAKE: "cell"}
        if subject[0] != expected[kind]:
            raise ValueError(f"{kind} proposal must target a {expected[kind]}, got {subject}")
        return ActionProposal(source=source, kind=kind, subject=subject,
                              params=tuple(sorted(params.items())),
                              reason=reason, t_proposed=t_proposed)

    def to_payload(self) -> dict:
        return {
            "source": self.source, "kind": self.kind, "subject": list(self.subject),
            "params": {k: v for k, v in self.params}, "reason": self.reason,
            "t_proposed": self.t_proposed,
        }


@dataclass(frozen=True)
class Decision:
    proposal: ActionProposal
    accepted: bool
    reason: str  # "accepted" or the rejecting guard name


@dataclass(frozen=True)
class DispatchBatch:
    tick_t: float
    e2_actions: tuple[ActionProposal, ...]
    o1_actions: tuple[ActionProposal, ...]
    decisions: tuple[Decision, ...]

    @property
    def accepted(self) -> tuple[ActionProposal, ...]:
        return tuple(d.proposal for d in self.decisions if d.accepted)
