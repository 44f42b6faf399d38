"""Append-only audit trail: line-delimited JSON records, gapless sequence numbers.

Each record is one JSON object per line with keys in fixed order
(seq, t, source, kind, reason, payload), so serialize -> parse -> serialize
is byte-identical. Storage failures abort the run: an action that cannot be
audited must not become observable.

Replay itself lives in the runner (it re-drives the simulator); this module
owns the record format, parsing, and the explain query.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass
from typing import Optional, Union

VALID_KINDS = frozenset({
    "run_meta", "publish", "refuse", "propose", "merge_decision",
    "dispatch", "actuation", "apt_edit", "ttl_revert",
})

VALID_SOURCES = frozenset({
    "rapp", "xapp-qoe", "xapp-load", "xapp-energy", "apt", "sim", "dispatcher",
})


class AuditError(Exception):
    pass


@dataclass(frozen=True)
class AuditRecord:
    seq: int
    t: float
    source: str
    kind: str
    reason: str
    payload: dict


def serialize_record(record: AuditRecord) -> str:
    obj = {"seq": record.seq, "t": record.t, "source": record.source,
           "kind": record.kind, "reason": record.reason, "payload": record.payload}
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False)


def parse_record(line: str) -> AuditRecord:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise AuditError(f"malformed audit line: {exc}") from exc
    for key in ("seq", "t", "source", "kind", "reason", "payload"):
        if key not in obj:
            raise AuditError(f"audit record missing {key!r}")
    if obj["kind"] not in VALID_KINDS:
        raise AuditError(f"unknown record kind {obj['kind']!r}")
    if obj["source"] not in VALID_SOURCES:
        raise AuditError(f"unknown record source {obj['source']!r}")
    return AuditRecord(seq=obj["seq"], t=obj["t"], source=obj["source"],
                       kind=obj["kind"], reason=obj["reason"], payload=obj["payload"])


class AuditLog:
    """Single-appender log. Writes through to the backing stream before returning."""

    def __init__(self, stream: Optional[io.TextIOBase] = None):
        self._stream = stream
        self._seq = 0
        self.records: list[AuditRecord] = []

    @classmethod
    def open(cls, path: str) -> "AuditLog":
        return cls(stream=open(path, "w", encoding="utf-8", newline="\n"))

    def append(self, t: float, source: str, kind: str, payload: dict,
               reason: str = "") -> int:
        if kind not in VALID_KINDS:
            raise AuditError(f"unknown record kind {kind!r}")
        if source not in VALID_SOURCES:
            raise AuditError(f"unknown record source {source!r}")
        record = AuditRecord(seq=self._seq + 1, t=t, source=source, kind=kind,
                             reason=reason, payload=payload)
        line = serialize_record(record)
        if self._stream is not None:
            try:
                self._stream.write(line + "\n")
                self._stream.flush()
            except OSError as exc:
                raise AuditError(f"audit storage failure: {exc}") from exc
        self._seq += 1
        self.records.append(record)
        return record.seq

    def close(self) -> None:
        if self._stream is not None:
            self._stream.close()
            self._stream = None


def load_log(path: str) -> list[AuditRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line:
                records.append(parse_record(line))
    prev = 0
    for r in records:
        if r.seq != prev + 1:
            raise AuditError(f"sequence gap: {prev} -> {r.seq}")
        prev = r.seq
    return records


def run_meta(records: list[AuditRecord]) -> dict:
    for r in records:
        if r.kind == "run_meta":
            return r.payload
    raise AuditError("log has no run_meta record")


# -- explain -----------------------------------------------------------------------


def parse_subject(subject: str) -> Union[tuple[str, int], tuple[str, str]]:
    s = subject.strip().lower().replace(" ", "")
    for prefix in ("ue", "cell"):
        if s.startswith(prefix) and s[len(prefix):].isdigit():
            return (prefix, int(s[len(prefix):]))
    return ("field", s)


def _mentions_entity(payload: dict, kind: str, ent: str, ent_id: int) -> bool:
    subj = payload.get("subject")
    if isinstance(subj, list):
        if ent == "ue" and subj[:2] == ["ue", ent_id]:
            return True
        if ent == "cell" and subj[0] in ("cell", "pair") and ent_id in subj[1:]:
            return True
        if ent == "cell" and subj[:1] == ["ue"] and payload.get("params", {}).get("target") == ent_id:
            return True
    if ent == "ue" and payload.get("ue") == ent_id:
        return True
    if ent == "cell" and (payload.get("cell") == ent_id
                          or payload.get("from") == ent_id or payload.get("to") == ent_id):
        return True
    return False


def explain(records: list[AuditRecord], subject: str) -> list[str]:
    """Chronological decision trace for one UE, cell, or policy field."""
    ent = parse_subject(subject)
    lines: list[str] = []
    last_values: dict[str, dict] = {}
    for r in records:
        hit = False
        detail = ""
        if ent[0] == "field":
            name = ent[1]
            if r.kind == "apt_edit" and r.payload.get("field") == name:
                hit = True
                detail = f"{r.payload['old']} -> {r.payload['new']} ({r.payload.get('reason', '')})"
            elif r.kind in ("publish", "ttl_revert"):
                values = r.payload.get("values", {})
                if name in values:
                    agent = r.payload.get("agent", "")
                    prev = last_values.get(agent, {})
                    if name in prev and prev[name] != values[name]:
                        hit = True
                        detail = f"{prev[name]} -> {values[name]} (source={r.payload.get('source', r.kind)})"
                    last_values[agent] = values
        else:
            if r.kind in ("propose", "merge_decision", "actuation") \
                    and _mentions_entity(r.payload, r.kind, ent[0], ent[1]):
                hit = True
                if r.kind == "merge_decision":
                    verdict = "accepted" if r.payload.get("accepted") else f"rejected{{{r.payload.get('reason')}}}"
                    detail = f"{r.payload.get('kind')} {r.payload.get('subject')} {verdict}"
                elif r.kind == "propose":
                    detail = f"{r.payload.get('kind')} {r.payload.get('subject')} by {r.payload.get('source')}"
                else:
                    detail = json.dumps(r.payload, sort_keys=True)
        if hit:
            lines.append(f"t={r.t:g} seq={r.seq} [{r.kind}] {detail}".rstrip())
    return lines
