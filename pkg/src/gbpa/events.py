"""Decision-centric event records with nine facets (5W3H1R) and log ingestion.

An event answers: who acted, what object changed, why, when, where, how,
how much, how long, and with what result. Facet values are kept exact:
quantities are decimals, timestamps are UTC milliseconds, money is never a
binary float.
"""
from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from decimal import Decimal, InvalidOperation
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Mapping

from .errors import BadTimestampError, BadUnitError, MissingFieldError

SCHEMA_VERSION = "5w3h1r/1"

MANDATORY_FACETS = ("who", "what", "why", "when", "how")

_MONETARY_UNIT = re.compile(r"^[A-Z]{3}$")
_RFC3339 = re.compile(
    r"^(\d{4})-(\d{2})-(\d{2})[Tt](\d{2}):(\d{2}):(\d{2})(\.\d+)?([Zz]|[+-]\d{2}:\d{2})$"
)


class ResultStatus(str, Enum):
    SUCCESS = "success"
    FAILURE = "failure"
    PENDING = "pending"


@dataclass(frozen=True)
class Actor:
    id: str
    role: str = ""


@dataclass(frozen=True)
class Quantity:
    magnitude: Decimal
    unit: str | None = None

    def render(self) -> str:
        return str(self.magnitude) if self.unit is None else f"{self.magnitude} {self.unit}"


@dataclass(frozen=True)
class Outcome:
    status: ResultStatus
    value: Quantity | None = None


@dataclass(frozen=True)
class Event5W3H1R:
    who: Actor
    what: str
    why: str
    when_ms: int
    how: str
    where: str = ""
    how_much: Quantity | None = None
    how_long_ms: int | None = None
    result: Outcome = Outcome(ResultStatus.PENDING)
    attributes: tuple[tuple[str, Any], ...] = ()

    @property
    def when_iso(self) -> str:
        return format_timestamp(self.when_ms)


def parse_timestamp(raw: str) -> int:
    """RFC 3339 with explicit zone, to UTC epoch milliseconds."""
    if not isinstance(raw, str) or not _RFC3339.match(raw.strip()):
        raise BadTimestampError(f"not an RFC 3339 timestamp: {raw!r}")
    text = raw.strip().replace("z", "Z")
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    try:
        dt = datetime.fromisoformat(text)
    except ValueError as exc:
        raise BadTimestampError(f"unparseable timestamp: {raw!r}") from exc
    return int(round(dt.astimezone(timezone.utc).timestamp() * 1000))


def format_timestamp(ms: int) -> str:
    dt = datetime.fromtimestamp(ms / 1000.0, tz=timezone.utc)
    return dt.strftime("%Y-%m-%dT%H:%M:%S.") + f"{ms % 1000:03d}Z"


def _parse_magnitude(raw: Any) -> Decimal:
    # Decimals come in as strings or ints; floats are converted via str to
    # avoid inheriting binary representation error.
    if isinstance(raw, Decimal):
        return raw
    try:
        return Decimal(str(raw))
    except InvalidOperation as exc:
        raise BadUnitError(f"not a decimal magnitude: {raw!r}") from exc


def _check_unit(unit: str | None, monetary: bool) -> str | None:
    if unit in (None, ""):
        if monetary:
            raise BadUnitError("monetary quantity requires a currency unit")
        return None
    unit = str(unit)
    if monetary and not _MONETARY_UNIT.match(unit):
        raise BadUnitError(f"monetary unit must match [A-Z]{{3}}: {unit!r}")
    return unit


def _parse_duration(raw: Any) -> int:
    if isinstance(raw, str) and raw.strip().lower() == "real-time":
        return 0
    try:
        ms = int(raw)
    except (TypeError, ValueError) as exc:
        raise BadUnitError(f"bad duration: {raw!r}") from exc
    if ms < 0:
        raise BadUnitError(f"duration cannot be negative: {raw!r}")
    return ms


# A FieldMapping binds facet names to source keys, or to constants via
# {"const": value}. Composite facets use suffixed names (who_role,
# how_much_unit, result_status, ...). The optional "monetary" entry, when
# true, enforces the currency-code pattern on quantity units.
FieldMapping = Mapping[str, Any]

_FACET_KEYS = {
    "who", "who_role", "what", "why", "when", "where", "how",
    "how_much", "how_much_unit", "how_long",
    "result_status", "result_value", "result_unit", "monetary",
}


def _resolve(mapping: FieldMapping, record: Mapping[str, Any], facet: str) -> Any:
    spec = mapping.get(facet)
    if spec is None:
        return None
    if isinstance(spec, Mapping):
        return spec.get("const")
    value = record.get(spec)
    if value == "":
        return None
    return value


def parse_event_record(record: Mapping[str, Any], mapping: FieldMapping) -> Event5W3H1R:
    """Build one event from a flat source record using a field mapping.

    Mandatory facets that resolve to nothing raise MissingFieldError; unit and
    timestamp violations raise BadUnitError / BadTimestampError. Source keys
    the mapping does not consume are kept in the attributes bag.
    """
    values = {facet: _resolve(mapping, record, facet) for facet in _FACET_KEYS}
    for facet in MANDATORY_FACETS:
        if values[facet] in (None, ""):
            raise MissingFieldError(facet)

    monetary = bool(values["monetary"])
    how_much = None
    if values["how_much"] is not None:
        how_much = Quantity(
            _parse_magnitude(values["how_much"]),
            _check_unit(values["how_much_unit"], monetary),
        )
    result_value = None
    if values["result_value"] is not None:
        result_value = Quantity(
            _parse_magnitude(values["result_value"]),
            _check_unit(values["result_unit"], monetary),
        )
    status_raw = values["result_status"]
    try:
        status = ResultStatus(status_raw) if status_raw is not None else ResultStatus.PENDING
    except ValueError as exc:
        raise BadUnitError(f"unknown result status: {status_raw!r}") from exc

    consumed = {
        spec for spec in (mapping.get(f) for f in _FACET_KEYS)
        if isinstance(spec, str)
    }
    attributes = tuple(
        (k, record[k]) for k in record if k not in consumed
    )

    return Event5W3H1R(
        who=Actor(str(values["who"]), str(values["who_role"] or "")),
        what=str(values["what"]),
        why=str(values["why"]),
        when_ms=parse_timestamp(values["when"]),
        how=str(values["how"]),
        where=str(values["where"] or ""),
        how_much=how_much,
        how_long_ms=None if values["how_long"] is None else _parse_duration(values["how_long"]),
        result=Outcome(status, result_value),
        attributes=attributes,
    )


def render_narrative(event: Event5W3H1R) -> str:
    """One deterministic sentence per event.

    Facet order is fixed: who, why, how, what, duration, result. The result
    segment carries the amount (result value if set, else the how-much
    quantity); events without either omit the amount entirely.
    """
    who = f"{event.who.role} {event.who.id}".strip()
    parts = [f"{who} performed {event.why} via {event.how}", f"updating {event.what}"]
    if event.how_long_ms is not None:
        parts.append("in real-time" if event.how_long_ms == 0 else f"in {event.how_long_ms} ms")
    amount = event.result.value or event.how_much
    tail = f"result: {event.result.status.value}"
    if amount is not None:
        tail += f" {amount.render()}"
    parts.append(tail)
    return ", ".join(parts)


def serialize_event(event: Event5W3H1R) -> dict[str, Any]:
    """Canonical JSON document: all nine facet keys, decimals as strings."""

    def quantity(q: Quantity | None) -> dict[str, Any] | None:
        if q is None:
            return None
        return {"magnitude": str(q.magnitude), "unit": q.unit}

    return {
        "who": {"id": event.who.id, "role": event.who.role},
        "what": event.what,
        "why": event.why,
        "when": format_timestamp(event.when_ms),
        "where": event.where,
        "how": event.how,
        "how_much": quantity(event.how_much),
        "how_long": event.how_long_ms,
        "result": {
            "status": event.result.status.value,
            "value": quantity(event.result.value),
        },
        "attributes": {k: v for k, v in event.attributes},
    }


def event_from_document(doc: Mapping[str, Any]) -> Event5W3H1R:
    """Inverse of serialize_event."""

    def quantity(obj: Mapping[str, Any] | None) -> Quantity | None:
        if obj is None:
            return None
        return Quantity(_parse_magnitude(obj["magnitude"]), obj.get("unit"))

    who = doc.get("who")
    if not who or not who.get("id"):
        raise MissingFieldError("who")
    for facet in ("what", "why", "when", "how"):
        if not doc.get(facet):
            raise MissingFieldError(facet)
    result = doc.get("result") or {}
    return Event5W3H1R(
        who=Actor(str(who["id"]), str(who.get("role", ""))),
        what=str(doc["what"]),
        why=str(doc["why"]),
        when_ms=parse_timestamp(doc["when"]),
        how=str(doc["how"]),
        where=str(doc.get("where", "")),
        how_much=quantity(doc.get("how_much")),
        how_long_ms=None if doc.get("how_long") is None else _parse_duration(doc["how_long"]),
        result=Outcome(
            ResultStatus(result.get("status", "pending")),
            quantity(result.get("value")),
        ),
        attributes=tuple((doc.get("attributes") or {}).items()),
    )


def canonical_json(event: Event5W3H1R) -> str:
    return json.dumps(serialize_event(event), sort_keys=True, separators=(",", ":"))


@dataclass(frozen=True)
class EventLog:
    """Events in stable non-decreasing order of their when facet."""

    events: tuple[Event5W3H1R, ...]
    source: str = ""
    schema_version: str = SCHEMA_VERSION

    def __post_init__(self):
        ordered = tuple(sorted(self.events, key=lambda e: e.when_ms))
        object.__setattr__(self, "events", ordered)

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self):
        return iter(self.events)


def load_event_log(path: str | Path, mapping: FieldMapping) -> EventLog:
    """Ingest a CSV (with header) or JSONL file into an EventLog.

    Parse errors keep their type but gain the offending row number.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    records: Iterable[tuple[int, Mapping[str, Any]]]
    if path.suffix.lower() == ".csv":
        records = list(enumerate(csv.DictReader(text.splitlines()), start=2))
    else:
        records = [
            (i, json.loads(line))
            for i, line in enumerate(text.splitlines(), start=1)
            if line.strip()
        ]
    events = []
    for row, record in records:
        try:
            events.append(parse_event_record(record, mapping))
        except (MissingFieldError, BadUnitError, BadTimestampError) as exc:
            exc.detail = f"row {row}: {exc.detail}"
            exc.args = (exc.detail,)
            raise
    return EventLog(tuple(events), source=str(path))
