"""Append-only trial event log.

A trial's single source of truth is a time-ordered list of events:
enrollments, treatment assignments, outcomes, accrual suspensions and the
final stop.  Replaying the list reconstructs the analysis dataset exactly;
the log serializes one JSON object per line for append-only durability.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

__all__ = ["Event", "TrialState", "EventLogError"]

EVENT_TYPES = ("enroll", "assign", "outcome", "suspend", "resume", "stop")


class EventLogError(ValueError):
    """The event log violates ordering or referential invariants."""


@dataclass(frozen=True)
class Event:
    type: str
    time: float
    patient: int | None = None
    data: dict = field(default_factory=dict)

    def to_json(self) -> str:
        obj = {"type": self.type, "time": self.time}
        if self.patient is not None:
            obj["patient"] = self.patient
        if self.data:
            obj["data"] = self.data
        return json.dumps(obj, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "Event":
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise EventLogError(f"unparseable event line: {exc}") from exc
        if not isinstance(obj, dict) or "type" not in obj or "time" not in obj:
            raise EventLogError(f"event missing type/time: {line.strip()}")
        return cls(
            type=obj["type"],
            time=float(obj["time"]),
            patient=obj.get("patient"),
            data=obj.get("data", {}),
        )


class TrialState:
    """Validated, append-only event list with derived per-patient views."""

    def __init__(self, events=()):
        self.events: list[Event] = []
        self._enrolled: list[Event] = []
        self._assignments: dict[int, Event] = {}
        self._outcomes: dict[int, Event] = {}
        self._stop_seen = False
        for e in events:
            self.append(e)

    def __len__(self) -> int:
        return len(self.events)

    def append(self, event: Event) -> None:
        if event.type not in EVENT_TYPES:
            raise EventLogError(f"unknown event type {event.type!r}")
        if self.events and event.time < self.events[-1].time - 1e-12:
            raise EventLogError(
                f"event at {event.time} precedes the log tail at {self.events[-1].time}"
            )
        if self.stopped and event.type != "outcome":
            # a stop ends enrollment; outcomes of already-treated patients
            # may still mature afterwards
            raise EventLogError(f"no {event.type} events may follow a stop event")
        if event.type == "enroll":
            if event.patient != self.n_enrolled:
                raise EventLogError(
                    f"enroll patient {event.patient}, expected {self.n_enrolled}"
                )
        elif event.type == "assign":
            if event.patient is None or event.patient >= self.n_enrolled:
                raise EventLogError(f"assign references unknown patient {event.patient}")
            if event.patient in self._assignments:
                raise EventLogError(f"patient {event.patient} already assigned")
        elif event.type == "outcome":
            if event.patient not in self._assignments:
                raise EventLogError(
                    f"outcome references unassigned patient {event.patient}"
                )
            if event.patient in self._outcomes:
                raise EventLogError(f"patient {event.patient} already has an outcome")
        self.events.append(event)
        if event.type == "enroll":
            self._enrolled.append(event)
        elif event.type == "assign":
            self._assignments[event.patient] = event
        elif event.type == "outcome":
            self._outcomes[event.patient] = event
        elif event.type == "stop":
            self._stop_seen = True

    @property
    def n_enrolled(self) -> int:
        return len(self._enrolled)

    @property
    def n_assigned(self) -> int:
        return len(self._assignments)

    @property
    def n_outcomes(self) -> int:
        return len(self._outcomes)

    @property
    def stopped(self) -> bool:
        return self._stop_seen

    @property
    def stop_reason(self) -> str | None:
        for e in reversed(self.events):
            if e.type == "stop":
                return e.data.get("reason")
        return None

    @property
    def last_time(self) -> float:
        return self.events[-1].time if self.events else 0.0

    def enrollment(self, patient: int) -> Event:
        return self._enrolled[patient]

    def assignment(self, patient: int) -> Event | None:
        return self._assignments.get(patient)

    def outcome(self, patient: int) -> Event | None:
        return self._outcomes.get(patient)

    def evaluated_patients(self) -> list[int]:
        return sorted(self._outcomes)

    def pending_patients(self) -> list[int]:
        return sorted(p for p in self._assignments if p not in self._outcomes)

    def treated_patients(self) -> list[int]:
        return sorted(self._assignments)

    # -- serialization -------------------------------------------------------

    def to_jsonl(self) -> str:
        return "".join(e.to_json() + "\n" for e in self.events)

    @classmethod
    def from_jsonl(cls, text: str) -> "TrialState":
        state = cls()
        for line in text.splitlines():
            if line.strip():
                state.append(Event.from_json(line))
        return state

    def copy(self) -> "TrialState":
        clone = TrialState()
        for e in self.events:
            clone.append(e)
        return clone
