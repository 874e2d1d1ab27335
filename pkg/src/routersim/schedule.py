"""Timed pulse schedules: steps, resource validation, serialization.

Steps address physical resources (qubits, cavities); overlapping steps on one
resource are rejected, except that inter-module and V exchange tones all ride
the SNAIL drive line, which explicitly permits tone superposition.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import ScheduleError

STEP_KINDS = (
    "rotate_qubit",      # params: qubit, axis (x|y|z), angle (rad)
    "displace_cavity",   # params: cavity, amplitude_re, amplitude_im
    "intra_iswap",       # params: qubit, cavity, exponent, rate_mhz, detuning_khz
    "inter_iswap",       # params: pair [a, b], exponent, rate_mhz, detuning_khz
    "v_iswap",           # params: source, targets [t1, t2], rate_mhz, detuning_khz
    "selective_pi",      # params: qubit, cavity (control on one photon)
    "delay",             # params: {}
    "measure",           # params: qubits [..]
)

# Exchange tones through the SNAIL may superpose; their cavity endpoints are
# still exclusive resources.
_SNAIL_DRIVEN = ("inter_iswap", "v_iswap")


@dataclass(frozen=True)
class SequenceStep:
    kind: str
    start: float  # ns
    duration: float  # ns
    params: dict

    def __post_init__(self):
        if self.kind not in STEP_KINDS:
            raise ScheduleError(f"unknown step kind {self.kind!r}")
        if self.start < 0 or self.duration < 0:
            raise ScheduleError(f"{self.kind}: negative start or duration")

    @property
    def end(self) -> float:
        return self.start + self.duration

    def resources(self) -> set:
        p = self.params
        if self.kind == "rotate_qubit":
            return {p["qubit"]}
        if self.kind == "displace_cavity":
            return {p["cavity"]}
        if self.kind == "intra_iswap":
            return {p["qubit"], p["cavity"]}
        if self.kind == "inter_iswap":
            return set(p["pair"])
        if self.kind == "v_iswap":
            return {p["source"], *p["targets"]}
        if self.kind == "selective_pi":
            return {p["qubit"], p["cavity"]}
        if self.kind == "measure":
            return set(p["qubits"])
        return set()

    def touched_modes(self) -> set:
        return self.resources()


@dataclass(frozen=True)
class PulseSchedule:
    protocol: str
    device_label: str
    steps: tuple[SequenceStep, ...]
    sweep_axes: dict = field(default_factory=dict)  # name -> [values]
    options: dict = field(default_factory=dict)

    @property
    def total_duration(self) -> float:
        return max((s.end for s in self.steps), default=0.0)

    def touched_modes(self) -> list[str]:
        modes = set()
        for s in self.steps:
            modes |= s.touched_modes()
        return sorted(modes)

    def validate(self, device=None):
        """Resource-conflict and terminal-measurement checks."""
        # SNAIL-driven tones never claim the shared pump line (superposition is
        # allowed there); only their cavity endpoints are exclusive.
        busy: dict[str, list[tuple[float, float, str]]] = {}
        for s in self.steps:
            for res in s.resources():
                busy.setdefault(res, []).append((s.start, s.end, s.kind))
        for res, spans in busy.items():
            spans.sort()
            for (a0, a1, ka), (b0, b1, kb) in zip(spans, spans[1:]):
                if b0 < a1 - 1e-9:
                    raise ScheduleError(
                        f"resource {res}: {ka} [{a0},{a1}] overlaps {kb} [{b0},{b1}]"
                    )
        measured_at: dict[str, float] = {}
        for s in self.steps:
            if s.kind == "measure":
                for q in s.params["qubits"]:
                    measured_at[q] = min(measured_at.get(q, s.start), s.start)
        for s in self.steps:
            if s.kind == "measure":
                continue
            for res in s.resources():
                if res in measured_at and s.end > measured_at[res] + 1e-9:
                    raise ScheduleError(
                        f"step {s.kind} on {res} after its measurement")
        if device is not None:
            known = {m.id for m in device.modes}
            for m in self.touched_modes():
                if m not in known:
                    raise ScheduleError(f"schedule references unknown mode {m!r}")
        return self

    # -- stable serialization for golden files ---------------------------------

    def to_json(self) -> str:
        doc = {
            "protocol": self.protocol,
            "device_label": self.device_label,
            "total_duration": self.total_duration,
            "sweep_axes": {k: list(v) for k, v in sorted(self.sweep_axes.items())},
            "options": {k: self.options[k] for k in sorted(self.options)},
            "steps": [
                {
                    "kind": s.kind,
                    "start": s.start,
                    "duration": s.duration,
                    "params": {k: s.params[k] for k in sorted(s.params)},
                }
                for s in self.steps
            ],
        }
        return json.dumps(doc, indent=2, sort_keys=False)

    @staticmethod
    def from_json(text: str) -> "PulseSchedule":
        doc = json.loads(text)
        steps = tuple(
            SequenceStep(
                kind=s["kind"], start=s["start"], duration=s["duration"],
                params=s["params"],
            )
            for s in doc["steps"]
        )
        return PulseSchedule(
            protocol=doc["protocol"],
            device_label=doc["device_label"],
            steps=steps,
            sweep_axes={k: list(v) for k, v in doc.get("sweep_axes", {}).items()},
            options=doc.get("options", {}),
        )
