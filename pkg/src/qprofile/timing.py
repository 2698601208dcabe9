"""Hardware timing constants used for schedule-duration accounting."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class TimingModel:
    """Fixed per-operation durations, in seconds."""

    passive_reset: float = 200e-6
    active_reset: float = 1e-6
    gate_1q: float = 40e-9
    gate_2q: float = 100e-9
    measurement: float = 500e-9

    def __post_init__(self):
        for name in ("passive_reset", "active_reset", "gate_1q", "gate_2q", "measurement"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    def reset_duration(self, mode: str) -> float:
        if mode == "passive":
            return self.passive_reset
        if mode == "active":
            return self.active_reset
        raise ValueError(f"unknown reset mode {mode!r}")


DEFAULT_TIMING = TimingModel()
