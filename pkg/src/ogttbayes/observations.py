"""Per-patient glucose readings tagged by blood source."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

__all__ = ["Observation", "ObservationSet", "SOURCES", "VENOUS", "CAPILLARY"]

VENOUS = "venous"
CAPILLARY = "capillary"
SOURCES = (VENOUS, CAPILLARY)

VALUE_RANGE = (0.0, 1000.0)


class Observation(NamedTuple):
    time: float  # hours
    value: float  # mg/dl
    source: str


@dataclass(frozen=True)
class ObservationSet:
    """Readings for one patient.

    ``pretest`` is the optional glucometer reading taken on venous blood
    before the glucose load.
    """

    patient_id: str
    observations: tuple = ()
    pretest: Optional[float] = None

    def __post_init__(self):
        obs = tuple(Observation(float(t), float(v), str(s)) for t, v, s in self.observations)
        object.__setattr__(self, "observations", obs)
        lo, hi = VALUE_RANGE
        last = {}
        for j, (t, v, s) in enumerate(obs):
            if s not in SOURCES:
                raise ValueError(f"observation {j}: unknown source {s!r}")
            if not (math.isfinite(t) and t >= 0):
                raise ValueError(f"observation {j}: time must be nonnegative, got {t!r}")
            if not (lo < v < hi):
                raise ValueError(f"observation {j}: value {v!r} outside ({lo}, {hi})")
            if s in last and not t > last[s]:
                raise ValueError(
                    f"observation {j}: {s} times must be strictly increasing "
                    f"({t!r} after {last[s]!r})"
                )
            last[s] = t
        if self.pretest is not None and not (lo < self.pretest < hi):
            raise ValueError(f"pretest value {self.pretest!r} outside ({lo}, {hi})")

    def series(self, source: str) -> tuple[np.ndarray, np.ndarray]:
        """(times in hours, values in mg/dl) for one source."""
        rows = [(t, v) for t, v, s in self.observations if s == source]
        if not rows:
            return np.empty(0), np.empty(0)
        arr = np.array(rows, dtype=np.float64)
        return arr[:, 0], arr[:, 1]

    def count(self, source: str) -> int:
        return sum(1 for o in self.observations if o.source == source)

    @property
    def sources(self) -> tuple[str, ...]:
        return tuple(s for s in SOURCES if self.count(s) > 0)

    @classmethod
    def from_series(
        cls,
        patient_id: str,
        venous: tuple | None = None,
        capillary: tuple | None = None,
        pretest: float | None = None,
    ) -> "ObservationSet":
        """Build from ``(times_hours, values)`` pairs per source."""
        obs = []
        for source, series in ((VENOUS, venous), (CAPILLARY, capillary)):
            if series is None:
                continue
            times, values = series
            obs.extend(Observation(t, v, source) for t, v in zip(times, values))
        return cls(patient_id, tuple(obs), pretest)


def matched_pairs(obs: ObservationSet) -> list[tuple[float, float, float]]:
    """(time, venous, capillary) for every time present in both series."""
    tv, yv = obs.series(VENOUS)
    tc, yc = obs.series(CAPILLARY)
    cap = dict(zip(tc.tolist(), yc.tolist()))
    return [(t, v, cap[t]) for t, v in zip(tv.tolist(), yv.tolist()) if t in cap]
