"""Patient CSV files.

Format: UTF-8, LF line endings, header ``time_min,source,glucose_mgdl``;
``source`` is one of ``venous``, ``capillary`` or ``pretest`` (at most one
pretest row, its time is ignored). Times are minutes on disk and hours in
memory.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .observations import VALUE_RANGE, Observation, ObservationSet, SOURCES

__all__ = ["HEADER", "PatientFileError", "load_patient", "write_patient", "minutes_repr"]

HEADER = ("time_min", "source", "glucose_mgdl")
PRETEST = "pretest"


class PatientFileError(ValueError):
    def __init__(self, path, row, message):
        self.path, self.row = str(path), row
        where = f"{path}" if row is None else f"{path}, row {row}"
        super().__init__(f"{where}: {message}")


def _parse_float(text, path, row, what):
    try:
        value = float(text)
    except ValueError:
        raise PatientFileError(path, row, f"{what} {text!r} is not a number") from None
    if not math.isfinite(value):
        raise PatientFileError(path, row, f"{what} {text!r} is not finite")
    return value


def load_patient(path) -> ObservationSet:
    """Read one patient file; the patient id is the file stem.

    A header-only file gives an empty ObservationSet, so every valid set
    round-trips through :func:`write_patient`; inference rejects it later.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise PatientFileError(path, None, "empty file")
    if tuple(c.strip() for c in rows[0]) != HEADER:
        raise PatientFileError(path, 1, f"expected header {','.join(HEADER)}, got {','.join(rows[0])}")

    lo, hi = VALUE_RANGE
    obs, pretest, last = [], None, {}
    for row_no, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 3:
            raise PatientFileError(path, row_no, f"expected 3 fields, got {len(row)}")
        t_text, source, v_text = (c.strip() for c in row)
        t_min = _parse_float(t_text, path, row_no, "time")
        value = _parse_float(v_text, path, row_no, "glucose")
        if not lo < value < hi:
            raise PatientFileError(path, row_no, f"glucose {value} outside ({lo}, {hi}) mg/dl")
        if source == PRETEST:
            if pretest is not None:
                raise PatientFileError(path, row_no, "more than one pretest row")
            pretest = value
            continue
        if source not in SOURCES:
            raise PatientFileError(path, row_no, f"unknown source {source!r}")
        if t_min < 0:
            raise PatientFileError(path, row_no, f"negative time {t_min}")
        if source in last and not t_min > last[source]:
            raise PatientFileError(
                path, row_no, f"{source} time {t_min} min does not follow {last[source]} min"
            )
        last[source] = t_min
        obs.append(Observation(t_min / 60.0, value, source))
    return ObservationSet(path.stem, tuple(obs), pretest)


def minutes_repr(hours: float) -> str:
    """Minute count for ``hours``, exact on read-back whenever one exists.

    Times read from a file are ``minutes / 60``, so they always round-trip.
    Some hour values have no float ``m`` with ``m / 60 == hours``; those are
    written as the nearest minute count and read back within one ulp.
    """
    m = hours * 60.0
    candidates = [m]
    up = down = m
    for _ in range(8):
        up = float(np.nextafter(up, math.inf))
        down = float(np.nextafter(down, -math.inf))
        candidates += [up, down]
    for c in candidates:
        if c / 60.0 == hours:
            return repr(c)
    return repr(m)


def write_patient(obs: ObservationSet, path) -> Path:
    path = Path(path)
    lines = [",".join(HEADER)]
    if obs.pretest is not None:
        lines.append(f"0,{PRETEST},{obs.pretest!r}")
    for t, v, s in obs.observations:
        lines.append(f"{minutes_repr(t)},{s},{v!r}")
    path.write_bytes(("\n".join(lines) + "\n").encode("utf-8"))
    return path
