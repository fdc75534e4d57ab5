import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ogttbayes.io import PatientFileError, load_patient, minutes_repr, write_patient
from ogttbayes.observations import ObservationSet, matched_pairs

HEADER = "time_min,source,glucose_mgdl\n"


def write(tmp_path, body, name="p1.csv"):
    path = tmp_path / name
    path.write_bytes((HEADER + body).encode("utf-8"))
    return path


def test_five_row_venous(tmp_path):
    body = "".join(f"{m},venous,{v}\n" for m, v in zip((0, 30, 60, 90, 120), (81, 156, 141, 102, 89)))
    obs = load_patient(write(tmp_path, body))
    t, y = obs.series("venous")
    assert obs.patient_id == "p1"
    assert t.tolist() == [0.0, 0.5, 1.0, 1.5, 2.0]
    assert y.tolist() == [81.0, 156.0, 141.0, 102.0, 89.0]
    assert obs.sources == ("venous",)


def test_sources_of_different_lengths_and_pretest(tmp_path):
    body = "0,pretest,95\n0,venous,90\n30,venous,150\n60,venous,130\n0,capillary,93\n45,capillary,160\n"
    obs = load_patient(write(tmp_path, body))
    assert obs.pretest == 95.0
    assert obs.count("venous") == 3 and obs.count("capillary") == 2
    assert matched_pairs(obs) == [(0.0, 90.0, 93.0)]


@pytest.mark.parametrize(
    "content,row",
    [
        ("", None),
        ("time,source,value\n0,venous,80\n", 1),
        (HEADER + "0,venous\n", 2),
        (HEADER + "0,venous,abc\n", 2),
        (HEADER + "0,venous,80\n30,venous,nan\n", 3),
        (HEADER + "0,venous,80\n0,venous,90\n", 3),
        (HEADER + "30,venous,80\n0,venous,90\n", 3),
        (HEADER + "0,venous,1200\n", 2),
        (HEADER + "0,venous,0\n", 2),
        (HEADER + "-5,venous,80\n", 2),
        (HEADER + "0,arterial,80\n", 2),
        (HEADER + "0,pretest,80\n0,pretest,81\n", 3),
    ],
)
def test_malformed(tmp_path, content, row):
    path = tmp_path / "bad.csv"
    path.write_bytes(content.encode("utf-8"))
    with pytest.raises(PatientFileError) as info:
        load_patient(path)
    assert info.value.row == row
    assert "bad.csv" in str(info.value)


def test_header_only(tmp_path):
    obs = load_patient(write(tmp_path, ""))
    assert obs.observations == () and obs.sources == ()


def test_written_bytes(tmp_path):
    obs = ObservationSet.from_series("w", venous=([0.0, 0.5], [81.0, 156.0]), pretest=99.5)
    path = write_patient(obs, tmp_path / "w.csv")
    assert path.read_bytes() == b"time_min,source,glucose_mgdl\n0,pretest,99.5\n0.0,venous,81.0\n30.0,venous,156.0\n"


# uniqueness is on the hour value, since tiny distinct minutes can collapse after /60
minute_lists = st.lists(
    st.floats(0.0, 1e4, allow_nan=False), min_size=0, max_size=8, unique_by=lambda m: m / 60.0
).map(sorted)
glucose = st.floats(1e-3, 999.999)


@st.composite
def observation_sets(draw):
    series = {}
    for source in ("venous", "capillary"):
        minutes = draw(minute_lists)
        values = draw(st.lists(glucose, min_size=len(minutes), max_size=len(minutes)))
        series[source] = ([m / 60.0 for m in minutes], values)
    pretest = draw(st.none() | glucose)
    return ObservationSet.from_series("rt", pretest=pretest, **series)


@settings(max_examples=200, deadline=None)
@given(observation_sets())
def test_round_trip(tmp_path_factory, obs):
    path = tmp_path_factory.mktemp("rt") / "rt.csv"
    write_patient(obs, path)
    assert load_patient(path) == obs


@given(st.floats(0.0, 1e3))
def test_minutes_repr_close(hours):
    back = float(minutes_repr(hours)) / 60.0
    assert back == hours or math.isclose(back, hours, rel_tol=0, abs_tol=np.spacing(hours) * 1.01)


@given(st.floats(0.0, 1e5))
def test_minutes_repr_exact_for_file_times(m):
    hours = m / 60.0
    assert float(minutes_repr(hours)) / 60.0 == hours
