import math

import pandas as pd
import pytest

from data.trace_io import read_trace, rsrp_table, write_trace
from models.channel import PathKind
from models.codebook import CodebookKey, CodebookMode
from models.errors import TraceReplayError
from models.sim.metrics import TRACE_COLUMNS
from models.sim.phy import PhyQuery, TracePhy, row_kind

NAN = math.nan
KEY = CodebookKey(10.0, 0.0, 0.0, CodebookMode.SINGLE)


@pytest.fixture
def trace():
    rows = [
        (0, 0, -1, "", NAN, NAN, NAN, NAN, NAN, NAN, NAN, "idle"),
        (0, 0, 0, "via-surface-transmissive", 3.0, 10.0, 0.0, 0.0, -61.25, 23.75, NAN, "meas-attach"),
        (0, 0, 0, "via-surface-transmissive", 4.0, 10.0, 0.0, 0.0, -70.5, 14.5, NAN, "meas-attach"),
        (80, -1, 0, "via-surface-transmissive", 3.0, 10.0, 0.0, 0.0, -61.25, 23.75, NAN, "attach"),
        (80, 0, 0, "via-surface-transmissive", NAN, 10.0, 0.0, 0.0, -60.1, 24.9, 0.1 + 0.2, "deliver"),
        (81, 0, 0, "via-surface-transmissive", NAN, 10.0, 0.0, 0.0, -60.3, 24.7, 1e-9, "deliver*0.5"),
        (240, 0, 1, "via-surface-reflective", NAN, 10.0, 25.0, 0.25, -math.inf, -math.inf, 1.0, "meas"),
    ]
    return pd.DataFrame(rows, columns=TRACE_COLUMNS)


def test_round_trip_is_exact(trace, tmp_path):
    back = read_trace(write_trace(trace, tmp_path / "run" / "trace.csv"))
    pd.testing.assert_frame_equal(back, trace, check_dtype=False)
    assert back["t_ms"].dtype == "int64"
    assert back.loc[4, "per"] == 0.1 + 0.2
    assert back.loc[0, "path"] == ""


def test_missing_file_and_columns(tmp_path):
    with pytest.raises(TraceReplayError, match="not found"):
        read_trace(tmp_path / "absent.csv")
    (tmp_path / "other.csv").write_text("a,b\n1,2\n")
    with pytest.raises(TraceReplayError, match="missing columns"):
        read_trace(tmp_path / "other.csv")
    with pytest.raises(TraceReplayError):
        write_trace(pd.DataFrame({"t_ms": [0]}), tmp_path / "bad.csv")


def test_row_kinds():
    assert row_kind("meas") == "meas"
    assert row_kind("meas-attach") == "attach"
    assert row_kind("dup*0.5") == "link"
    assert row_kind("release@81") is None
    assert row_kind("ho-complete") is None


def test_rsrp_table_filters_by_kind(trace):
    link = rsrp_table(trace)
    assert link["rsrp_dbm"].tolist() == [-60.1, -60.3]
    meas = rsrp_table(trace, "meas")
    assert meas["path"].tolist() == [PathKind.REFLECTIVE.value]


def test_trace_phy_answers_recorded_queries(trace):
    phy = TracePhy(trace)
    assert phy.query(None, PhyQuery("link", 81, 0, 0, PathKind.TRANSMISSIVE, KEY)) == -60.3
    assert phy.query(None, PhyQuery("attach", 0, 0, 0, PathKind.TRANSMISSIVE, KEY, gnb_beam=4, ue_beam=0)) == -70.5
    reflect = CodebookKey(10.0, 25.0, 0.25, CodebookMode.DUAL_TRANSFLECTIVE)
    assert phy.query(None, PhyQuery("meas", 240, 0, 1, PathKind.REFLECTIVE, reflect)) == -math.inf
    with pytest.raises(TraceReplayError, match="no record"):
        phy.query(None, PhyQuery("link", 82, 0, 0, PathKind.TRANSMISSIVE, KEY))


def test_calibration_offset_shifts_finite_values(trace):
    phy = TracePhy(trace, calibration_db=10.0)
    assert phy.query(None, PhyQuery("link", 80, 0, 0, PathKind.TRANSMISSIVE, KEY)) == pytest.approx(-50.1)
    reflect = CodebookKey(10.0, 25.0, 0.25, CodebookMode.DUAL_TRANSFLECTIVE)
    assert phy.query(None, PhyQuery("meas", 240, 0, 1, PathKind.REFLECTIVE, reflect)) == -math.inf
