"""
Trace CSV files: one row per measurement, data block, or protocol event.
"""
import logging
from pathlib import Path

import numpy as np
import pandas as pd

from models.errors import TraceReplayError
from models.sim.metrics import TRACE_COLUMNS
from models.sim.phy import row_kind
from utils.files import atomic_write_frame

logger = logging.getLogger(__name__)

_INT_COLUMNS = ("t_ms", "ue_id", "gnb_id")
_STR_COLUMNS = ("path", "event")


def write_trace(trace: pd.DataFrame, path) -> Path:
    missing = [c for c in TRACE_COLUMNS if c not in trace.columns]
    if missing:
        raise TraceReplayError(f"trace frame is missing columns {missing}")
    out = atomic_write_frame(path, trace[TRACE_COLUMNS])
    logger.info("wrote %d trace rows to %s", len(trace), out)
    return out


def read_trace(path) -> pd.DataFrame:
    """Read a trace written by `write_trace`; floats come back bit-exact."""
    path = Path(path)
    if not path.exists():
        raise TraceReplayError(f"trace file not found: {path}")
    df = pd.read_csv(path, float_precision="round_trip", keep_default_na=False,
                     na_values={c: [""] for c in TRACE_COLUMNS if c not in _STR_COLUMNS})
    missing = [c for c in TRACE_COLUMNS if c not in df.columns]
    if missing:
        raise TraceReplayError(f"{path} is not a trace file; missing columns {missing}")
    for c in _INT_COLUMNS:
        df[c] = df[c].astype(np.int64)
    for c in _STR_COLUMNS:
        df[c] = df[c].astype(str)
    for c in TRACE_COLUMNS:
        if c not in _INT_COLUMNS and c not in _STR_COLUMNS:
            df[c] = df[c].astype(float)
    return df[TRACE_COLUMNS]


def rsrp_table(trace: pd.DataFrame, kind: str = "link") -> pd.DataFrame:
    """
    RSRP samples per (t, ue, gnb, path) for plotting: `link` takes the data rows,
    `meas` the measurement rows.
    """
    kinds = trace["event"].astype(str).map(row_kind)
    sel = trace[kinds == kind]
    return sel[["t_ms", "ue_id", "gnb_id", "path", "rsrp_dbm", "sinr_db"]].reset_index(drop=True)
