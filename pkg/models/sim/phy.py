"""
PHY sources answering the engine's RSRP queries: the synthetic channel, or the rows of a
previously written trace.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Protocol

import pandas as pd

from models.channel import BeamIds, NodeGeometry, PathKind, rsrp
from models.codebook import Codebook, CodebookKey
from models.errors import TraceReplayError
from models.sim.scenario import Scenario
from models.surface_model import DEFAULT_ATOM_MODEL, AtomModel

logger = logging.getLogger(__name__)

LINK_TAGS = ("deliver", "hold", "dup", "loss", "blackout-scan", "blackout-rach", "outage")


@dataclass(frozen=True)
class PhyQuery:
    kind: str  # link | meas | attach
    t: int
    ue_id: int
    gnb_id: int
    path: PathKind
    key: CodebookKey | None = None
    gnb_beam: int | None = None
    ue_beam: int | None = None
    serving: int | None = None

    def trace_key(self) -> tuple:
        k = self.key
        return (self.kind, int(self.t), int(self.ue_id), int(self.gnb_id), PathKind(self.path).value,
                None if k is None else k.theta_t, None if k is None else k.theta_r,
                None if k is None else k.alpha, self.gnb_beam if self.kind == "attach" else None)


class PhySource(Protocol):
    def query(self, geometry: NodeGeometry, q: PhyQuery) -> float:
        ...


class SyntheticPhy:
    def __init__(self, scenario: Scenario, codebook: Codebook | None = None,
                 model: AtomModel = DEFAULT_ATOM_MODEL):
        self.budget = scenario.link.budget
        self.noise = scenario.noise_model()
        self.codebook = codebook
        self.model = model

    def _surface(self, key: CodebookKey | None):
        if key is None or self.codebook is None:
            return None
        return self.codebook.lookup(key)

    def query(self, geometry: NodeGeometry, q: PhyQuery) -> float:
        ue = None if q.path is PathKind.REFLECTIVE else q.ue_id
        sample = rsrp(geometry, self.budget, self._surface(q.key), q.path, ue, self.noise, q.t, q.gnb_id,
                      serving_id=q.serving, beams=BeamIds(gnb_beam=q.gnb_beam, ue_beam=q.ue_beam),
                      model=self.model)
        return sample.value


def _none_if_nan(value):
    if value is None:
        return None
    if isinstance(value, float) and math.isnan(value):
        return None
    return value


def row_kind(event: str) -> str | None:
    if event == "meas":
        return "meas"
    if event == "meas-attach":
        return "attach"
    if event.split("*")[0] in LINK_TAGS:
        return "link"
    return None


class TracePhy:
    """RSRP values read back from trace rows, optionally shifted by a calibration offset."""

    def __init__(self, trace: pd.DataFrame, calibration_db: float = 0.0):
        self.calibration_db = float(calibration_db)
        self.index: dict[tuple, float] = {}
        if self.calibration_db:
            logger.warning("trace replay applies a %+.1f dB calibration offset", self.calibration_db)
        for row in trace.itertuples(index=False):
            kind = row_kind(str(row.event))
            if kind is None or _none_if_nan(row.gnb_id) is None or int(row.gnb_id) < 0:
                continue
            beam = _none_if_nan(row.gnb_beam)
            key = (kind, int(row.t_ms), int(row.ue_id), int(row.gnb_id), str(row.path),
                   _none_if_nan(float(row.surf_t_deg)), _none_if_nan(float(row.surf_r_deg)),
                   _none_if_nan(float(row.alpha)),
                   int(beam) if kind == "attach" and beam is not None else None)
            self.index.setdefault(key, float(row.rsrp_dbm))

    def query(self, geometry: NodeGeometry, q: PhyQuery) -> float:
        try:
            value = self.index[q.trace_key()]
        except KeyError:
            raise TraceReplayError(f"trace has no record for {q.trace_key()}") from None
        return value + self.calibration_db if math.isfinite(value) else value
