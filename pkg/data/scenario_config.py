"""
TOML scenario files.

Every section is read against a table of known keys and defaults: unknown keys are
rejected with their key path, and every default that fills a missing key is logged and
recorded on the Scenario. `emit_config` writes the canonical form with all fields, so
parsing it again gives an equal Scenario.
"""
import logging
from contextlib import contextmanager
from dataclasses import asdict, fields
from pathlib import Path

import toml

from models.channel import GnbSite, LinkBudgetParams, NodeGeometry, SurfaceMount, UeSite, Zone
from models.codebook import GaSettings
from models.errors import ConfigError, DomainError
from models.handover.state_machine import Protocol
from models.sim.scenario import (FAST_GA, LinkParams, NoiseParams, OutputParams, ProtocolParams, ReplayParams,
                                 Scenario, SurfaceParams, TimingParams, Trajectory)

logger = logging.getLogger(__name__)

REQUIRED = object()

SECTIONS = ("geometry", "gnbs", "ues", "surface", "timing", "protocol", "noise", "link", "replay", "output")

GEOMETRY_KEYS = {
    "waypoints": REQUIRED, "speed_kmh": REQUIRED, "duration_s": None, "heading": 0.0,
    "vehicle_length": 4.5, "vehicle_width": 1.8, "mount_offset": (-1.5, 0.9), "mount_normal": 90.0,
    "zones": (),
}
ZONE_KEYS = {"name": REQUIRED, "attenuation_db": 0.0, "blocked": False, "box": None}
GNB_KEYS = {
    "id": REQUIRED, "position": REQUIRED, "carrier_ghz": 26.0, "eirp_dbm": 60.0, "g_rx_dbi": 29.5,
    "boresight_deg": -90.0, "n_beams": 8, "beamwidth_deg": 20.0,
}
UE_KEYS = {"id": REQUIRED, "offset": REQUIRED, "zone": None, "g_ue_dbi": 8.0, "n_beams": 4, "beamwidth_deg": 90.0}
NOISE_KEYS = {"seed": 0, "sigma_db": NoiseParams.sigma_db, "coherence_ms": NoiseParams.coherence_ms}


def _field_defaults(cls, skip=()) -> dict:
    return {f.name: f.default for f in fields(cls) if f.name not in skip}


SURFACE_KEYS = {**_field_defaults(SurfaceParams, skip=("ga",)), "ga": {}}
GA_KEYS = asdict(FAST_GA)
TIMING_KEYS = _field_defaults(TimingParams)
PROTOCOL_KEYS = {"name": Protocol.WS.value, **_field_defaults(ProtocolParams, skip=("protocol",))}
LINK_KEYS = {**_field_defaults(LinkBudgetParams), **_field_defaults(LinkParams, skip=("budget",))}
REPLAY_KEYS = _field_defaults(ReplayParams)
OUTPUT_KEYS = _field_defaults(OutputParams)


class _Reader:
    def __init__(self):
        self.defaults: list[str] = []

    def take(self, table, path: str, keys: dict) -> dict:
        if not isinstance(table, dict):
            raise ConfigError("expected a table", path)
        unknown = sorted(set(table) - set(keys))
        if unknown:
            raise ConfigError("unknown key", f"{path}.{unknown[0]}")
        out = {}
        for key, default in keys.items():
            if key in table:
                out[key] = table[key]
            elif default is REQUIRED:
                raise ConfigError("missing required key", f"{path}.{key}")
            else:
                out[key] = default
                self.defaults.append(f"{path}.{key}")
                logger.info("default %s.%s = %r", path, key, default)
        return out

    def array(self, doc: dict, name: str) -> list:
        value = doc.get(name, [])
        if not isinstance(value, list):
            raise ConfigError("expected an array of tables", name)
        return value


@contextmanager
def _domain(path: str):
    try:
        yield
    except ConfigError:
        raise
    except (DomainError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc), path) from exc


def _path_value(value, base_dir: Path | None):
    if value is None or base_dir is None or Path(value).is_absolute():
        return value
    return str(base_dir / value)


def _tuple(value):
    return None if value is None else tuple(value)


def _build(doc: dict, name: str, base_dir: Path | None = None) -> Scenario:
    unknown = sorted(set(doc) - set(SECTIONS))
    if unknown:
        raise ConfigError("unknown section", unknown[0])
    rd = _Reader()

    geo = rd.take(doc.get("geometry", {}), "geometry", GEOMETRY_KEYS)
    zones = []
    for i, z in enumerate(geo["zones"]):
        path = f"geometry.zones[{i}]"
        z = rd.take(z, path, ZONE_KEYS)
        with _domain(path):
            zones.append(Zone(z["name"], None if z["blocked"] else float(z["attenuation_db"]), _tuple(z["box"])))

    gnbs = []
    for i, g in enumerate(rd.array(doc, "gnbs")):
        path = f"gnbs[{i}]"
        g = rd.take(g, path, GNB_KEYS)
        with _domain(path):
            gnbs.append(GnbSite(int(g["id"]), tuple(g["position"]), float(g["carrier_ghz"]), float(g["eirp_dbm"]),
                                float(g["g_rx_dbi"]), float(g["boresight_deg"]), int(g["n_beams"]),
                                float(g["beamwidth_deg"])))
    ues = []
    for i, u in enumerate(rd.array(doc, "ues")):
        path = f"ues[{i}]"
        u = rd.take(u, path, UE_KEYS)
        with _domain(path):
            ues.append(UeSite(int(u["id"]), tuple(u["offset"]), u["zone"], float(u["g_ue_dbi"]), int(u["n_beams"]),
                              float(u["beamwidth_deg"])))

    sf = rd.take(doc.get("surface", {}), "surface", SURFACE_KEYS)
    ga = rd.take(sf["ga"], "surface.ga", GA_KEYS)
    with _domain("surface"):
        ga["levels"] = _tuple(ga["levels"])
        surface = SurfaceParams(int(sf["n_elements"]), float(sf["element_spacing"]), float(sf["carrier_ghz"]),
                                _path_value(sf["codebook"], base_dir), _path_value(sf["atom_grid"], base_dir),
                                int(sf["seed"]), GaSettings(**ga))

    with _domain("geometry"):
        if not gnbs:
            raise ConfigError("at least one [[gnbs]] entry is required", "gnbs")
        if not ues:
            raise ConfigError("at least one [[ues]] entry is required", "ues")
        geometry = NodeGeometry(tuple(gnbs), tuple(ues), mount=SurfaceMount(tuple(geo["mount_offset"]),
                                                                            float(geo["mount_normal"])),
                                zones=tuple(zones), vehicle_length=float(geo["vehicle_length"]),
                                vehicle_width=float(geo["vehicle_width"]), surface=surface.geometry)
        trajectory = Trajectory(tuple(tuple(p) for p in geo["waypoints"]), float(geo["speed_kmh"]),
                                None if geo["duration_s"] is None else float(geo["duration_s"]),
                                float(geo["heading"]))

    tm = rd.take(doc.get("timing", {}), "timing", TIMING_KEYS)
    with _domain("timing"):
        timing = TimingParams(**tm)
    pr = rd.take(doc.get("protocol", {}), "protocol", PROTOCOL_KEYS)
    with _domain("protocol.name"):
        proto = Protocol(pr.pop("name"))
    with _domain("protocol"):
        protocol = ProtocolParams(protocol=proto, **pr)
    nz = rd.take(doc.get("noise", {}), "noise", NOISE_KEYS)
    with _domain("noise"):
        noise = NoiseParams(float(nz["sigma_db"]), int(nz["coherence_ms"]))
    lk = rd.take(doc.get("link", {}), "link", LINK_KEYS)
    with _domain("link"):
        budget = LinkBudgetParams(**{k: float(lk.pop(k)) for k in _field_defaults(LinkBudgetParams)})
        link = LinkParams(budget=budget, **lk)
    rp = rd.take(doc.get("replay", {}), "replay", REPLAY_KEYS)
    with _domain("replay"):
        rp["trace"] = _path_value(rp["trace"], base_dir)
        replay = ReplayParams(**rp)
    out = rd.take(doc.get("output", {}), "output", {**OUTPUT_KEYS, "name": name})
    with _domain("output"):
        output = OutputParams(str(out["name"]), _path_value(out["dir"], base_dir), int(out["window_ms"]))

    with _domain("scenario"):
        return Scenario(geometry, trajectory, int(nz["seed"]), timing, protocol, link, noise, surface, replay,
                        output, defaults_applied=tuple(rd.defaults))


def parse_config_text(text: str, name: str = "scenario", base_dir=None) -> Scenario:
    try:
        doc = toml.loads(text)
    except toml.TomlDecodeError as exc:
        raise ConfigError(f"TOML syntax error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return _build(doc, name, None if base_dir is None else Path(base_dir))


def parse_config(path) -> Scenario:
    """Parse and validate a scenario file; relative file paths resolve against its directory."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read scenario file {path}: {exc.strerror}") from exc
    scenario = parse_config_text(text, path.stem, path.parent)
    logger.info("parsed scenario '%s' from %s (%d defaults applied)", scenario.name, path,
                len(scenario.defaults_applied))
    return scenario


def _floats(values) -> list:
    return [float(v) for v in values]


def _drop_none(table: dict) -> dict:
    return {k: v for k, v in table.items() if v is not None}


def scenario_document(scenario: Scenario) -> dict:
    """The canonical TOML document of a Scenario, every field included."""
    geo, traj = scenario.geometry, scenario.trajectory
    zones = [_drop_none({"name": z.name, "attenuation_db": z.attenuation_db, "blocked": z.blocked,
                         "box": None if z.box is None else _floats(z.box)}) for z in geo.zones]
    surface = _drop_none({k: v for k, v in asdict(scenario.surface).items() if k != "ga"})
    ga = asdict(scenario.surface.ga)
    ga["levels"] = None if ga["levels"] is None else _floats(ga["levels"])
    surface["ga"] = _drop_none(ga)
    link = {**asdict(scenario.link.budget), **{k: v for k, v in asdict(scenario.link).items() if k != "budget"}}
    protocol = {"name": scenario.protocol.protocol.value,
                **{k: v for k, v in asdict(scenario.protocol).items() if k != "protocol"}}
    return {
        "geometry": {
            "waypoints": [_floats(p) for p in traj.waypoints], "speed_kmh": float(traj.speed_kmh),
            "duration_s": float(traj.duration_s), "heading": float(traj.heading),
            "vehicle_length": float(geo.vehicle_length), "vehicle_width": float(geo.vehicle_width),
            "mount_offset": _floats(geo.mount.offset), "mount_normal": float(geo.mount.normal),
            "zones": zones,
        },
        "gnbs": [{"id": g.gnb_id, "position": _floats(g.position), "carrier_ghz": g.carrier_ghz,
                  "eirp_dbm": g.eirp_dbm, "g_rx_dbi": g.g_rx_dbi, "boresight_deg": g.boresight,
                  "n_beams": g.n_beams, "beamwidth_deg": g.beamwidth} for g in geo.gnbs],
        "ues": [_drop_none({"id": u.ue_id, "offset": _floats(u.offset), "zone": u.zone, "g_ue_dbi": u.g_ue_dbi,
                            "n_beams": u.n_beams, "beamwidth_deg": u.beamwidth}) for u in geo.ues],
        "surface": surface,
        "timing": asdict(scenario.timing),
        "protocol": protocol,
        "noise": {"seed": scenario.seed, **asdict(scenario.noise)},
        "link": link,
        "replay": _drop_none(asdict(scenario.replay)),
        "output": _drop_none(asdict(scenario.output)),
    }


def emit_config(scenario: Scenario) -> str:
    return toml.dumps(scenario_document(scenario))
