"""
Command-line front door.

    python -m scripts.cli linkbudget
    python -m scripts.cli codebook synth --angles-t -10 0 10 --angles-r 30 40 --alphas 0.5
    python -m scripts.cli --config data/scenarios/crossover.toml sim compare
    python -m scripts.cli trace export --trace artifacts/sandbox/runs/crossover-wall-street/trace.csv

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error. Diagnostics
go to stderr through logging; tables printed for inspection go to stdout.
"""
import argparse
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path

import pandas as pd
import toml

from config import get_logger, log_level
from data.artifact_store import artifact_dir
from data.scenario_config import emit_config, parse_config
from data.trace_io import read_trace, rsrp_table, write_trace
from models.channel import LinkBudgetParams, link_budget_terms, snr_gnb, snr_ue
from models.codebook import (ALPHA_SET, CodebookMode, GaSettings, build_codebook, build_codebook_for_keys,
                             evaluate_codebook, export_codebook, load_codebook, save_codebook)
from models.errors import CodebookError, ConfigError, DomainError, ProtocolError, TraceReplayError
from models.handover.state_machine import Protocol
from models.sim.engine import compare, run, scenario_model
from models.sim.metrics import metrics_from_trace
from models.sim.planning import plan_codebook_keys
from models.sim.scenario import DATA_START_MS, LinkParams
from models.surface_model import SurfaceGeometry
from utils.files import atomic_write_frame

logger = logging.getLogger(__name__)

EVAL_TOLERANCE_DB = 0.1


def _scenario(args):
    if not args.config:
        raise ConfigError("this command needs --config")
    scenario = parse_config(args.config)
    if args.seed is not None:
        scenario = replace(scenario, seed=args.seed, surface=replace(scenario.surface, seed=args.seed))
    return scenario


def _out_dir(args, kind: str) -> Path:
    path = Path(args.out_dir) if args.out_dir else artifact_dir(kind)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _log_resolved(scenario) -> None:
    logger.info("resolved configuration for '%s':\n%s", scenario.name, emit_config(scenario))


# ─── linkbudget ─────────────────────────────────────────────────────────────────

def cmd_linkbudget(args) -> int:
    params = _scenario(args).link.budget if args.config else LinkBudgetParams()
    overrides = {f: getattr(args, f) for f in asdict(params) if getattr(args, f) is not None}
    params = replace(params, **overrides)
    logger.info("link budget parameters: %s", asdict(params))
    for which, label, total in (("ue", "SNR_UE", snr_ue(params)), ("gnb", "SNR_gNB", snr_gnb(params))):
        if args.which not in (which, "both"):
            continue
        for name, value in link_budget_terms(params, which):
            print(f"  {name:<12s}{value:+9.1f} dB")
        print(f"{label} = {total:.1f} dB")
    return 0


# ─── codebook ───────────────────────────────────────────────────────────────────

def _track(cb, settings: GaSettings, path: Path, seed: int) -> None:
    import mlflow

    with mlflow.start_run(run_name=path.stem):
        mlflow.log_params({**{k: str(v) for k, v in asdict(settings).items()},
                           "n_elements": cb.geometry.n_elements, "carrier_ghz": cb.geometry.carrier_ghz,
                           "seed": seed, "n_entries": len(cb)})
        for step, key in enumerate(cb.keys()):
            e = cb.entries[key]
            mlflow.log_metrics({"objective_db": e.objective_db, "g_w_tra_db": e.g_w_tra,
                                "g_w_ref_db": e.g_w_ref, "sidelobe_margin_db": e.sidelobe_margin}, step=step)
        mlflow.log_artifact(str(path))


def cmd_codebook_synth(args) -> int:
    seed = 0 if args.seed is None else args.seed
    overrides = {k: v for k, v in (("population", args.population), ("generations", args.generations),
                                   ("levels", args.levels)) if v is not None}
    if args.config:
        scenario = _scenario(args)
        _log_resolved(scenario)
        geometry = scenario.surface.geometry
        settings = replace(scenario.surface.ga, **overrides)
        keys = plan_codebook_keys(scenario)
        cb = build_codebook_for_keys(keys, geometry, scenario.surface.seed, settings=settings,
                                     model=scenario_model(scenario))
        name = f"{scenario.name}-codebook"
    else:
        if not args.angles_t or not args.angles_r:
            raise ConfigError("give --angles-t and --angles-r, or a scenario with --config")
        geometry = SurfaceGeometry(args.n_elements, args.spacing, args.carrier_ghz)
        settings = replace(GaSettings(), **overrides)
        cb = build_codebook(args.angles_t, args.angles_r, args.alphas, geometry, seed, CodebookMode(args.mode),
                            args.incident, settings)
        name = f"codebook-n{geometry.n_elements}-{args.mode}"
    path = Path(args.output) if args.output else _out_dir(args, "codebooks") / f"{name}.jsonl"
    save_codebook(cb, path)
    if args.track:
        _track(cb, settings, path, seed)
    print(path)
    return 0


def cmd_codebook_eval(args) -> int:
    table = evaluate_codebook(load_codebook(args.codebook))
    if args.output:
        atomic_write_frame(args.output, table)
    else:
        print(table.to_csv(index=False), end="")
    worst = float(table["max_dev_db"].max())
    if worst > EVAL_TOLERANCE_DB:
        logger.warning("stored gains deviate by up to %.3f dB from recomputation", worst)
    else:
        logger.info("all %d entries reproduce within %.1f dB", len(table), EVAL_TOLERANCE_DB)
    return 0


def cmd_codebook_export(args) -> int:
    cb = load_codebook(args.codebook)
    path = Path(args.output) if args.output else Path(args.codebook).with_suffix(".csv")
    export_codebook(cb, path)
    print(path)
    return 0


# ─── sim ────────────────────────────────────────────────────────────────────────

def _write_run(out: Path, metrics, trace=None) -> None:
    out.mkdir(parents=True, exist_ok=True)
    if trace is not None:
        write_trace(trace, out / "trace.csv")
    atomic_write_frame(out / "metrics.csv", metrics.windows)
    atomic_write_frame(out / "summary.csv", metrics.summary_frame())
    if not metrics.link_windows.empty:
        atomic_write_frame(out / "link_per.csv", metrics.link_windows)


def _codebook_arg(args, scenario):
    return load_codebook(args.codebook, scenario.surface.geometry) if args.codebook else None


def cmd_sim_run(args) -> int:
    scenario = _scenario(args)
    if args.protocol:
        scenario = scenario.with_protocol(Protocol(args.protocol))
    _log_resolved(scenario)
    metrics, trace = run(scenario, _codebook_arg(args, scenario))
    out = _out_dir(args, "runs") / f"{scenario.name}-{scenario.protocol.protocol.value}"
    _write_run(out, metrics, trace)
    print(metrics.summary_frame().to_csv(index=False), end="")
    logger.info("run written to %s", out)
    return 0


def cmd_sim_compare(args) -> int:
    scenario = _scenario(args)
    _log_resolved(scenario)
    protocols = [Protocol(p) for p in args.protocols]
    if len(protocols) < 2:
        raise ConfigError("compare needs at least two protocols", "--protocols")
    arms, deltas = compare(scenario, protocols, _codebook_arg(args, scenario))
    out = _out_dir(args, "runs") / f"{scenario.name}-compare"
    for label, metrics in arms.items():
        _write_run(out / label.replace("#", "-"), metrics)
    atomic_write_frame(out / "compare.csv", deltas)
    print(deltas.to_csv(index=False), end="")
    logger.info("comparison written to %s", out)
    return 0


# ─── trace ──────────────────────────────────────────────────────────────────────

def cmd_trace_export(args) -> int:
    trace = read_trace(args.trace)
    if args.config:
        scenario = _scenario(args)
        link, duration = scenario.link, scenario.duration_ms
        window, ping_pong = scenario.output.window_ms, scenario.protocol.ping_pong_ms
    else:
        link, duration = LinkParams(), int(trace["t_ms"].max()) + 1
        window, ping_pong = 100, 1000
    metrics = metrics_from_trace(trace, link, duration, window, ping_pong, DATA_START_MS)
    out = Path(args.out_dir) if args.out_dir else Path(args.trace).parent
    _write_run(out, metrics)
    atomic_write_frame(out / "rsrp.csv", rsrp_table(trace))
    print(metrics.summary_frame().to_csv(index=False), end="")
    return 0


# ─── Parser ─────────────────────────────────────────────────────────────────────

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hms-sim", description="Vehicular metasurface handover simulator.")
    parser.add_argument("--config", help="scenario TOML file")
    parser.add_argument("--seed", type=int, help="overrides the scenario and synthesis seeds")
    parser.add_argument("--out-dir", help="output directory (default: the environment's artifact store)")
    parser.add_argument("--log-level", default=log_level, choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = parser.add_subparsers(dest="command", required=True)

    lb = sub.add_parser("linkbudget", help="print the downlink and reflected-uplink SNR budgets")
    lb.add_argument("--which", choices=["ue", "gnb", "both"], default="both")
    for name in asdict(LinkBudgetParams()):
        lb.add_argument(f"--{name.replace('_', '-')}", dest=name, type=float)
    lb.set_defaults(func=cmd_linkbudget)

    cb = sub.add_parser("codebook", help="synthesize, evaluate or export codebooks")
    cb_sub = cb.add_subparsers(dest="codebook_command", required=True)
    synth = cb_sub.add_parser("synth")
    synth.add_argument("--angles-t", type=float, nargs="+")
    synth.add_argument("--angles-r", type=float, nargs="+")
    synth.add_argument("--alphas", type=float, nargs="+", default=list(ALPHA_SET))
    synth.add_argument("--mode", choices=[m.value for m in CodebookMode], default=CodebookMode.DUAL_TRANSFLECTIVE.value)
    synth.add_argument("--incident", type=float, default=0.0)
    synth.add_argument("--n-elements", type=int, default=64)
    synth.add_argument("--spacing", type=float, default=0.5)
    synth.add_argument("--carrier-ghz", type=float, default=26.0)
    synth.add_argument("--population", type=int)
    synth.add_argument("--generations", type=int)
    synth.add_argument("--levels", type=float, nargs="+")
    synth.add_argument("--output")
    synth.add_argument("--track", action="store_true", help="log settings, gains and the file to MLflow")
    synth.set_defaults(func=cmd_codebook_synth)
    ev = cb_sub.add_parser("eval")
    ev.add_argument("codebook")
    ev.add_argument("--output")
    ev.set_defaults(func=cmd_codebook_eval)
    ex = cb_sub.add_parser("export")
    ex.add_argument("codebook")
    ex.add_argument("--output")
    ex.set_defaults(func=cmd_codebook_export)

    sim = sub.add_parser("sim", help="run or compare scenarios")
    sim_sub = sim.add_subparsers(dest="sim_command", required=True)
    sr = sim_sub.add_parser("run")
    sr.add_argument("--protocol", choices=[p.value for p in Protocol])
    sr.add_argument("--codebook")
    sr.set_defaults(func=cmd_sim_run)
    sc = sim_sub.add_parser("compare")
    sc.add_argument("--protocols", nargs="+", choices=[p.value for p in Protocol],
                    default=[Protocol.SA.value, Protocol.WS.value])
    sc.add_argument("--codebook")
    sc.set_defaults(func=cmd_sim_compare)

    tr = sub.add_parser("trace", help="trace utilities")
    tr_sub = tr.add_subparsers(dest="trace_command", required=True)
    te = tr_sub.add_parser("export")
    te.add_argument("--trace", required=True)
    te.set_defaults(func=cmd_trace_export)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    get_logger("scripts.cli", args.log_level)
    try:
        return args.func(args)
    except (ConfigError, toml.TomlDecodeError) as exc:
        logger.error("configuration error: %s", exc)
        return 2
    except (DomainError, CodebookError, ProtocolError, TraceReplayError, OSError, pd.errors.ParserError) as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
