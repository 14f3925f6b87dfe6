import pandas as pd
import pytest

from data.trace_io import read_trace
from scripts.cli import main
from tests.conftest import SCENARIOS

STATIC = str(SCENARIOS / "static.toml")


def test_linkbudget_prints_both_budgets(capsys):
    assert main(["linkbudget"]) == 0
    out = capsys.readouterr().out
    assert "SNR_UE = 27.0 dB" in out
    assert "SNR_gNB = 14.5 dB" in out


def test_linkbudget_override(capsys):
    assert main(["linkbudget", "--which", "ue", "--p-gnb", "50"]) == 0
    out = capsys.readouterr().out
    assert "SNR_UE = 17.0 dB" in out and "SNR_gNB" not in out


@pytest.mark.parametrize("argv", [["--config", "absent.toml", "sim", "run"], ["sim", "run"]])
def test_configuration_errors_exit_2(argv, tmp_path):
    assert main(["--out-dir", str(tmp_path), *argv]) == 2


def test_usage_errors_exit_2():
    assert main(["sim", "launch"]) == 2
    assert main([]) == 2


def test_codebook_synth_eval_export(tmp_path, capsys):
    path = tmp_path / "cb.jsonl"
    argv = ["--seed", "3", "codebook", "synth", "--angles-t", "0", "--angles-r", "40", "--alphas", "0.5",
            "--n-elements", "8", "--population", "8", "--generations", "3", "--output", str(path)]
    assert main(argv) == 0
    assert path.exists()
    capsys.readouterr()

    assert main(["codebook", "eval", str(path)]) == 0
    assert "max_dev_db" in capsys.readouterr().out
    assert main(["codebook", "export", str(path), "--output", str(tmp_path / "cb.csv")]) == 0
    assert len(pd.read_csv(tmp_path / "cb.csv")) == 1


def test_codebook_synth_needs_angles(tmp_path):
    assert main(["codebook", "synth", "--output", str(tmp_path / "cb.jsonl")]) == 2


def test_unreadable_codebook_exits_1(tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text("not json\n")
    assert main(["codebook", "eval", str(bad)]) == 1


def test_sim_run_then_trace_export(tmp_path):
    argv = ["--config", STATIC, "--out-dir", str(tmp_path), "sim", "run", "--protocol", "sa-baseline"]
    assert main(argv) == 0
    run_dir = tmp_path / "static-sa-baseline"
    for name in ("trace.csv", "metrics.csv", "summary.csv"):
        assert (run_dir / name).exists()
    assert read_trace(run_dir / "trace.csv")["t_ms"].max() == 999

    summary = pd.read_csv(run_dir / "summary.csv")
    export_dir = tmp_path / "export"
    assert main(["--config", STATIC, "--out-dir", str(export_dir), "trace", "export",
                 "--trace", str(run_dir / "trace.csv")]) == 0
    for name in ("metrics.csv", "summary.csv", "rsrp.csv"):
        assert (export_dir / name).exists()
    pd.testing.assert_frame_equal(pd.read_csv(export_dir / "summary.csv"), summary)


def test_missing_trace_exits_1(tmp_path):
    assert main(["trace", "export", "--trace", str(tmp_path / "absent.csv")]) == 1


def test_same_seed_runs_write_identical_files(tmp_path):
    for out in ("a", "b"):
        argv = ["--config", STATIC, "--out-dir", str(tmp_path / out), "sim", "run", "--protocol", "sa-baseline"]
        assert main(argv) == 0
    for name in ("trace.csv", "metrics.csv"):
        first = (tmp_path / "a" / "static-sa-baseline" / name).read_bytes()
        assert first == (tmp_path / "b" / "static-sa-baseline" / name).read_bytes()
