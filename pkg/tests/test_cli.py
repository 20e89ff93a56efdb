import csv
import math
import re

import pytest
from click.testing import CliRunner

from enkabc.cli import main


def _write_toml(path, text):
    path.write_text(text)
    return str(path)


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _mask_wall_time(text):
    return re.sub(r"[^,\n]*$", "", text, flags=re.MULTILINE)


@pytest.fixture
def runner():
    return CliRunner()


def test_gaussian_run_writes_csvs(tmp_path, runner):
    cfg = _write_toml(
        tmp_path / "cfg.toml",
        """
        eps = [0.5]
        M = [100]
        T = [2]
        T_path = [2]
        replicates = 3
        seed = 11
        """,
    )
    out = tmp_path / "out"
    result = runner.invoke(
        main, ["gaussian-ml", "--config", cfg, "--out-dir", str(out)]
    )
    assert result.exit_code == 0, result.output
    rows = _read_csv(out / "estimates.csv")
    assert {r["method"] for r in rows} >= {"ABC", "SL", "sIEnKI", "rIEnKI"}
    summary = _read_csv(out / "summary.csv")
    assert summary and (out / "config.txt").exists()


def test_summary_rmse_identity(tmp_path, runner):
    cfg = _write_toml(
        tmp_path / "cfg.toml",
        """
        eps = [0.5]
        M = [100]
        T = [2]
        T_path = [2]
        replicates = 5
        seed = 12
        """,
    )
    out = tmp_path / "out"
    result = runner.invoke(
        main, ["gaussian-ml", "--config", cfg, "--out-dir", str(out)]
    )
    assert result.exit_code == 0, result.output
    for row in _read_csv(out / "summary.csv"):
        if int(row["n_ok"]) < 2:
            continue
        bias, sd, rmse = (float(row[k]) for k in ("bias", "sd", "rmse"))
        assert rmse ** 2 == pytest.approx(bias ** 2 + sd ** 2, abs=1e-10)


def test_gaussian_byte_determinism(tmp_path, runner):
    cfg = _write_toml(
        tmp_path / "cfg.toml",
        """
        eps = [0.5]
        M = [60]
        T = [2]
        T_path = [2]
        replicates = 2
        seed = 13
        """,
    )
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        result = runner.invoke(
            main, ["gaussian-ml", "--config", cfg, "--out-dir", str(out)]
        )
        assert result.exit_code == 0, result.output
        outs.append(out)
    a, b = outs
    assert (a / "summary.csv").read_text() == (b / "summary.csv").read_text()
    assert _mask_wall_time((a / "estimates.csv").read_text()) == _mask_wall_time(
        (b / "estimates.csv").read_text()
    )


def test_lv_sd_single_method(tmp_path, runner):
    cfg = _write_toml(
        tmp_path / "cfg.toml",
        """
        eps = [1.0]
        M = [50]
        T = [5]
        replicates = 2
        methods = ["SL"]
        seed = 14
        """,
    )
    out = tmp_path / "out"
    result = runner.invoke(main, ["lv-sd", "--config", cfg, "--out-dir", str(out)])
    assert result.exit_code == 0, result.output
    rows = _read_csv(out / "estimates.csv")
    assert len(rows) == 2 and all(r["method"] == "SL" for r in rows)
    summary = _read_csv(out / "summary.csv")
    assert summary[0]["bias"] == "nan"
    assert math.isfinite(float(summary[0]["sd"]))


def test_lv_mcmc_writes_chain(tmp_path, runner):
    cfg = _write_toml(
        tmp_path / "cfg.toml",
        """
        eps = [1.0]
        M = [50]
        T = [5]
        methods = ["SL"]
        seed = 15
        """,
    )
    out = tmp_path / "out"
    result = runner.invoke(
        main,
        ["lv-mcmc", "--config", cfg, "--out-dir", str(out), "--n-iters", "120"],
    )
    assert result.exit_code == 0, result.output
    chains = list(out.glob("chain_*.csv"))
    assert len(chains) == 1
    rows = _read_csv(chains[0])
    assert len(rows) == 120
    summary = _read_csv(out / "summary.csv")
    assert summary[0]["method"] == "SL"
    assert 0.0 <= float(summary[0]["acceptance_rate"]) <= 1.0


def test_unknown_preset_exits_2(runner):
    result = runner.invoke(main, ["gaussian-ml", "--preset", "nope"])
    assert result.exit_code == 2
    assert "unknown preset" in result.output


def test_preset_study_mismatch_exits_2(runner):
    result = runner.invoke(main, ["lv-sd", "--preset", "gaussian-desk"])
    assert result.exit_code == 2


def test_bad_config_field_exits_2(tmp_path, runner):
    cfg = _write_toml(tmp_path / "cfg.toml", "bogus_field = 3\n")
    result = runner.invoke(main, ["gaussian-ml", "--config", cfg])
    assert result.exit_code == 2
    assert "bogus_field" in result.output


def test_invalid_toml_exits_2(tmp_path, runner):
    cfg = _write_toml(tmp_path / "cfg.toml", "eps = [0.5\n")
    result = runner.invoke(main, ["gaussian-ml", "--config", cfg])
    assert result.exit_code == 2


def test_schedule_dump(tmp_path, runner):
    result = runner.invoke(
        main,
        ["schedule-dump", "--eps", "0.1", "--kappa", "1.0", "-T", "4",
         "--out-dir", str(tmp_path)],
    )
    assert result.exit_code == 0, result.output
    lines = (tmp_path / "schedule.csv").read_text().strip().split("\n")
    assert lines[0] == "t,epsilon_t,alpha_t,gamma_t"
    assert len(lines) == 6
