# playground/cli_gate/test_cli_gate.py

"""
[职责] cli gate：simulate → fit → diagnose → compare 端到端（极短链），以及退出码与单行 JSON 错误输出。
[边界] 只验证命令面与产物；数值正确性见各 pipeline gate。
[上游关系] pm_cdm.scripts.cli.main(argv)。
[下游关系] 无。
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any, Dict, List

import pytest

from pm_cdm.scripts.cli import main
from pm_cdm.utils.constants import SUMMARY_FORMAT_VERSION
from pm_cdm.utils.errors import EXIT_DATA_VALIDATION, EXIT_OK, EXIT_USAGE
from pm_cdm.utils.logging_ import DEFAULT_LOGGER_NAME

pytestmark = pytest.mark.cli_gate

_CHAIN = ["--iters", "30", "--burnin", "10", "--thin", "2", "--seed", "5"]


def _stdout_json(capsys) -> Dict[str, Any]:
    out = capsys.readouterr().out.strip().splitlines()
    return json.loads(out[-1])


def _stderr_error(capsys) -> Dict[str, Any]:
    lines = [ln for ln in capsys.readouterr().err.splitlines() if ln.strip()]
    payload = json.loads(lines[-1])
    assert set(payload) == {"error"}
    return payload["error"]


@pytest.fixture(autouse=True)
def _fresh_log_handler():
    """Drop the stderr handler main() attached during the test."""  # docstring: handler 绑定本用例的捕获流
    yield
    base = logging.getLogger(DEFAULT_LOGGER_NAME)
    for h in list(base.handlers):
        base.removeHandler(h)


@pytest.fixture()
def run_cfg(tmp_path: Path) -> Path:
    path = tmp_path / "run.cfg"
    path.write_text("# small data, serial chains\nsimulate.n_subjects = 80\nsimulate.rho = 0.5\nrun.workers = 1\n")
    return path


@pytest.fixture()
def simulated(tmp_path: Path, run_cfg: Path, capsys) -> Dict[str, str]:
    data_dir = tmp_path / "data"
    code = main(["simulate", "--model", "PM-DINA", "--config", str(run_cfg), "--seed", "3",
                 "--out", str(data_dir), "--json", "--quiet"])
    assert code == EXIT_OK
    result = _stdout_json(capsys)
    assert result["n_subjects"] == 80
    return result["paths"]


def _fit(model: str, out: Path, data: Dict[str, str], cfg: Path, chains: int = 2) -> List[str]:
    return ["fit", "--model", model, "--q", data["q"], "--responses", data["responses"], "--config", str(cfg),
            "--out", str(out), "--chains", str(chains), *_CHAIN, "--json", "--quiet"]


# -----------------------------
# End to end
# -----------------------------


def test_simulate_writes_dataset(simulated: Dict[str, str]) -> None:
    for key in ("responses", "q", "truth", "condition"):
        assert Path(simulated[key]).is_file()
    condition = json.loads(Path(simulated["condition"]).read_text())
    assert condition["model_kind"] == "PM-DINA"
    assert condition["rho"] == 0.5


def test_fit_then_diagnose_then_compare(tmp_path: Path, simulated, run_cfg: Path, capsys) -> None:
    """The full command chain on tiny chains exits 0 and writes every artifact."""  # docstring: 端到端链路
    pm_dir, dina_dir = tmp_path / "fit_pm", tmp_path / "fit_dina"

    assert main(_fit("PM-DINA", pm_dir, simulated, run_cfg)) == EXIT_OK
    fit = _stdout_json(capsys)
    assert fit["n_chains"] == 2 and fit["n_draws"] == 10
    assert [Path(p).name for p in fit["paths"]["chains"]] == ["chain_0.jsonl", "chain_1.jsonl"]

    summary = str(pm_dir / "summary.json")
    assert main(["diagnose", summary, "--truth", simulated["truth"], "--responses", simulated["responses"],
                 "--json", "--quiet"]) == EXIT_OK
    diag = _stdout_json(capsys)
    assert diag["metrics"]["fitted_kind"] == "PM-DINA"
    assert len(diag["diagnosis"]["sigma2"]) == 3
    assert 0.0 <= diag["convergence"]["share_converged"] <= 1.0
    assert (pm_dir / "diagnosis.txt").is_file()
    assert (pm_dir / "convergence.txt").is_file()

    assert main(_fit("DINA", dina_dir, simulated, run_cfg, chains=1)) == EXIT_OK
    capsys.readouterr()
    cmp_dir = tmp_path / "cmp"
    assert main(["compare", summary, str(dina_dir / "summary.json"), "--out", str(cmp_dir),
                 "--json", "--quiet"]) == EXIT_OK
    cmp = _stdout_json(capsys)
    assert {r["label"] for r in cmp["rows"]} == {"PM-DINA", "DINA"}
    assert cmp["best_by_bic"] in {"PM-DINA", "DINA"}
    assert "best by BIC" in (cmp_dir / "comparison.txt").read_text()


def test_fit_is_byte_reproducible(tmp_path: Path, simulated, run_cfg: Path, capsys) -> None:
    out = tmp_path / "fit"
    assert main(_fit("PM-GDINA", out, simulated, run_cfg)) == EXIT_OK
    first = ((out / "summary.json").read_bytes(), (out / "chain_1.jsonl").read_bytes())
    assert main(_fit("PM-GDINA", out, simulated, run_cfg)) == EXIT_OK
    assert first == ((out / "summary.json").read_bytes(), (out / "chain_1.jsonl").read_bytes())


def test_fit_with_simulate_flag_records_truth(tmp_path: Path, run_cfg: Path, capsys) -> None:
    out = tmp_path / "fit"
    code = main(["fit", "--model", "DINA", "--simulate", "--config", str(run_cfg), "--out", str(out),
                 "--chains", "1", *_CHAIN, "--json", "--quiet"])
    assert code == EXIT_OK
    capsys.readouterr()
    assert (out / "truth.json").is_file()
    assert main(["diagnose", str(out / "summary.json"), "--json", "--quiet"]) == EXIT_OK
    diag = _stdout_json(capsys)
    assert diag["metrics"]["true_kind"] == "DINA"
    assert "convergence" not in diag


def test_text_output_without_json(simulated, tmp_path: Path, run_cfg: Path, capsys) -> None:
    assert main(_fit("DINA", tmp_path / "fit", simulated, run_cfg, chains=1)[:-2] + ["--quiet"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "[fit] status=ok" in out
    assert "[fit] model_kind=DINA" in out


# -----------------------------
# Errors
# -----------------------------


def test_unknown_flag_is_usage_error(capsys) -> None:
    assert main(["fit", "--bogus"]) == EXIT_USAGE
    err = _stderr_error(capsys)
    assert err["code"] == "usage_error"


def test_missing_model_is_usage_error(tmp_path: Path, capsys) -> None:
    assert main(["fit", "--out", str(tmp_path)]) == EXIT_USAGE
    assert "model" in _stderr_error(capsys)["message"]


def test_invalid_chain_lengths_are_usage_error(tmp_path: Path, simulated, run_cfg: Path, capsys) -> None:
    argv = _fit("DINA", tmp_path / "fit", simulated, run_cfg)
    argv[argv.index("--burnin") + 1] = "30"
    assert main(argv) == EXIT_USAGE
    assert _stderr_error(capsys)["detail"]["section"] == "chain"


def test_non_binary_responses_exit_data_error(tmp_path: Path, simulated, run_cfg: Path, capsys) -> None:
    """A bad cell aborts before sampling with exit code 2 and names line and column."""  # docstring: 非二值作答
    bad = tmp_path / "bad.csv"
    lines = Path(simulated["responses"]).read_text().splitlines()
    cells = lines[3].split(",")
    cells[1] = "2"
    lines[3] = ",".join(cells)
    bad.write_text("\n".join(lines) + "\n")
    data = {"q": simulated["q"], "responses": str(bad)}
    assert main(_fit("DINA", tmp_path / "fit", data, run_cfg)) == EXIT_DATA_VALIDATION
    err = _stderr_error(capsys)
    assert err["code"] == "MATRIX__NON_BINARY"
    assert "line 4, column 2" in err["message"]


def test_summary_version_mismatch_exit_data_error(tmp_path: Path, simulated, run_cfg: Path, capsys) -> None:
    out = tmp_path / "fit"
    assert main(_fit("DINA", out, simulated, run_cfg, chains=1)) == EXIT_OK
    capsys.readouterr()
    path = out / "summary.json"
    doc = json.loads(path.read_text())
    doc["version"] = SUMMARY_FORMAT_VERSION + 1
    path.write_text(json.dumps(doc) + "\n")
    assert main(["diagnose", str(path), "--quiet"]) == EXIT_DATA_VALIDATION
    err = _stderr_error(capsys)
    assert err["code"] == "FORMAT__VERSION_MISMATCH"
    assert err["detail"]["found_version"] == SUMMARY_FORMAT_VERSION + 1


def test_compare_needs_two_summaries(tmp_path: Path, capsys) -> None:
    assert main(["compare", str(tmp_path / "one.json"), "--out", str(tmp_path)]) == EXIT_USAGE
    assert _stderr_error(capsys)["code"] == "usage_error"
