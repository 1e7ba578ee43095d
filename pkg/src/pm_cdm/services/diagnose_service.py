# src/pm_cdm/services/diagnose_service.py

"""
[职责] diagnose 服务：读 summary →（有真值时）MetricReport → DiagnosisReport + 散点数据 →（多链时）Gelman-Rubin 表。
[边界] 真值与作答路径默认取 summary meta 中记录的位置，也可显式传入；链存档默认取 summary 同目录的 chain_*.jsonl。
[上游关系] scripts/cli.py diagnose。
[下游关系] metrics.json、diagnosis.json/.txt、scatter/、convergence.json/.txt。
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from pm_cdm.formats.archive import read_chain_archives
from pm_cdm.formats.matrices import read_responses
from pm_cdm.formats.summary import read_summary
from pm_cdm.formats.tables import render_convergence, render_diagnosis, render_item_estimates, render_metric_report
from pm_cdm.formats.truth import read_truth
from pm_cdm.pipelines.base.context import RunContext
from pm_cdm.pipelines.diagnostics.convergence import convergence_report
from pm_cdm.pipelines.diagnostics.diagnosis import diagnose_summary, item_estimate_table
from pm_cdm.pipelines.diagnostics.metrics import evaluate_fit
from pm_cdm.utils.artifacts import resolve_out_dir, write_text_atomic
from pm_cdm.utils.constants import (
    CHAIN_FILE_TEMPLATE,
    CONVERGENCE_FILE,
    CONVERGENCE_TABLE_FILE,
    DIAGNOSIS_FILE,
    DIAGNOSIS_TABLE_FILE,
    METRICS_FILE,
    SCATTER_DIR,
)
from pm_cdm.utils.errors import DataValidationError
from pm_cdm.utils.logging_ import get_logger, log_event

from ._shared import write_report

logger = get_logger("services.diagnose")


def find_archives(summary_path: Path) -> List[Path]:
    pattern = CHAIN_FILE_TEMPLATE.format(chain="*")
    return sorted(summary_path.parent.glob(pattern), key=lambda p: int(p.stem.split("_")[-1]))


def run_diagnose(
    summary_path: str | Path,
    *,
    out_dir: Optional[str | Path] = None,
    truth_path: Optional[str | Path] = None,
    responses_path: Optional[str | Path] = None,
    archives: Optional[Sequence[str | Path]] = None,
    binary_threshold: Optional[float] = None,
    partial_threshold: Optional[float] = None,
    context: Optional[RunContext] = None,
) -> Dict[str, Any]:
    src = Path(summary_path)
    summary = read_summary(src)
    ctx = context or RunContext(seed=summary.config.seed, model_kind=summary.kind.value)
    out = resolve_out_dir(out_dir or src.parent)
    paths: Dict[str, str] = {}
    result: Dict[str, Any] = {"ok": True, "run_id": ctx.run_id, "model_kind": summary.kind.value}

    truth = truth_path or summary.meta.get("truth_path")
    if truth is not None:
        r_path = responses_path or summary.meta.get("responses_path")
        if r_path is None:
            raise DataValidationError(message="a truth file needs the matching responses (--responses)",
                                      error_code="DIAGNOSE__NO_RESPONSES")
        dataset = read_truth(truth, read_responses(r_path))
        metrics = evaluate_fit(dataset, summary)
        paths["metrics"] = str(write_report(metrics, out / METRICS_FILE))
        result["metrics"] = metrics.model_dump()

    report = diagnose_summary(summary, scatter_dir=out / SCATTER_DIR,
                              binary_threshold=binary_threshold, partial_threshold=partial_threshold)
    paths["diagnosis"] = str(write_report(report, out / DIAGNOSIS_FILE))
    text = render_diagnosis(report) + "\n" + render_item_estimates(item_estimate_table({summary.kind.value: summary}))
    if "metrics" in result:
        text = render_metric_report(metrics) + "\n" + text
    paths["diagnosis_table"] = str(write_text_atomic(out / DIAGNOSIS_TABLE_FILE, text))
    paths["scatter"] = str(out / SCATTER_DIR)
    result["diagnosis"] = report.model_dump()

    chain_files = [Path(p) for p in archives] if archives is not None else find_archives(src)
    if len(chain_files) >= 2:
        stores = [a.draws for a in read_chain_archives(chain_files)]
        conv = convergence_report(stores)
        paths["convergence"] = str(write_report(conv, out / CONVERGENCE_FILE))
        paths["convergence_table"] = str(write_text_atomic(out / CONVERGENCE_TABLE_FILE, render_convergence(conv)))
        result["convergence"] = {"share_converged": conv.share_converged,
                                 "share_converged_theta": conv.share_converged_with_prefix("theta")}

    result["paths"] = paths
    log_event(logger, logging.INFO, "diagnosis written", context=ctx, fields={"paths": paths})
    return result
