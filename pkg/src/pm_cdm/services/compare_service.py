# src/pm_cdm/services/compare_service.py

"""
[职责] compare 服务：读取 ≥2 个 summary（同一数据），在后验均值处计算 AIC/BIC，写比较表与题目估计对照表。
[边界] 各 summary 记录的数据哈希必须一致；作答默认取第一个 summary meta 中的路径。
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

from pm_cdm.formats.matrices import read_responses
from pm_cdm.formats.summary import read_summary
from pm_cdm.formats.tables import render_comparison, render_item_estimates
from pm_cdm.pipelines.diagnostics.criteria import compare_models, information_criteria
from pm_cdm.pipelines.diagnostics.diagnosis import item_estimate_table
from pm_cdm.utils.artifacts import resolve_out_dir, write_text_atomic
from pm_cdm.utils.constants import COMPARISON_FILE, COMPARISON_TABLE_FILE
from pm_cdm.utils.errors import DataValidationError, UsageError
from pm_cdm.utils.logging_ import get_logger, log_event

from ._shared import data_hash, write_report

logger = get_logger("services.compare")


def _labels(summaries: Sequence[Any], paths: Sequence[Path]) -> list[str]:
    kinds = [s.kind.value for s in summaries]
    if len(set(kinds)) == len(kinds):
        return kinds
    return [f"{k}@{p.parent.name or p.stem}" for k, p in zip(kinds, paths)]


def run_compare(
    summary_paths: Sequence[str | Path],
    *,
    out_dir: str | Path,
    responses_path: Optional[str | Path] = None,
    mc_draws: Optional[int] = None,
    seed: Optional[int] = None,
) -> Dict[str, Any]:
    if len(summary_paths) < 2:
        raise UsageError(message="compare needs at least two summary files", detail={"count": len(summary_paths)})
    paths = [Path(p) for p in summary_paths]
    summaries = [read_summary(p) for p in paths]

    hashes = {s.meta.get("data_hash") for s in summaries} - {None}
    if len(hashes) > 1:
        raise DataValidationError(message="summaries were fitted to different data",
                                  detail={"data_hashes": sorted(hashes)}, error_code="COMPARE__DATA_MISMATCH")
    r_path = responses_path or summaries[0].meta.get("responses_path")
    if r_path is None:
        raise UsageError(message="the responses used for fitting are required (--responses)")
    responses = read_responses(r_path)
    responses.check_against(summaries[0].q)
    current = data_hash(summaries[0].q, responses)
    if hashes and current not in hashes:
        raise DataValidationError(message="responses differ from the data the summaries were fitted to",
                                  detail={"responses": str(r_path)}, error_code="COMPARE__DATA_MISMATCH")

    labels = _labels(summaries, paths)
    results = [
        information_criteria(responses, s, label=label, mc_draws=mc_draws, seed=seed)
        for s, label in zip(summaries, labels)
    ]
    table = compare_models(results, data_hash=current)
    out = resolve_out_dir(out_dir)
    text = render_comparison(table)
    text += "\n" + render_item_estimates(item_estimate_table(dict(zip(labels, summaries))))
    written = {
        "comparison": str(write_report(table, out / COMPARISON_FILE)),
        "comparison_table": str(write_text_atomic(out / COMPARISON_TABLE_FILE, text)),
    }
    log_event(logger, logging.INFO, "comparison written",
              fields={"paths": written, "best_by_bic": table.best_by_bic})
    return {"ok": True, "best_by_aic": table.best_by_aic, "best_by_bic": table.best_by_bic,
            "rows": [r.model_dump() for r in table.rows], "paths": written}
