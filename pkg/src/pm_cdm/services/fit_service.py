# src/pm_cdm/services/fit_service.py

"""
[职责] fit 服务：加载数据（或按模拟条件先生成并落盘）→ 采样拟合 → 写 summary.json 与每条链的 chain_{c}.jsonl。
[边界] summary 文档只含确定性内容（RunConfig 快照、settings 快照、数据哈希），相同配置+种子逐字节一致；
       耗时只进日志与返回结果。
[上游关系] scripts/cli.py fit。
[下游关系] diagnose/compare 读取输出目录。
"""

from __future__ import annotations

import logging
from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from pm_cdm.config import settings
from pm_cdm.formats.archive import archive_path, write_chain_archive
from pm_cdm.formats.summary import write_summary
from pm_cdm.pipelines.base.context import RunContext
from pm_cdm.pipelines.sampler.cdm import fit_model
from pm_cdm.pipelines.sampler.summary import ChainSummary
from pm_cdm.schemas.run import RunConfig
from pm_cdm.utils.artifacts import resolve_out_dir
from pm_cdm.utils.constants import SUMMARY_FILE
from pm_cdm.utils.logging_ import get_logger, log_event

from ._shared import data_hash, load_data
from .simulate_service import run_simulate

logger = get_logger("services.fit")


def run_fit(
    config: RunConfig,
    *,
    context: Optional[RunContext] = None,
) -> Tuple[ChainSummary, Dict[str, Any]]:
    ctx = context or RunContext(seed=config.seed, model_kind=config.model_kind.value)
    out = resolve_out_dir(config.out_dir)

    responses_path, q_path, truth_path = config.responses_path, config.q_path, None
    if config.simulation is not None:
        _, sim = run_simulate(config.simulation, out, context=ctx)
        responses_path, q_path, truth_path = sim["paths"]["responses"], sim["paths"]["q"], sim["paths"]["truth"]
    with ctx.timing.stage("load"):
        q, responses = load_data(q_path, responses_path)

    summary = fit_model(responses, q, config.model_kind, config.prior, config.chain,
                        context=ctx, workers=config.workers)
    meta = {
        "run": config.record,
        "settings": settings.snapshot(),
        "data_hash": data_hash(q, responses),
        "responses_path": str(Path(responses_path).resolve()),
        "q_path": str(Path(q_path).resolve()),
    }
    if truth_path is not None:
        meta["truth_path"] = str(Path(truth_path).resolve())
    summary = replace(summary, meta=meta)

    with ctx.timing.stage("write"):
        paths = {"summary": str(write_summary(summary, out / SUMMARY_FILE)), "chains": []}
        for store in summary.draws:
            p = write_chain_archive(store, archive_path(out, store.chain_id), kind=summary.kind, q=q,
                                    n_subjects=responses.n_subjects, config=config.chain)
            paths["chains"].append(str(p))
    log_event(logger, logging.INFO, "fit artifacts written", context=ctx,
              fields={"paths": paths, "timing_ms": ctx.timing.to_dict()})
    result = {
        "ok": True,
        "run_id": ctx.run_id,
        "model_kind": summary.kind.value,
        "n_subjects": summary.n_subjects,
        "n_chains": summary.n_chains,
        "n_draws": summary.n_draws,
        "paths": paths,
        "timing_ms": ctx.timing.to_dict(),
    }
    return summary, result
