# src/pm_cdm/services/simulate_service.py

"""
[职责] simulate 服务：按条件生成一次重复，写出 responses.csv、q.csv、truth.json 与 condition.json。
[边界] 不拟合；输出目录内文件原子写入。
[上游关系] scripts/cli.py simulate；fit 服务在 RunConfig 带模拟条件时复用。
[下游关系] fit/diagnose 直接消费这些文件。
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from pm_cdm.formats.matrices import write_q_matrix, write_responses
from pm_cdm.formats.truth import write_truth
from pm_cdm.pipelines.base.context import RunContext
from pm_cdm.pipelines.simulate.generate import generate_dataset
from pm_cdm.schemas.simulation import GeneratedDataset, SimulationCondition
from pm_cdm.utils.artifacts import resolve_out_dir, write_text_atomic
from pm_cdm.utils.constants import CONDITION_FILE, Q_FILE, RESPONSES_FILE, TRUTH_FILE
from pm_cdm.utils.logging_ import get_logger, log_event

logger = get_logger("services.simulate")


def write_dataset(dataset: GeneratedDataset, out_dir: str | Path) -> Dict[str, str]:
    out = resolve_out_dir(out_dir)
    paths = {
        "responses": write_responses(dataset.responses, out / RESPONSES_FILE),
        "q": write_q_matrix(dataset.q, out / Q_FILE),
        "truth": write_truth(dataset, out / TRUTH_FILE),
    }
    if dataset.condition is not None:
        record = {**dataset.condition.record(), "replication": dataset.replication}
        paths["condition"] = write_text_atomic(out / CONDITION_FILE, json.dumps(record, indent=2, sort_keys=True) + "\n")
    return {k: str(v) for k, v in paths.items()}


def run_simulate(
    condition: SimulationCondition,
    out_dir: str | Path,
    *,
    replication: int = 0,
    context: Optional[RunContext] = None,
) -> Tuple[GeneratedDataset, Dict[str, Any]]:
    ctx = context or RunContext(seed=condition.seed, model_kind=condition.model_kind.value)
    ctx = ctx.child(condition_id=condition.condition_id, replication=replication)
    with ctx.timing.stage("generate"):
        dataset = generate_dataset(condition, replication)
    with ctx.timing.stage("write"):
        paths = write_dataset(dataset, out_dir)
    log_event(logger, logging.INFO, "dataset written", context=ctx,
              fields={"paths": paths, "timing_ms": ctx.timing.to_dict()})
    result = {
        "ok": True,
        "run_id": ctx.run_id,
        "condition_id": condition.condition_id,
        "replication": replication,
        "n_subjects": dataset.n_subjects,
        "n_items": dataset.q.n_items,
        "n_attributes": dataset.q.n_attributes,
        "paths": paths,
    }
    return dataset, result
