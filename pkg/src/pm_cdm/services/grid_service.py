# src/pm_cdm/services/grid_service.py

"""
[职责] grid 服务：枚举条件（可按模型/K/N 等过滤）→ run_condition_grid → 写 grid.json 与文本聚合表。
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

from pm_cdm.formats.tables import render_grid
from pm_cdm.pipelines.simulate.grid import default_fitters, enumerate_conditions, run_condition_grid
from pm_cdm.schemas.model import ModelKind
from pm_cdm.schemas.sampler import ChainConfig, PriorSpec
from pm_cdm.utils.artifacts import resolve_out_dir, write_text_atomic
from pm_cdm.utils.constants import DEFAULT_REPLICATIONS, GRID_FILE, GRID_TABLE_FILE
from pm_cdm.utils.errors import UsageError
from pm_cdm.utils.logging_ import get_logger, log_event

from ._shared import write_report

logger = get_logger("services.grid")

GRID_FILTER_KEYS = ("model_kind", "n_attributes", "q_variant", "mu_variant", "rho", "n_subjects")


def _matches(record: Mapping[str, Any], filters: Mapping[str, Any]) -> bool:
    for key, wanted in filters.items():
        values = wanted if isinstance(wanted, (list, tuple)) else [wanted]
        if key == "model_kind":
            values = [ModelKind.parse(v).value for v in values]
        if record[key] not in values:
            return False
    return True


def run_grid(
    *,
    out_dir: str | Path,
    seed: int,
    chain: ChainConfig,
    prior: Optional[PriorSpec] = None,
    replications: Optional[int] = None,
    filters: Optional[Mapping[str, Any]] = None,
    workers: Optional[int] = None,
    show_progress: bool = False,
) -> Dict[str, Any]:
    unknown = sorted(set(filters or {}) - set(GRID_FILTER_KEYS))
    if unknown:
        raise UsageError(message=f"unknown grid filter(s): {', '.join(unknown)}",
                         detail={"unknown": unknown, "allowed": list(GRID_FILTER_KEYS)})
    reps = DEFAULT_REPLICATIONS if replications is None else int(replications)
    conditions = [c for c in enumerate_conditions(replications=reps, seed=seed)
                  if _matches(c.record(), filters or {})]
    result = run_condition_grid(
        conditions, default_fitters(prior=prior, config=chain),
        master_seed=seed, workers=workers, show_progress=show_progress,
    )
    out = resolve_out_dir(out_dir)
    paths = {
        "grid": str(write_report(result, out / GRID_FILE)),
        "grid_table": str(write_text_atomic(out / GRID_TABLE_FILE, render_grid(result))),
    }
    log_event(logger, logging.INFO, "grid written", fields={"paths": paths, "conditions": len(conditions)})
    return {"ok": True, "conditions": len(conditions), "replications": reps, "paths": paths}
