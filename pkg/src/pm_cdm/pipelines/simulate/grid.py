# src/pm_cdm/pipelines/simulate/grid.py

"""
[职责] 模拟条件网格：枚举 128 个条件，对每个 (条件, 重复) 生成数据、拟合指定模型、计算指标并按条件聚合。
[边界] 每个单元格的数据流与拟合种子只由 (master_seed, condition_id, replication) 决定，与网格顺序和并行度无关；
       拟合器失败包装为 GridCellError（带条件上下文）。
[上游关系] grid 子命令（services/grid_service）。
[下游关系] GridResult（每条件一行，行内为各拟合模型的平均指标）。
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from itertools import product
from typing import Any, Callable, Dict, Iterable, List, Mapping, Optional, Sequence

import numpy as np
from tqdm import tqdm

from pm_cdm.config import settings
from pm_cdm.pipelines.diagnostics.metrics import evaluate_fit
from pm_cdm.pipelines.sampler.cdm import fit_model
from pm_cdm.pipelines.sampler.summary import ChainSummary
from pm_cdm.pipelines.simulate.generate import generate_dataset
from pm_cdm.schemas.model import ModelKind
from pm_cdm.schemas.reports import GridResult, GridRow, MetricAggregate
from pm_cdm.schemas.sampler import ChainConfig, PriorSpec
from pm_cdm.schemas.simulation import GeneratedDataset, SimulationCondition
from pm_cdm.utils.constants import DEFAULT_REPLICATIONS, SIM_SAMPLE_SIZES
from pm_cdm.utils.errors import GridCellError, UsageError
from pm_cdm.utils.logging_ import get_logger, log_event
from pm_cdm.utils.rng import spawn_seeds

logger = get_logger("simulate.grid")

Fitter = Callable[[GeneratedDataset, ModelKind, int], ChainSummary]

GRID_KINDS = (ModelKind.DINA, ModelKind.PM_DINA, ModelKind.GDINA, ModelKind.PM_GDINA)
GRID_RHOS = (0.0, 0.8)


def enumerate_conditions(
    *,
    replications: int = DEFAULT_REPLICATIONS,
    seed: Optional[int] = None,
    kinds: Iterable[ModelKind | str] = GRID_KINDS,
) -> List[SimulationCondition]:
    """Model × K × Q variant × μ variant × ρ × N: 4·2·2·2·2·2 = 128 conditions for the default kinds."""
    base = settings.PM_CDM_DEFAULT_SEED if seed is None else int(seed)
    out = []
    for kind, k, q_variant, mu_variant, rho in product(
        kinds, (3, 5), ("complete", "incomplete"), ("constant", "nonconstant"), GRID_RHOS
    ):
        for n in SIM_SAMPLE_SIZES[k]:
            out.append(SimulationCondition(
                model_kind=kind, n_attributes=k, q_variant=q_variant, mu_variant=mu_variant,
                rho=rho, n_subjects=n, replications=replications, seed=base,
            ))
    return out


def fitted_kinds(true_kind: ModelKind) -> tuple[ModelKind, ModelKind]:
    """Each generated dataset is fit by the binary CDM and its partial-mastery counterpart."""
    return true_kind.binary_counterpart, true_kind.partial_counterpart


def bayes_fitter(
    dataset: GeneratedDataset,
    kind: ModelKind,
    seed: int,
    *,
    prior: Optional[PriorSpec] = None,
    config: Optional[ChainConfig] = None,
) -> ChainSummary:
    cfg = (config or ChainConfig()).model_copy(update={"seed": int(seed)})
    return fit_model(dataset.responses, dataset.q, kind, prior, cfg, workers=1)


def default_fitters(
    *, prior: Optional[PriorSpec] = None, config: Optional[ChainConfig] = None
) -> Dict[ModelKind, Fitter]:
    hook = partial(bayes_fitter, prior=prior, config=config)
    return {kind: hook for kind in GRID_KINDS}


@dataclass(frozen=True)
class _CellTask:
    condition: SimulationCondition
    replication: int
    master_seed: int
    fitters: Mapping[ModelKind, Fitter]


def _run_cell(task: _CellTask) -> List[Dict[str, Any]]:
    cond, rep = task.condition, task.replication
    fields = {"condition_id": cond.condition_id, "replication": rep}
    log_event(logger, logging.INFO, "grid cell start", fields=fields)
    dataset = generate_dataset(cond, rep, seed=task.master_seed)
    records = []
    for kind in fitted_kinds(cond.model_kind):
        seed = spawn_seeds(task.master_seed, 1, cond.condition_id, rep, "fit", kind.value)[0]
        try:
            summary = task.fitters[kind](dataset, kind, seed)
            report = evaluate_fit(dataset, summary)
        except Exception as exc:
            raise GridCellError(
                condition_id=cond.condition_id, replication=rep, fitted_kind=kind.value, cause=exc
            ) from exc
        sigma2 = float(np.mean(np.diag(summary.sigma_mean))) if summary.sigma_mean is not None else None
        records.append({"replication": rep, **report.model_dump(), "sigma2_mean": sigma2})
    log_event(logger, logging.INFO, "grid cell end", fields=fields)
    return records


def _mean_of(records: Sequence[Dict[str, Any]], key: str) -> Optional[float]:
    values = [r[key] for r in records if r.get(key) is not None]
    return float(np.mean(values)) if values else None


def aggregate_records(condition: SimulationCondition, replications: int, records: Sequence[Dict[str, Any]]) -> GridRow:
    fits = []
    for kind in fitted_kinds(condition.model_kind) if replications else ():
        mine = [r for r in records if r["fitted_kind"] == kind.value]
        fits.append(MetricAggregate(
            fitted_kind=kind.value,
            n_replications=len(mine),
            item_mae=_mean_of(mine, "item_mae"),
            item_rmse=_mean_of(mine, "item_rmse"),
            amcr=_mean_of(mine, "amcr"),
            arse=_mean_of(mine, "arse"),
            sigma2_mean=_mean_of(mine, "sigma2_mean"),
        ))
    return GridRow(
        condition_id=condition.condition_id,
        condition=condition.record(),
        replications=replications,
        fits=fits,
        per_replication=list(records),
    )


def run_condition_grid(
    conditions: Sequence[SimulationCondition],
    fitters: Mapping[ModelKind, Fitter],
    *,
    replications: Optional[int] = None,
    master_seed: Optional[int] = None,
    workers: Optional[int] = None,
    show_progress: bool = False,
) -> GridResult:
    """
    [职责] 对每个条件跑 replications 次（默认取条件自身的 replications），返回每条件一行的聚合表。
    [边界] 所需拟合器缺失时在运行前抛 UsageError；0 次重复得到空 fits 的行。
    """
    seed = int(master_seed if master_seed is not None else settings.PM_CDM_DEFAULT_SEED)
    missing = sorted({k.value for c in conditions for k in fitted_kinds(c.model_kind)} - {k.value for k in fitters})
    if missing:
        raise UsageError(message=f"no fitter registered for {', '.join(missing)}", detail={"missing": missing})

    reps = {c.condition_id: int(c.replications if replications is None else replications) for c in conditions}
    tasks = [
        _CellTask(condition=c, replication=r, master_seed=seed, fitters=dict(fitters))
        for c in conditions for r in range(reps[c.condition_id])
    ]
    n_workers = int(workers if workers is not None else settings.PM_CDM_GRID_WORKERS)
    log_event(logger, logging.INFO, "grid start",
              fields={"conditions": len(conditions), "cells": len(tasks), "workers": n_workers, "master_seed": seed})

    if n_workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            results = list(tqdm(pool.map(_run_cell, tasks), total=len(tasks), desc="grid",
                                disable=not show_progress))
    else:
        results = [_run_cell(t) for t in tqdm(tasks, desc="grid", disable=not show_progress)]

    by_condition: Dict[str, List[Dict[str, Any]]] = {c.condition_id: [] for c in conditions}
    for task, records in zip(tasks, results):
        by_condition[task.condition.condition_id].extend(records)
    rows = [aggregate_records(c, reps[c.condition_id], by_condition[c.condition_id]) for c in conditions]
    return GridResult(master_seed=seed, rows=rows, meta={"settings": settings.snapshot(), "cells": len(tasks)})
