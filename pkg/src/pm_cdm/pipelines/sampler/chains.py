# src/pm_cdm/pipelines/sampler/chains.py

"""
[职责] 链管理：按 ChainConfig 运行 C 条独立链（可多进程），在保留迭代累计汇总与全局参数抽样，最后合并为 ChainSummary。
[边界] 单条链内严格顺序（Gibbs 依赖）；链 c 的随机流由 (seed, "chain", c) 派生，与链数和执行顺序无关。
[上游关系] pmcdm.fit_pmcdm / cdm.fit_cdm_bayes 提供每次迭代的更新函数。
[下游关系] 返回合并后的 ChainSummary（含每条链的 DrawStore）。
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
from numpy.typing import NDArray
from tqdm import tqdm

from pm_cdm.config import settings
from pm_cdm.pipelines.base.context import RunContext
from pm_cdm.pipelines.base.timing import TimingCollector
from pm_cdm.schemas.model import ItemParamTable, ModelKind, QMatrix, ResponseMatrix
from pm_cdm.schemas.sampler import ChainConfig, PriorSpec, ResolvedPrior
from pm_cdm.utils.logging_ import get_logger, log_event
from pm_cdm.utils.rng import make_rng

from .state import ChainState, ItemLayout, init_state
from .summary import ChainSummary, DrawStore, SummaryAccumulator, global_parameter_names

logger = get_logger("sampler.chains")

IterationFn = Callable[
    [ChainState, NDArray[np.float64], ItemLayout, ResolvedPrior, np.random.Generator, TimingCollector, Dict[str, Any]],
    None,
]


@dataclass
class ChainTask:
    responses: ResponseMatrix
    q: QMatrix
    kind: ModelKind
    prior: PriorSpec
    config: ChainConfig
    chain_id: int
    iteration_fn: IterationFn
    log_fields: Dict[str, Any] = field(default_factory=dict)
    show_progress: bool = False


@dataclass
class ChainRun:
    chain_id: int
    accumulators: Dict[str, SummaryAccumulator]
    draws: DrawStore
    timing: TimingCollector


def global_vector(state: ChainState) -> NDArray[np.float64]:
    """Global parameters in `global_parameter_names` order."""
    if state.kind.is_dina_family:
        parts = [np.column_stack([state.guess, 1.0 - state.slip]).reshape(-1)]
    else:
        parts = [np.concatenate(state.theta)]
    if state.kind.is_partial_mastery:
        iu = np.triu_indices(state.mu.size)
        parts += [state.mu, state.sigma[iu]]
    else:
        parts.append(state.proportions)
    return np.concatenate(parts)


def _accumulate(accs: Dict[str, SummaryAccumulator], state: ChainState) -> None:
    accs["theta"].add(np.concatenate(state.theta))
    if state.kind.is_dina_family:
        accs["guess"].add(state.guess)
        accs["slip"].add(state.slip)
    if state.kind.is_partial_mastery:
        accs["d"].add(state.d)
        accs["mu"].add(state.mu)
        accs["sigma"].add(state.sigma)
    else:
        accs["profile_probs"].add(state.profile_probs)
        accs["proportions"].add(state.proportions)


def run_single_chain(task: ChainTask) -> ChainRun:
    """
    [职责] 运行一条链：初始化 → M 次迭代（每次做 NaN 检查）→ 保留迭代累计。
    [边界] 数值失败以 NumericError 终止，detail 带迭代序号。
    """
    config, q = task.config, task.q
    rng = make_rng(config.seed, "chain", task.chain_id)
    prior = task.prior.resolve(q.n_attributes)
    layout = ItemLayout.build(q, prior)
    responses = task.responses.entries.astype(np.float64)
    timing = TimingCollector()
    fields = {**task.log_fields, "chain_id": task.chain_id}

    with timing.stage("init"):
        state = init_state(task.responses, q, task.kind, rng)
    accs: Dict[str, SummaryAccumulator] = {
        k: SummaryAccumulator() for k in ("theta", "guess", "slip", "d", "mu", "sigma", "profile_probs", "proportions")
    }
    kept_iters: List[int] = []
    kept_rows: List[NDArray[np.float64]] = []

    iterator = tqdm(
        range(1, config.iters + 1),
        desc=f"{task.kind.value} chain {task.chain_id}",
        disable=not task.show_progress,
        leave=False,
    )
    for t in iterator:
        state.iteration = t
        task.iteration_fn(state, responses, layout, prior, rng, timing, fields)
        state.check_finite()
        if config.is_retained(t):
            _accumulate(accs, state)
            kept_iters.append(t)
            kept_rows.append(global_vector(state))

    names = global_parameter_names(task.kind, q)
    draws = DrawStore(
        chain_id=task.chain_id,
        names=names,
        iterations=np.asarray(kept_iters, dtype=np.int64),
        values=np.vstack(kept_rows) if kept_rows else np.zeros((0, len(names))),
    )
    return ChainRun(chain_id=task.chain_id, accumulators=accs, draws=draws, timing=timing)


def merge_chains(
    runs: Sequence[ChainRun],
    *,
    kind: ModelKind,
    q: QMatrix,
    n_subjects: int,
    config: ChainConfig,
    prior: PriorSpec,
    timing_ms: Optional[Dict[str, float]] = None,
) -> ChainSummary:
    """Pool accumulators across chains (exact: sums add) and build the summary."""
    pooled: Dict[str, SummaryAccumulator] = {}
    for run in runs:
        for key, acc in run.accumulators.items():
            pooled[key] = pooled.get(key, SummaryAccumulator()).merge(acc)

    def stat(key: str, which: str) -> Optional[NDArray[np.float64]]:
        acc = pooled.get(key)
        if acc is None or acc.count == 0:
            return None
        return acc.mean if which == "mean" else acc.sd

    theta_mean = ItemParamTable.from_flat(q, stat("theta", "mean"))
    sd_flat = stat("theta", "sd")
    theta_sd = tuple(sd_flat[theta_mean.offsets[j]:theta_mean.offsets[j + 1]] for j in range(q.n_items))
    d_hat = stat("d", "mean")
    return ChainSummary(
        kind=kind, q=q, n_subjects=n_subjects, n_chains=len(runs), n_draws=config.n_retained,
        config=config, prior=prior, theta_mean=theta_mean, theta_sd=theta_sd,
        guess_mean=stat("guess", "mean"), guess_sd=stat("guess", "sd"),
        slip_mean=stat("slip", "mean"), slip_sd=stat("slip", "sd"),
        d_hat=None if d_hat is None else np.clip(d_hat, 0.0, 1.0), d_sd=stat("d", "sd"),
        mu_mean=stat("mu", "mean"), mu_sd=stat("mu", "sd"),
        sigma_mean=stat("sigma", "mean"), sigma_sd=stat("sigma", "sd"),
        profile_probs=stat("profile_probs", "mean"),
        proportions_mean=stat("proportions", "mean"), proportions_sd=stat("proportions", "sd"),
        draws=tuple(run.draws for run in runs),
        timing_ms=dict(timing_ms or {}),
    )


def run_chains(
    responses: ResponseMatrix,
    q: QMatrix,
    kind: ModelKind,
    prior: PriorSpec,
    config: ChainConfig,
    iteration_fn: IterationFn,
    *,
    context: Optional[RunContext] = None,
    workers: Optional[int] = None,
) -> ChainSummary:
    """
    [职责] 运行 config.chains 条链并合并。
    [边界] workers > 1 时用进程池并行；结果按链序合并，与并行与否无关。
    """
    responses.check_against(q)
    ctx = context or RunContext(seed=config.seed, model_kind=kind.value)
    fields = {**ctx.log_fields(), "model_kind": kind.value}
    tasks = [
        ChainTask(
            responses=responses, q=q, kind=kind, prior=prior, config=config, chain_id=c,
            iteration_fn=iteration_fn, log_fields=fields, show_progress=ctx.show_progress,
        )
        for c in range(config.chains)
    ]
    log_event(logger, logging.INFO, "fit start", fields={
        **fields, "n_subjects": responses.n_subjects, "n_items": q.n_items, "n_attributes": q.n_attributes,
        "iters": config.iters, "burnin": config.burnin, "thin": config.thin, "chains": config.chains,
    })

    n_workers = int(workers if workers is not None else settings.PM_CDM_GRID_WORKERS)
    with ctx.timing.stage("chains"):
        if n_workers > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=min(n_workers, len(tasks))) as pool:
                runs = list(pool.map(run_single_chain, tasks))
        else:
            runs = [run_single_chain(t) for t in tasks]

    for run in runs:
        ctx.timing.merge(run.timing, prefix=f"chain{run.chain_id}.")
    timing = ctx.timing.to_dict()
    log_event(logger, logging.INFO, "fit end", fields={**fields, "timing_ms": timing})
    return merge_chains(
        runs, kind=kind, q=q, n_subjects=responses.n_subjects, config=config, prior=prior, timing_ms=timing
    )
