# src/pm_cdm/pipelines/sampler/pmcdm.py

"""
[职责] PM-DINA / PM-GDINA 的数据增广 Gibbs 采样入口。
[边界] 每次迭代顺序固定：α*/z → tilde_d → μ → Σ → θ。
[上游关系] services/fit_service 与 grid 的拟合钩子调用 fit_pmcdm。
[下游关系] 返回 ChainSummary（d_hat、θ̂、μ̂、Σ̂ 及每条链抽样）。
"""

from __future__ import annotations

from typing import Any, Dict, Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray

from pm_cdm.pipelines.base.context import RunContext
from pm_cdm.pipelines.base.timing import TimingCollector
from pm_cdm.schemas.model import ModelKind, QMatrix, ResponseMatrix
from pm_cdm.schemas.sampler import ChainConfig, PriorSpec, ResolvedPrior
from pm_cdm.utils.errors import UsageError

from .chains import run_chains
from .state import ChainState, ItemLayout
from .steps import step_alpha_star, step_mu, step_sigma, step_theta, step_tilde_d
from .summary import ChainSummary


def pm_iteration(
    state: ChainState,
    responses: NDArray[np.float64],
    layout: ItemLayout,
    prior: ResolvedPrior,
    rng: np.random.Generator,
    timing: TimingCollector,
    log_fields: Dict[str, Any],
) -> None:
    with timing.stage("alpha_star", accumulate=True):
        state.alpha_star, state.reduced_star, state.z = step_alpha_star(state, responses, layout, rng)
    with timing.stage("tilde_d", accumulate=True):
        state.tilde_d, state.d = step_tilde_d(state, rng)
    with timing.stage("mu", accumulate=True):
        state.mu = step_mu(state, prior, rng)
    with timing.stage("sigma", accumulate=True):
        state.sigma = step_sigma(state, prior, rng)
    with timing.stage("theta", accumulate=True):
        state.theta, guess, slip = step_theta(state, responses, layout, rng, log_fields=log_fields)
        if guess is not None:
            state.guess, state.slip = guess, slip


def as_response_matrix(data: ResponseMatrix | ArrayLike) -> ResponseMatrix:
    return data if isinstance(data, ResponseMatrix) else ResponseMatrix(entries=np.asarray(data))


def fit_pmcdm(
    data: ResponseMatrix | ArrayLike,
    q: QMatrix,
    kind: ModelKind | str,
    prior: Optional[PriorSpec] = None,
    config: Optional[ChainConfig] = None,
    *,
    context: Optional[RunContext] = None,
    workers: Optional[int] = None,
) -> ChainSummary:
    kind = ModelKind.parse(kind)
    if not kind.is_partial_mastery:
        raise UsageError(message=f"fit_pmcdm expects PM-DINA or PM-GDINA, got {kind.value}",
                         detail={"kind": kind.value})
    return run_chains(
        as_response_matrix(data), q, kind, prior or PriorSpec(), config or ChainConfig(), pm_iteration,
        context=context, workers=workers,
    )
