# src/pm_cdm/pipelines/sampler/cdm.py

"""
[职责] DINA / GDINA 的贝叶斯 Gibbs 基线：α | rest（2^K 类别）→ p | α（Dirichlet）→ θ | rest。
[边界] 后验模式概率用每次迭代的类别条件概率做 Rao-Blackwell 平均；MAP（联合/边际）由 ChainSummary 派生。
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
from .pmcdm import as_response_matrix
from .state import ChainState, ItemLayout
from .steps import step_alpha_cdm, step_proportions, step_theta
from .summary import ChainSummary


def cdm_iteration(
    state: ChainState,
    responses: NDArray[np.float64],
    layout: ItemLayout,
    prior: ResolvedPrior,
    rng: np.random.Generator,
    timing: TimingCollector,
    log_fields: Dict[str, Any],
) -> None:
    with timing.stage("alpha", accumulate=True):
        state.alpha, state.profile, state.profile_probs = step_alpha_cdm(state, responses, layout, rng)
    with timing.stage("proportions", accumulate=True):
        state.proportions = step_proportions(state, prior, rng)
    with timing.stage("theta", accumulate=True):
        state.theta, guess, slip = step_theta(state, responses, layout, rng, log_fields=log_fields)
        if guess is not None:
            state.guess, state.slip = guess, slip


def fit_cdm_bayes(
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
    if kind.is_partial_mastery:
        raise UsageError(message=f"fit_cdm_bayes expects DINA or GDINA, got {kind.value}",
                         detail={"kind": kind.value})
    return run_chains(
        as_response_matrix(data), q, kind, prior or PriorSpec(), config or ChainConfig(), cdm_iteration,
        context=context, workers=workers,
    )


def fit_model(
    data: ResponseMatrix | ArrayLike,
    q: QMatrix,
    kind: ModelKind | str,
    prior: Optional[PriorSpec] = None,
    config: Optional[ChainConfig] = None,
    *,
    context: Optional[RunContext] = None,
    workers: Optional[int] = None,
) -> ChainSummary:
    """Dispatch to the PM or CDM sampler by kind."""
    from .pmcdm import fit_pmcdm

    kind = ModelKind.parse(kind)
    fit = fit_pmcdm if kind.is_partial_mastery else fit_cdm_bayes
    return fit(data, q, kind, prior, config, context=context, workers=workers)
