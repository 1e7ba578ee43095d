# src/pm_cdm/pipelines/diagnostics/criteria.py

"""
[职责] 信息准则：后验均值参数处的对数似然、参数个数、AIC/BIC 与多模型比较表（含 BIC 差值证据标签）。
[边界] PM 模型的似然用带种子的蒙特卡洛积分（默认 1000 次）；比较要求所有拟合基于同一数据（N 一致）。
[上游关系] compare 子命令；grid 可选调用。
[下游关系] CriteriaResult / ComparisonTable。
"""

from __future__ import annotations

import logging
from typing import Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike

from pm_cdm.config import settings
from pm_cdm.pipelines.model.likelihood import cdm_loglik, pmcdm_loglik
from pm_cdm.pipelines.sampler.summary import ChainSummary
from pm_cdm.schemas.model import ModelKind, QMatrix, ResponseMatrix
from pm_cdm.schemas.reports import ComparisonRow, ComparisonTable, CriteriaResult, EvidenceLabel
from pm_cdm.utils.errors import DataValidationError, UsageError
from pm_cdm.utils.logging_ import get_logger, log_event

logger = get_logger("diagnostics.criteria")


def count_parameters(kind: ModelKind | str, q: QMatrix) -> int:
    """DINA-family: 2 per item, GDINA-family: 2^{|S_j|} per item; plus 2^K − 1 (CDM) or K + K(K+1)/2 (PM)."""
    kind = ModelKind.parse(kind)
    k = q.n_attributes
    theta = 2 * q.n_items if kind.is_dina_family else int(np.sum(2 ** np.asarray(q.n_required)))
    population = k + k * (k + 1) // 2 if kind.is_partial_mastery else 2**k - 1
    return theta + population


def summary_loglik(
    responses: ResponseMatrix | ArrayLike,
    summary: ChainSummary,
    *,
    mc_draws: Optional[int] = None,
    seed: Optional[int] = None,
) -> float:
    if summary.kind.is_partial_mastery:
        ll = pmcdm_loglik(responses, summary.theta_mean, summary.copula_mean, mc_draws=mc_draws, seed=seed)
    else:
        ll = cdm_loglik(responses, summary.theta_mean, summary.proportions)
    return float(np.sum(ll))


def information_criteria(
    responses: ResponseMatrix | ArrayLike,
    summary: ChainSummary,
    *,
    label: Optional[str] = None,
    mc_draws: Optional[int] = None,
    seed: Optional[int] = None,
) -> CriteriaResult:
    """AIC = −2ℓ + 2P, BIC = −2ℓ + P·log N at posterior-mean parameters."""
    n_mc = int(mc_draws if mc_draws is not None else settings.PM_CDM_IC_MC_DRAWS)
    ll = summary_loglik(responses, summary, mc_draws=n_mc, seed=seed)
    p = count_parameters(summary.kind, summary.q)
    n = summary.n_subjects
    return CriteriaResult(
        label=label or summary.kind.value,
        fitted_kind=summary.kind.value,
        n_subjects=n,
        loglik=ll,
        n_params=p,
        aic=-2.0 * ll + 2.0 * p,
        bic=-2.0 * ll + p * float(np.log(n)),
        mc_draws=n_mc if summary.kind.is_partial_mastery else None,
    )


def evidence_label(delta_bic: float) -> EvidenceLabel:
    """Strength of evidence against a model trailing the best by delta_bic."""
    if delta_bic <= 0.0:
        return "none"
    if delta_bic <= 2.0:
        return "weak"
    if delta_bic <= 6.0:
        return "positive"
    if delta_bic <= 10.0:
        return "strong"
    return "very strong"


def compare_models(results: Sequence[CriteriaResult], *, data_hash: Optional[str] = None) -> ComparisonTable:
    """Rows sorted by BIC; the lowest AIC/BIC label is flagged best."""
    if len(results) < 2:
        raise UsageError(message="compare needs at least two fitted summaries", detail={"count": len(results)})
    labels = [r.label for r in results]
    if len(set(labels)) != len(labels):
        raise UsageError(message="summary labels must be unique", detail={"labels": labels})
    sizes = {r.n_subjects for r in results}
    if len(sizes) != 1:
        raise DataValidationError(
            message="summaries were fitted to data with different subject counts",
            detail={"n_subjects": sorted(sizes)},
            error_code="COMPARE__DATA_MISMATCH",
        )
    best_aic = min(r.aic for r in results)
    best_bic = min(r.bic for r in results)
    rows = [
        ComparisonRow(
            **r.model_dump(),
            delta_aic=r.aic - best_aic,
            delta_bic=r.bic - best_bic,
            evidence=evidence_label(r.bic - best_bic),
        )
        for r in sorted(results, key=lambda r: r.bic)
    ]
    table = ComparisonTable(
        data_hash=data_hash,
        rows=rows,
        best_by_aic=min(results, key=lambda r: r.aic).label,
        best_by_bic=rows[0].label,
    )
    log_event(logger, logging.INFO, "models compared",
              fields={"best_by_aic": table.best_by_aic, "best_by_bic": table.best_by_bic, "models": labels})
    return table
