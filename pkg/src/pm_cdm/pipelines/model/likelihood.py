# src/pm_cdm/pipelines/model/likelihood.py

"""
[职责] 观测作答的边际对数似然：CDM（对 2^K 类别求和）与 PM-CDM（对 copula 蒙特卡洛积分）。
[边界] 全部在对数空间用 logsumexp 稳定求和；PM 积分节点由 seed 固定，结果确定。
[上游关系] diagnostics/criteria 在后验均值参数处求 AIC/BIC；CDM 采样器复用 cdm_class_loglik。
[下游关系] 返回逐被试对数似然数组或标量。
"""

from __future__ import annotations

from typing import Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import logsumexp

from pm_cdm.config import settings
from pm_cdm.schemas.model import ClassProportions, CopulaParams, ItemParamTable, ResponseMatrix
from pm_cdm.utils.errors import DimensionError, ParameterError

from .copula import copula_nodes, marginal_item_probs


def _as_responses(responses: ResponseMatrix | ArrayLike, n_items: int) -> NDArray[np.float64]:
    r = responses.entries if isinstance(responses, ResponseMatrix) else np.asarray(responses)
    r = np.atleast_2d(r).astype(np.float64)
    if r.shape[1] != n_items:
        raise DimensionError(
            message=f"responses have {r.shape[1]} items, the table has {n_items}",
            detail={"responses_items": int(r.shape[1]), "table_items": int(n_items)},
        )
    return r


def bernoulli_loglik(responses: ArrayLike, probs: ArrayLike) -> NDArray[np.float64]:
    """(N, M) matrix Σ_j R_ij log p_mj + (1 − R_ij) log(1 − p_mj) for probability rows p_m (shape (M, J))."""
    r = np.asarray(responses, dtype=np.float64)
    p = np.asarray(probs, dtype=np.float64)
    return r @ np.log(p).T + (1.0 - r) @ np.log1p(-p).T


def cdm_class_loglik(responses: ResponseMatrix | ArrayLike, table: ItemParamTable) -> NDArray[np.float64]:
    """(N, 2^K) conditional log-likelihoods log P(R_i | α) for every profile."""
    r = _as_responses(responses, table.n_items)
    return bernoulli_loglik(r, table.full_table.T)


def _log_proportions(p: ClassProportions | ArrayLike, n_classes: int) -> NDArray[np.float64]:
    arr = p.p if isinstance(p, ClassProportions) else np.asarray(p, dtype=np.float64).reshape(-1)
    if arr.size != n_classes:
        raise DimensionError(message="class proportions length does not match 2^K",
                             detail={"got": int(arr.size), "expected": int(n_classes)})
    if np.any(arr < 0.0) or not np.isclose(arr.sum(), 1.0, rtol=0.0, atol=1e-10):
        raise ParameterError(message="class proportions must be a probability vector",
                             error_code="PROPORTIONS__NOT_NORMALIZED")
    with np.errstate(divide="ignore"):
        return np.log(arr)


def cdm_loglik(
    responses: ResponseMatrix | ArrayLike,
    table: ItemParamTable,
    proportions: ClassProportions | ArrayLike,
) -> NDArray[np.float64]:
    """Per-subject log Σ_α p_α ∏_j θ^{R}(1 − θ)^{1−R}. Degenerate p (zeros) is accepted as a raw array."""
    class_ll = cdm_class_loglik(responses, table)
    return logsumexp(class_ll + _log_proportions(proportions, class_ll.shape[1]), axis=1)


def cdm_subject_loglik(
    r_i: ArrayLike, table: ItemParamTable, proportions: ClassProportions | ArrayLike
) -> float:
    return float(cdm_loglik(np.atleast_2d(r_i), table, proportions)[0])


def pmcdm_loglik_from_scores(
    responses: ResponseMatrix | ArrayLike,
    table: ItemParamTable,
    d_nodes: ArrayLike,
    weights: Optional[ArrayLike] = None,
) -> NDArray[np.float64]:
    """
    [职责] 给定掌握分数节点 d_m（M×K）与权重，计算逐被试 log Σ_m w_m ∏_j θ_{j,d_m}^{R}(1 − θ_{j,d_m})^{1−R}。
    [边界] 默认等权 1/M。
    """
    r = _as_responses(responses, table.n_items)
    d = np.atleast_2d(np.asarray(d_nodes, dtype=np.float64))
    probs = marginal_item_probs(d, table)
    ll = bernoulli_loglik(r, probs)
    if weights is None:
        return logsumexp(ll, axis=1) - np.log(d.shape[0])
    return logsumexp(ll, axis=1, b=np.asarray(weights, dtype=np.float64)[None, :])


def pmcdm_loglik(
    responses: ResponseMatrix | ArrayLike,
    table: ItemParamTable,
    copula: CopulaParams,
    *,
    mc_draws: Optional[int] = None,
    seed: Optional[int] = None,
) -> NDArray[np.float64]:
    """
    [职责] PM-CDM 逐被试边际对数似然：对 mc_draws 个 copula 样本取平均后取对数。
    [边界] 所有被试共享同一组样本（由 seed 决定），结果确定。
    """
    n = int(mc_draws if mc_draws is not None else settings.PM_CDM_IC_MC_DRAWS)
    if n < 1:
        raise ParameterError(message="mc_draws must be >= 1", detail={"mc_draws": n})
    if copula.n_attributes != table.q.n_attributes:
        raise DimensionError(message="copula dimension does not match the Q-matrix",
                             detail={"copula": copula.n_attributes, "K": table.q.n_attributes})
    d, _ = copula_nodes(copula, method="mc", draws=n,
                        seed=settings.PM_CDM_DEFAULT_SEED if seed is None else seed)
    return pmcdm_loglik_from_scores(responses, table, d)


def pmcdm_subject_loglik(
    r_i: ArrayLike,
    table: ItemParamTable,
    copula: CopulaParams,
    *,
    mc_draws: Optional[int] = None,
    seed: Optional[int] = None,
) -> float:
    return float(pmcdm_loglik(np.atleast_2d(r_i), table, copula, mc_draws=mc_draws, seed=seed)[0])
