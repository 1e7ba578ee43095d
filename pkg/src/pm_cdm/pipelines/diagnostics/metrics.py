# src/pm_cdm/pipelines/diagnostics/metrics.py

"""
[职责] 参数恢复指标：题目参数 MAE/RMSE、属性误判率 AMCR、掌握分数 RMSE（ARSE）与取整/后验边际转换。
[边界] 纯函数；形状不一致抛 DimensionError。
[上游关系] grid 与 diagnose 子命令在有真值时调用 evaluate_fit。
[下游关系] 返回 MetricReport。
"""

from __future__ import annotations

from typing import Optional, Tuple

import numpy as np
from numpy.typing import ArrayLike, NDArray

from pm_cdm.pipelines.sampler.summary import ChainSummary
from pm_cdm.schemas.model import ItemParamTable, profile_bits
from pm_cdm.schemas.reports import MetricReport
from pm_cdm.schemas.simulation import GeneratedDataset
from pm_cdm.utils.constants import MASTERY_CUTOFF
from pm_cdm.utils.errors import DimensionError


def _same_shape(a: ArrayLike, b: ArrayLike, *, what: str) -> Tuple[NDArray[np.float64], NDArray[np.float64]]:
    x = np.asarray(a, dtype=np.float64)
    y = np.asarray(b, dtype=np.float64)
    if x.shape != y.shape:
        raise DimensionError(
            message=f"{what}: shapes {list(x.shape)} and {list(y.shape)} differ",
            detail={"left": list(x.shape), "right": list(y.shape)},
        )
    return x, y


def item_mae_rmse(theta_true: ItemParamTable, theta_hat: ItemParamTable) -> Tuple[float, float]:
    """MAE and RMSE over every reduced-table cell of every item."""
    if not theta_true.q.equals(theta_hat.q):
        raise DimensionError(message="item tables were built on different Q-matrices",
                             error_code="METRICS__Q_MISMATCH")
    t, h = _same_shape(theta_true.flat(), theta_hat.flat(), what="item tables")
    err = h - t
    return float(np.mean(np.abs(err))), float(np.sqrt(np.mean(err**2)))


def amcr_per_attribute(alpha_true: ArrayLike, alpha_hat: ArrayLike) -> NDArray[np.float64]:
    t, h = _same_shape(alpha_true, alpha_hat, what="profile matrices")
    return np.mean(np.abs(t - h), axis=0)


def amcr(alpha_true: ArrayLike, alpha_hat: ArrayLike) -> float:
    """Σ_{i,k} |α_ik − α̂_ik| / (NK)."""
    t, h = _same_shape(alpha_true, alpha_hat, what="profile matrices")
    return float(np.mean(np.abs(t - h)))


def arse_per_attribute(d_true: ArrayLike, d_hat: ArrayLike) -> NDArray[np.float64]:
    t, h = _same_shape(d_true, d_hat, what="mastery score matrices")
    return np.sqrt(np.mean((t - h) ** 2, axis=0))


def arse(d_true: ArrayLike, d_hat: ArrayLike) -> float:
    """sqrt(Σ_{i,k} (d_ik − d̂_ik)² / (NK))."""
    t, h = _same_shape(d_true, d_hat, what="mastery score matrices")
    return float(np.sqrt(np.mean((t - h) ** 2)))


def round_profiles(d: ArrayLike) -> NDArray[np.int8]:
    """I(d ≥ 0.5) per cell; a tie rounds to 1."""
    return (np.asarray(d, dtype=np.float64) >= MASTERY_CUTOFF).astype(np.int8)


def cdm_posterior_d(profile_probs: ArrayLike) -> NDArray[np.float64]:
    """Marginal P(α_ik = 1) from (N, 2^K) profile posteriors."""
    p = np.atleast_2d(np.asarray(profile_probs, dtype=np.float64))
    k = int(round(np.log2(p.shape[1])))
    if 2**k != p.shape[1]:
        raise DimensionError(message="profile posterior width must be a power of two",
                             detail={"width": int(p.shape[1])})
    return p @ profile_bits(k).astype(np.float64)


def evaluate_fit(dataset: GeneratedDataset, summary: ChainSummary) -> MetricReport:
    """
    [职责] 对一次拟合计算全部指标。
    [边界] 真值为 PM：AMCR 以 I(d ≥ 0.5) 为真值（PM 拟合用 I(d̂ ≥ 0.5)，CDM 拟合用联合 MAP），并计算 ARSE；
           真值为 CDM：AMCR 以真 α 为准，不计算 ARSE。
           CDM 拟合另报边际 MAP 档案（P(α_ik=1|R) ≥ 0.5）的 AMCR。
    """
    mae, rmse = item_mae_rmse(dataset.true_table, summary.theta_mean)
    alpha_hat = summary.alpha_hat
    amcr_k = amcr_per_attribute(dataset.true_alpha, alpha_hat)
    arse_value: Optional[float] = None
    arse_k: list = []
    rounded: Optional[float] = None
    if dataset.true_d is not None:
        d_hat = summary.d_estimate
        arse_value = arse(dataset.true_d, d_hat)
        arse_k = arse_per_attribute(dataset.true_d, d_hat).tolist()
        rounded = amcr(round_profiles(dataset.true_d), alpha_hat)
    marginal_map = summary.alpha_marginal_map
    marginal = None if marginal_map is None else amcr(dataset.true_alpha, marginal_map)
    return MetricReport(
        true_kind=dataset.model_kind.value,
        fitted_kind=summary.kind.value,
        n_subjects=dataset.n_subjects,
        n_attributes=dataset.q.n_attributes,
        item_mae=mae,
        item_rmse=rmse,
        amcr=float(np.mean(amcr_k)),
        arse=arse_value,
        amcr_per_attribute=amcr_k.tolist(),
        arse_per_attribute=arse_k,
        amcr_rounded_truth=rounded,
        amcr_marginal_map=marginal,
    )
