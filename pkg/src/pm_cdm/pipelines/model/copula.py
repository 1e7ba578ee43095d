# src/pm_cdm/pipelines/model/copula.py

"""
[职责] 高斯 copula 与部分掌握混合：probit 变换、混合权重、约化类权重、边际作答概率、copula 抽样与 RLCM 类别权重。
[边界] 纯数值函数（抽样只接受显式 seed/Generator）；不做 I/O。
[上游关系] simulate 抽取掌握分数；likelihood 对 copula 积分；diagnostics/测试用 RLCM 权重做等价性检查。
[下游关系] 返回 numpy 数组/浮点数。
"""

from __future__ import annotations

from typing import Literal, Optional, Tuple

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import ndtr, ndtri

from pm_cdm.config import settings
from pm_cdm.schemas.model import CopulaParams, ItemParamTable, profile_bits
from pm_cdm.utils.constants import PROBIT_EPS
from pm_cdm.utils.errors import DimensionError, ParameterError, SizeError
from pm_cdm.utils.rng import make_rng

QuadratureMethod = Literal["mc", "grid"]


def probit(u: ArrayLike) -> NDArray[np.float64] | float:
    """Φ^{-1}(u) with u clamped to [1e-12, 1 − 1e-12]."""
    out = ndtri(np.clip(np.asarray(u, dtype=np.float64), PROBIT_EPS, 1.0 - PROBIT_EPS))
    return float(out) if np.ndim(out) == 0 else out


def probit_inv(x: ArrayLike) -> NDArray[np.float64] | float:
    out = ndtr(np.asarray(x, dtype=np.float64))
    return float(out) if np.ndim(out) == 0 else out


def mixture_weight(d: ArrayLike, alpha: ArrayLike) -> NDArray[np.float64] | float:
    """∏_k d_k^{α_k}(1 − d_k)^{1−α_k}; power form keeps binary d exact (0^0 = 1)."""
    dd = np.asarray(d, dtype=np.float64)
    aa = np.asarray(alpha, dtype=np.float64)
    if dd.shape[-1] != aa.shape[-1]:
        raise DimensionError(message="mastery score and profile lengths differ",
                             detail={"d": int(dd.shape[-1]), "alpha": int(aa.shape[-1])})
    out = np.prod(dd**aa * (1.0 - dd) ** (1.0 - aa), axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def reduced_class_weights(d: ArrayLike, required: ArrayLike) -> NDArray[np.float64]:
    """(..., 2^{|S|}) mixture weights of the reduced classes over the attribute subset `required`."""
    req = np.asarray(required, dtype=np.int64)
    ds = np.asarray(d, dtype=np.float64)[..., req]
    bits = profile_bits(req.size).astype(np.float64)
    return np.prod(ds[..., None, :] ** bits * (1.0 - ds[..., None, :]) ** (1.0 - bits), axis=-1)


def marginal_item_prob(d: ArrayLike, j: int, table: ItemParamTable) -> NDArray[np.float64] | float:
    """θ_{j,d} = Σ_a θ_{j,a}·w_a(d), summed over the item's reduced classes."""
    table.q._check_item(j)
    dd = np.asarray(d, dtype=np.float64)
    if dd.shape[-1] != table.q.n_attributes:
        raise DimensionError(message="mastery score length does not match K",
                             detail={"d": int(dd.shape[-1]), "K": table.q.n_attributes})
    out = reduced_class_weights(dd, table.q.required_sets[j]) @ table.tables[j]
    return float(out) if np.ndim(out) == 0 else out


def marginal_item_probs(d: ArrayLike, table: ItemParamTable) -> NDArray[np.float64]:
    """(..., J) marginal positive-response probabilities for every item."""
    dd = np.asarray(d, dtype=np.float64)
    return np.stack([marginal_item_prob(dd, j, table) for j in range(table.n_items)], axis=-1)


# -----------------------------
# copula sampling / quadrature
# -----------------------------


def sample_gaussian_scores(copula: CopulaParams, n: int, rng: np.random.Generator) -> NDArray[np.float64]:
    """tilde_d ~ N(μ, Σ) via the stored Cholesky factor, shape (n, K)."""
    z = rng.standard_normal((int(n), copula.n_attributes))
    return copula.mu + z @ copula.chol.T


def copula_nodes(
    copula: CopulaParams,
    *,
    method: QuadratureMethod = "mc",
    draws: Optional[int] = None,
    grid_points: Optional[int] = None,
    seed: int | np.random.Generator | None = None,
) -> Tuple[NDArray[np.float64], NDArray[np.float64]]:
    """
    [职责] 生成对 copula 分布积分用的 (d 节点, 权重)。
    [边界] mc：draws 个等权样本；grid：每维 G 个标准正态分位中点的张量积（仅 K ≤ 2），经 μ + Lx 映射。
    """
    k = copula.n_attributes
    if method == "mc":
        n = int(draws if draws is not None else settings.PM_CDM_RLCM_MC_DRAWS)
        if n < 1:
            raise ParameterError(message="Monte Carlo draw count must be >= 1", detail={"draws": n})
        rng = make_rng(settings.PM_CDM_DEFAULT_SEED if seed is None else seed)
        tilde = sample_gaussian_scores(copula, n, rng)
        return ndtr(tilde), np.full(n, 1.0 / n)
    if method == "grid":
        if k > 2:
            raise ParameterError(
                message=f"grid quadrature is offered for K <= 2 only (K = {k})",
                detail={"K": k},
                error_code="QUADRATURE__GRID_TOO_WIDE",
            )
        g = int(grid_points if grid_points is not None else settings.PM_CDM_RLCM_GRID_POINTS)
        x1 = ndtri((np.arange(g) + 0.5) / g)
        x = np.stack(np.meshgrid(*([x1] * k), indexing="ij"), axis=-1).reshape(-1, k)
        tilde = copula.mu + x @ copula.chol.T
        return ndtr(tilde), np.full(x.shape[0], 1.0 / x.shape[0])
    raise ParameterError(message=f"unknown quadrature method: {method!r}", detail={"method": str(method)})


def rlcm_class_weight(
    profiles: ArrayLike,
    copula: CopulaParams,
    *,
    method: QuadratureMethod = "mc",
    draws: Optional[int] = None,
    grid_points: Optional[int] = None,
    seed: int | np.random.Generator | None = None,
    class_cap: Optional[int] = None,
) -> float:
    """
    [职责] 受限潜类表示的类别权重 π_A = E_D ∏_k d_k^{c_k}(1 − d_k)^{J − c_k}，c_k = Σ_j α*_jk。
    [边界] 仅供小规模核对：2^{KJ} 超过上限时抛 SizeError。
    """
    a = np.asarray(profiles)
    if a.ndim != 2 or a.shape[1] != copula.n_attributes:
        raise DimensionError(message="profiles must be a J×K matrix matching the copula dimension",
                             detail={"shape": list(a.shape), "K": copula.n_attributes})
    n_items, k = a.shape
    cap = int(class_cap if class_cap is not None else settings.PM_CDM_RLCM_CLASS_CAP)
    if n_items * k >= 63 or 2 ** (n_items * k) > cap:
        raise SizeError(
            message=f"2^(K*J) = 2^{n_items * k} latent classes exceeds the cap {cap}",
            detail={"K": k, "J": n_items, "cap": cap},
        )
    if not np.isin(a, (0, 1)).all():
        raise ParameterError(message="working profiles must be binary", error_code="PROFILE__NON_BINARY")
    counts = a.sum(axis=0).astype(np.float64)
    d, w = copula_nodes(copula, method=method, draws=draws, grid_points=grid_points, seed=seed)
    integrand = np.prod(d**counts * (1.0 - d) ** (n_items - counts), axis=-1)
    return float(integrand @ w)
