# src/pm_cdm/pipelines/sampler/summary.py

"""
[职责] 后验汇总：保留迭代的均值/标准差累加器、全局参数抽样存储（DrawStore）与链汇总结果 ChainSummary。
[边界] 只消费预烧后、稀疏后的迭代；累加器可跨链精确合并（sum/sumsq/count）。
[上游关系] 拟合循环在每个保留迭代调用 add(...)；多链由 chains.merge_chains 合并。
[下游关系] diagnostics（指标、诊断、收敛、信息准则）与 formats（summary/archive）消费 ChainSummary。
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import NDArray

from pm_cdm.schemas.model import (
    ClassProportions,
    CopulaParams,
    ItemParamTable,
    ModelKind,
    QMatrix,
    profile_bits,
)
from pm_cdm.schemas.sampler import ChainConfig, PriorSpec
from pm_cdm.utils.constants import MASTERY_CUTOFF
from pm_cdm.utils.errors import DimensionError


@dataclass
class SummaryAccumulator:
    """Running sum / sum of squares / count for an array-valued quantity."""

    total: Optional[NDArray[np.float64]] = None
    total_sq: Optional[NDArray[np.float64]] = None
    count: int = 0

    def add(self, value: NDArray[np.float64]) -> None:
        v = np.asarray(value, dtype=np.float64)
        if self.total is None:
            self.total = np.zeros_like(v)
            self.total_sq = np.zeros_like(v)
        self.total += v
        self.total_sq += v * v
        self.count += 1

    def merge(self, other: "SummaryAccumulator") -> "SummaryAccumulator":
        if other.count == 0:
            return SummaryAccumulator(self.total, self.total_sq, self.count)
        if self.count == 0:
            return SummaryAccumulator(other.total, other.total_sq, other.count)
        return SummaryAccumulator(self.total + other.total, self.total_sq + other.total_sq, self.count + other.count)

    @property
    def mean(self) -> NDArray[np.float64]:
        return self.total / self.count

    @property
    def sd(self) -> NDArray[np.float64]:
        """Sample standard deviation (0 for a single draw)."""
        if self.count < 2:
            return np.zeros_like(self.total)
        m = self.mean
        var = (self.total_sq - self.count * m * m) / (self.count - 1)
        return np.sqrt(np.maximum(var, 0.0))


@dataclass(frozen=True, eq=False)
class DrawStore:
    """Retained draws of the global parameters of one chain: values[r] belongs to iterations[r]."""

    chain_id: int
    names: Tuple[str, ...]
    iterations: NDArray[np.int64]
    values: NDArray[np.float64]

    def __post_init__(self) -> None:
        if self.values.shape != (self.iterations.size, len(self.names)):
            raise DimensionError(
                message="draw store shape does not match names/iterations",
                detail={"values": list(self.values.shape), "n_iter": int(self.iterations.size),
                        "n_names": len(self.names)},
            )

    @property
    def n_draws(self) -> int:
        return int(self.iterations.size)

    def select(self, prefix: str) -> Tuple[Tuple[str, ...], NDArray[np.float64]]:
        cols = [i for i, n in enumerate(self.names) if n.startswith(prefix)]
        return tuple(self.names[i] for i in cols), self.values[:, cols]


def _class_label(bits: Sequence[int]) -> str:
    return "".join(str(int(b)) for b in bits)


def global_parameter_names(kind: ModelKind, q: QMatrix) -> Tuple[str, ...]:
    """
    [职责] 全局参数命名：θ（DINA 类为 theta[j|g] 与 theta[j|1-s]，GDINA 类为 theta[j|约化类 bits]）、
           PM 的 mu[k] 与 sigma[k,l]（k ≤ l），CDM 的 p[模式 bits]。
    [边界] 下标 1-based；约化类 bits 按 S_j 顺序。
    """
    names: List[str] = []
    for j, s in enumerate(q.n_required):
        if kind.is_dina_family:
            names += [f"theta[{j + 1}|g]", f"theta[{j + 1}|1-s]"]
        else:
            names += [f"theta[{j + 1}|{_class_label(b)}]" for b in profile_bits(int(s))]
    k = q.n_attributes
    if kind.is_partial_mastery:
        names += [f"mu[{a + 1}]" for a in range(k)]
        names += [f"sigma[{a + 1},{b + 1}]" for a in range(k) for b in range(a, k)]
    else:
        names += [f"p[{_class_label(b)}]" for b in profile_bits(k)]
    return tuple(names)


@dataclass(frozen=True, eq=False)
class ChainSummary:
    """
    [职责] 拟合结果：各参数后验均值/标准差、PM 的 d_hat 或 CDM 的后验模式概率、每条链的保留抽样。
    [边界] 只由保留迭代计算；d_hat ∈ [0,1]；θ 均值 ∈ (0,1)。draws 在从 summary 文件读回时为空。
    """

    kind: ModelKind
    q: QMatrix
    n_subjects: int
    n_chains: int
    n_draws: int  # docstring: 每条链保留条数
    config: ChainConfig
    prior: PriorSpec
    theta_mean: ItemParamTable
    theta_sd: Tuple[NDArray[np.float64], ...]
    guess_mean: Optional[NDArray[np.float64]] = None
    guess_sd: Optional[NDArray[np.float64]] = None
    slip_mean: Optional[NDArray[np.float64]] = None
    slip_sd: Optional[NDArray[np.float64]] = None
    d_hat: Optional[NDArray[np.float64]] = None
    d_sd: Optional[NDArray[np.float64]] = None
    mu_mean: Optional[NDArray[np.float64]] = None
    mu_sd: Optional[NDArray[np.float64]] = None
    sigma_mean: Optional[NDArray[np.float64]] = None
    sigma_sd: Optional[NDArray[np.float64]] = None
    profile_probs: Optional[NDArray[np.float64]] = None
    proportions_mean: Optional[NDArray[np.float64]] = None
    proportions_sd: Optional[NDArray[np.float64]] = None
    draws: Tuple[DrawStore, ...] = ()
    timing_ms: Dict[str, float] = field(default_factory=dict)
    meta: Dict[str, Any] = field(default_factory=dict)

    @property
    def n_attributes(self) -> int:
        return self.q.n_attributes

    @cached_property
    def attribute_probs(self) -> Optional[NDArray[np.float64]]:
        """CDM: marginal P(α_ik = 1 | R) from the profile posterior."""
        if self.profile_probs is None:
            return None
        return self.profile_probs @ profile_bits(self.n_attributes).astype(np.float64)

    @property
    def d_estimate(self) -> NDArray[np.float64]:
        """d̂: posterior mean d (PM) or marginal attribute posterior probabilities (CDM)."""
        return self.d_hat if self.kind.is_partial_mastery else self.attribute_probs

    @property
    def alpha_map(self) -> Optional[NDArray[np.int8]]:
        """CDM joint-MAP profiles."""
        if self.profile_probs is None:
            return None
        return profile_bits(self.n_attributes)[np.argmax(self.profile_probs, axis=1)]

    @property
    def alpha_marginal_map(self) -> Optional[NDArray[np.int8]]:
        if self.profile_probs is None:
            return None
        return (self.attribute_probs >= MASTERY_CUTOFF).astype(np.int8)

    @property
    def alpha_hat(self) -> NDArray[np.int8]:
        """Point classification: I(d̂ ≥ 0.5) for PM fits, joint-MAP for CDM fits."""
        if self.kind.is_partial_mastery:
            return (self.d_hat >= MASTERY_CUTOFF).astype(np.int8)
        return self.alpha_map

    @property
    def copula_mean(self) -> Optional[CopulaParams]:
        if self.mu_mean is None:
            return None
        return CopulaParams(mu=self.mu_mean, sigma=0.5 * (self.sigma_mean + self.sigma_mean.T))

    @property
    def proportions(self) -> Optional[ClassProportions]:
        if self.proportions_mean is None:
            return None
        return ClassProportions(p=self.proportions_mean / self.proportions_mean.sum())

    @property
    def parameter_names(self) -> Tuple[str, ...]:
        return global_parameter_names(self.kind, self.q)
