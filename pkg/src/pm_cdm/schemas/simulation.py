# src/pm_cdm/schemas/simulation.py

"""
[职责] 模拟契约：单个模拟条件 SimulationCondition 与生成结果 GeneratedDataset。
[边界] 条件只描述设计（模型、K、Q 变体、μ 变体、ρ、N、重复次数、种子）；生成逻辑见 pipelines/simulate。
[上游关系] CLI simulate/grid 与 RunConfig 构造条件。
[下游关系] generate 生成数据集；grid 聚合；formats/truth 持久化。
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Dict, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from pm_cdm.config import settings
from pm_cdm.utils.constants import DEFAULT_REPLICATIONS, SIM_NONCONSTANT_MU, SIM_SIGMA2

from .model import (
    CopulaParams,
    DinaItemParams,
    ItemParamTable,
    MasteryScores,
    ModelKind,
    ProfileMatrix,
    QMatrix,
    ResponseMatrix,
)


QVariant = Literal["complete", "incomplete"]
MuVariant = Literal["constant", "nonconstant"]


class SimulationCondition(BaseModel):
    """
    [职责] 一个模拟条件：Σ = σ²{ρ·11ᵀ + (1 − ρ)I}；非常数 μ 为 (−1,0,1) 或 (−1,−0.5,0,0.5,1)。
    [边界] K ∈ {3,5}（内置 Q 矩阵）；ρ ∈ [0,1) 保证 Σ 正定。
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    model_kind: ModelKind
    n_attributes: Literal[3, 5] = 3
    q_variant: QVariant = "complete"
    mu_variant: MuVariant = "constant"
    rho: float = Field(default=0.0, ge=0.0, lt=1.0)
    n_subjects: int = Field(default=500, ge=1)
    sigma2: float = Field(default=SIM_SIGMA2, gt=0.0)
    replications: int = Field(default=DEFAULT_REPLICATIONS, ge=0)
    seed: int = Field(default_factory=lambda: settings.PM_CDM_DEFAULT_SEED)

    @field_validator("model_kind", mode="before")
    @classmethod
    def _parse_kind(cls, v: Any) -> ModelKind:
        return ModelKind.parse(v)

    @field_validator("mu_variant", mode="before")
    @classmethod
    def _alias_mu(cls, v: Any) -> Any:
        return "constant" if str(v).strip().lower() in {"constant-zero", "zero", "0"} else v

    @property
    def condition_id(self) -> str:
        """Stable id (independent of seed and replication count)."""
        return (
            f"{self.model_kind.value}_K{self.n_attributes}_{self.q_variant}_{self.mu_variant}"
            f"_rho{self.rho:g}_N{self.n_subjects}"
        )

    def mu_vector(self) -> np.ndarray:
        if self.mu_variant == "constant":
            return np.zeros(self.n_attributes)
        return np.asarray(SIM_NONCONSTANT_MU[self.n_attributes], dtype=np.float64)

    def copula(self) -> CopulaParams:
        return CopulaParams.exchangeable(self.mu_vector(), rho=self.rho, sigma2=self.sigma2)

    def record(self) -> Dict[str, Any]:
        out = self.model_dump(mode="json")
        out["condition_id"] = self.condition_id
        return out


@dataclass(frozen=True, eq=False)
class GeneratedDataset:
    """
    [职责] 一次生成的数据及其真值：作答、Q、真题目参数、真掌握模式（PM 为 I(d≥0.5)）与 PM 的真掌握分数。
    [边界] true_d 仅 PM 模型有；true_alpha 总是存在（AMCR 需要）。
    """

    model_kind: ModelKind
    q: QMatrix
    responses: ResponseMatrix
    true_table: ItemParamTable
    true_alpha: ProfileMatrix
    true_d: Optional[MasteryScores] = None
    true_dina: Optional[DinaItemParams] = None
    copula: Optional[CopulaParams] = None
    condition: Optional[SimulationCondition] = None
    replication: int = 0
    seed: Optional[int] = None

    @property
    def n_subjects(self) -> int:
        return self.responses.n_subjects
