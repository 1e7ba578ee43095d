# src/pm_cdm/schemas/reports.py

"""
[职责] 报告契约层：单调性检查、参数恢复指标、部分掌握诊断、收敛诊断、信息准则比较与 grid 聚合表。
[边界] 不实现计算（见 pipelines/diagnostics 与 pipelines/simulate/grid）；仅定义可序列化的结构化结果。
[上游关系] diagnostics/grid 计算后构造。
[下游关系] services 写 JSON + 文本表；CLI --json 输出；gate tests 断言字段。
"""

from __future__ import annotations

from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field


MonotonicityForm = Literal["mastery", "coordinatewise"]  # docstring: 掌握支配式 / 逐坐标式
AttributeVerdict = Literal["binary-like", "partial-like", "indeterminate"]
EvidenceLabel = Literal["none", "weak", "positive", "strong", "very strong"]


class MonotonicityViolation(BaseModel):
    """One violating pair: the dominating reduced class has a smaller θ."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    item: int = Field(..., ge=0)  # docstring: 0-based 题目索引
    form: MonotonicityForm
    higher_class: List[int]  # docstring: 约化类 bits（S_j 顺序）
    lower_class: List[int]
    theta_higher: float
    theta_lower: float


class MonotonicityReport(BaseModel):
    model_config = ConfigDict(extra="forbid")

    items_checked: int = Field(default=0, ge=0)
    violations: List[MonotonicityViolation] = Field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def violating_items(self, form: Optional[MonotonicityForm] = None) -> List[int]:
        return sorted({v.item for v in self.violations if form is None or v.form == form})


class MetricReport(BaseModel):
    """
    [职责] 参数恢复指标：题目参数 MAE/RMSE、属性误判率 AMCR、掌握分数 ARSE，以及逐属性分解。
    [边界] AMCR/ARSE 在真值或估计不可得时为 None；所有值非负，AMCR ≤ 1。
    """

    model_config = ConfigDict(extra="forbid")

    true_kind: str
    fitted_kind: str
    n_subjects: int = Field(..., ge=0)
    n_attributes: int = Field(..., ge=1)

    item_mae: float = Field(..., ge=0.0)
    item_rmse: float = Field(..., ge=0.0)
    amcr: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    arse: Optional[float] = Field(default=None, ge=0.0)
    amcr_per_attribute: List[float] = Field(default_factory=list)
    arse_per_attribute: List[float] = Field(default_factory=list)
    amcr_rounded_truth: Optional[float] = Field(default=None, ge=0.0, le=1.0)  # docstring: PM 真值按 I(d>=0.5) 计算
    amcr_marginal_map: Optional[float] = Field(default=None, ge=0.0, le=1.0)  # docstring: 仅 CDM 拟合：边际 MAP 档案的 AMCR


class PopulationSummary(BaseModel):
    """Population-level PM estimates: μ̂, Φ(μ̂), diag(Σ̂), correlation matrix and mean off-diagonal ρ̂."""

    model_config = ConfigDict(extra="forbid")

    mu: List[float]
    mastery_mean: List[float]
    sigma2: List[float]
    correlation: List[List[float]]
    rho_mean: Optional[float] = None  # docstring: K=1 时无非对角元


class DiagnosisReport(BaseModel):
    """
    [职责] 部分掌握诊断：Σ̂ 对角阈值判定 + 相关矩阵 + 散点数据位置。
    [边界] 判定只依赖阈值（binary > upper，partial < lower，其余 indeterminate）。
    """

    model_config = ConfigDict(extra="forbid")

    fitted_kind: str
    sigma2: List[float]
    sigma2_sd: List[float] = Field(default_factory=list)
    correlation: List[List[float]]
    verdicts: List[AttributeVerdict]
    binary_threshold: float
    partial_threshold: float
    population: Optional[PopulationSummary] = None
    monotonicity: Optional[MonotonicityReport] = None
    scatter_dir: Optional[str] = None


class ConvergenceEntry(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str
    psrf: Optional[float] = None  # docstring: 零方差参数为 None（已排除）
    converged: Optional[bool] = None
    excluded: bool = False


class ConvergenceReport(BaseModel):
    model_config = ConfigDict(extra="forbid")

    threshold: float
    n_chains: int = Field(..., ge=2)
    n_draws: int = Field(..., ge=1)
    entries: List[ConvergenceEntry] = Field(default_factory=list)

    @property
    def included(self) -> List[ConvergenceEntry]:
        return [e for e in self.entries if not e.excluded]

    @property
    def share_converged(self) -> float:
        inc = self.included
        if not inc:
            return 1.0
        return sum(1 for e in inc if e.converged) / len(inc)

    def share_converged_with_prefix(self, prefix: str) -> float:
        inc = [e for e in self.included if e.name.startswith(prefix)]
        if not inc:
            return 1.0
        return sum(1 for e in inc if e.converged) / len(inc)


class CriteriaResult(BaseModel):
    """AIC/BIC for one fitted summary (log-likelihood at posterior-mean parameters)."""

    model_config = ConfigDict(extra="forbid")

    label: str
    fitted_kind: str
    n_subjects: int = Field(..., ge=1)
    loglik: float
    n_params: int = Field(..., ge=1)
    aic: float
    bic: float
    mc_draws: Optional[int] = None  # docstring: PM 模型蒙特卡洛积分次数


class ComparisonRow(CriteriaResult):
    delta_aic: float = Field(..., ge=0.0)
    delta_bic: float = Field(..., ge=0.0)
    evidence: EvidenceLabel = "none"  # docstring: 相对 BIC 最优模型的证据强度


class ComparisonTable(BaseModel):
    model_config = ConfigDict(extra="forbid")

    data_hash: Optional[str] = None
    rows: List[ComparisonRow] = Field(default_factory=list)
    best_by_aic: str
    best_by_bic: str


class ItemEstimateRow(BaseModel):
    """Per-item estimates of one or two fits, side by side with the Q row."""

    model_config = ConfigDict(extra="forbid")

    item: int = Field(..., ge=1)  # docstring: 1-based（面向阅读）
    q_row: List[int]
    estimates: Dict[str, List[float]] = Field(default_factory=dict)  # docstring: label -> 约化表


class MetricAggregate(BaseModel):
    """Mean of metrics over replications for one fitted kind."""

    model_config = ConfigDict(extra="forbid")

    fitted_kind: str
    n_replications: int = Field(..., ge=0)
    item_mae: Optional[float] = None
    item_rmse: Optional[float] = None
    amcr: Optional[float] = None
    arse: Optional[float] = None
    sigma2_mean: Optional[float] = None  # docstring: PM 拟合的 diag(Σ̂) 均值（诊断分离）


class GridRow(BaseModel):
    model_config = ConfigDict(extra="forbid")

    condition_id: str
    condition: Dict[str, Any]
    replications: int = Field(..., ge=0)
    fits: List[MetricAggregate] = Field(default_factory=list)
    per_replication: List[Dict[str, Any]] = Field(default_factory=list)


class GridResult(BaseModel):
    model_config = ConfigDict(extra="forbid")

    master_seed: int
    rows: List[GridRow] = Field(default_factory=list)
    meta: Dict[str, Any] = Field(default_factory=dict)
