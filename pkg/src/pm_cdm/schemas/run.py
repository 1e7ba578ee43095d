# src/pm_cdm/schemas/run.py

"""
[职责] RunConfig：一次运行的完整配置（模型、数据来源、先验覆盖、链配置、输出目录、种子）。
[边界] 数据来源二选一：(Q 路径 + 作答路径) 或 模拟条件；种子必填且同步到链配置。
[上游关系] services/_shared 由命令行参数与配置文件合并构造。
[下游关系] simulate/fit 服务消费；config 快照写进 summary meta。
"""

from __future__ import annotations

from typing import Any, Dict, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .model import ModelKind
from .sampler import ChainConfig, PriorSpec
from .simulation import SimulationCondition


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    model_kind: ModelKind
    q_path: Optional[str] = None
    responses_path: Optional[str] = None
    simulation: Optional[SimulationCondition] = None
    prior: PriorSpec = Field(default_factory=PriorSpec)
    chain: ChainConfig = Field(default_factory=ChainConfig)
    out_dir: str
    seed: int
    mc_draws: Optional[int] = Field(default=None, ge=1)  # docstring: 信息准则蒙特卡洛次数
    workers: int = Field(default=1, ge=1)

    @field_validator("model_kind", mode="before")
    @classmethod
    def _parse_kind(cls, v: Any) -> ModelKind:
        return ModelKind.parse(v)

    @model_validator(mode="after")
    def _check_source(self) -> "RunConfig":
        has_paths = self.q_path is not None or self.responses_path is not None
        if has_paths and self.simulation is not None:
            raise ValueError("give either data paths (q, responses) or a simulation condition, not both")
        if not has_paths and self.simulation is None:
            raise ValueError("a data source is required: data paths (q, responses) or a simulation condition")
        if has_paths and (self.q_path is None or self.responses_path is None):
            raise ValueError("both the Q-matrix path and the responses path are required")
        if self.chain.seed != self.seed:
            object.__setattr__(self, "chain", self.chain.model_copy(update={"seed": self.seed}))
        return self

    @property
    def record(self) -> Dict[str, Any]:
        """JSON snapshot written into summary meta (no output directory: it does not affect results)."""
        return self.model_dump(mode="json", exclude={"out_dir", "workers"})
