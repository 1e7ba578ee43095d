# src/pm_cdm/pipelines/base/context.py

"""
[职责] RunContext：一次运行（fit/simulate/grid 单元/单条链）的上下文，聚合 run_id、主种子、计时与日志追踪字段。
[边界] 不持有数据或模型状态；不做编排；仅做"聚合与透传"。
[上游关系] services 在入口处创建 RunContext；多链/多单元通过 child(...) 派生。
[下游关系] pipelines 从 ctx.timing 计时（多链耗时经 TimingCollector.merge 汇入），日志通过 ctx.log_fields() 读取追踪字段；
           随机流不经 ctx，由 utils.rng 按 (seed, key) 派生。
"""

from __future__ import annotations

import uuid
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Optional

from pm_cdm.utils.logging_ import TRACE_FIELD_KEYS

from .timing import TimingCollector


def new_run_id() -> str:
    return str(uuid.uuid4())


@dataclass
class RunContext:
    """
    [职责] 单次执行的共享元数据：追踪字段 + 主种子 + 计时器。
    [边界] 可变对象，只在单进程单链内使用；跨链请用 child(...) 派生新实例。
    """

    seed: int
    run_id: str = field(default_factory=new_run_id)
    model_kind: Optional[str] = None
    condition_id: Optional[str] = None
    replication: Optional[int] = None
    chain_id: Optional[int] = None
    iteration: Optional[int] = None
    show_progress: bool = False
    timing: TimingCollector = field(default_factory=TimingCollector)

    def child(self, **overrides: Any) -> "RunContext":
        """Derive a context sharing run_id/seed with a fresh timer (one per chain or grid cell)."""
        overrides.setdefault("timing", TimingCollector())
        return replace(self, **overrides)

    def log_fields(self) -> Dict[str, Any]:
        return {k: getattr(self, k) for k in TRACE_FIELD_KEYS if getattr(self, k) is not None}
