# src/pm_cdm/pipelines/base/timing.py

"""
[职责] 阶段计时（ms）收集：Gibbs 各步骤、grid 单元、I/O 阶段的累计耗时。
[边界] 不做 profiler；不负责日志落地；仅导出可序列化 dict。
[上游关系] sampler 的迭代循环与 services 用 stage(...) 包裹各阶段。
[下游关系] 拟合结束日志（timing_ms 字段）与 CLI --json 输出。
"""

from __future__ import annotations

import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Dict, Iterator

TIMING_TOTAL_MS_KEY = "total"


def _now_ms() -> float:
    return time.perf_counter() * 1000.0


@dataclass
class TimingCollector:
    """
    [职责] 统一收集阶段耗时并导出 dict[str, float]（ms）。
    [边界] 同名 stage 可累加或覆盖，由调用方选择；非线程安全（每条链一个实例）。
    """

    _stages_ms: Dict[str, float] = field(default_factory=dict)
    _start_ms: float = field(default_factory=_now_ms)

    def add_ms(self, key: str, ms: float, *, accumulate: bool = True) -> None:
        """Record a stage duration; negative values are clamped to 0."""
        k = str(key).strip()
        if not k:
            return
        v = max(0.0, float(ms))
        if accumulate:
            self._stages_ms[k] = self._stages_ms.get(k, 0.0) + v
        else:
            self._stages_ms[k] = v

    @contextmanager
    def stage(self, key: str, *, accumulate: bool = False) -> Iterator[None]:
        """
        [职责] 上下文管理器形式的阶段计时，退出时写入耗时。
        [边界] 默认覆盖；Gibbs 步骤在循环内调用时需 accumulate=True。
        """
        start = _now_ms()
        try:
            yield
        finally:
            self.add_ms(key, _now_ms() - start, accumulate=accumulate)

    def total_ms(self) -> float:
        return _now_ms() - self._start_ms

    def to_dict(self, *, include_total: bool = True, total_key: str = TIMING_TOTAL_MS_KEY) -> Dict[str, float]:
        out = {k: round(v, 3) for k, v in self._stages_ms.items()}
        if include_total:
            out[total_key] = round(float(self.total_ms()), 3)
        return out

    def merge(self, other: "TimingCollector", *, prefix: str = "") -> None:
        """Accumulate another collector's stages (e.g. per-chain timings into a run total)."""
        for k, v in other._stages_ms.items():
            self.add_ms(f"{prefix}{k}", v, accumulate=True)
