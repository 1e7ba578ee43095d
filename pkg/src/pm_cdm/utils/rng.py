# src/pm_cdm/utils/rng.py

"""
[职责] 随机数流管理：由主种子派生 (condition, replication, chain, arm) 独立子流，保证单元格重跑与顺序无关。
[边界] 仅封装 numpy SeedSequence/Generator；不持有全局状态。
[上游关系] simulate/sampler/services 需要随机性时调用。
[下游关系] 确定性合同：相同 seed + 相同 key → 逐位相同的抽样。
"""

from __future__ import annotations

import zlib
from typing import Sequence

import numpy as np


def _key_int(part: int | str) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))  # docstring: 字符串 key 稳定映射为整数
    return int(part)


def derive_seed_sequence(seed: int, *key: int | str) -> np.random.SeedSequence:
    """Derive a child SeedSequence addressed by `key` (order-independent across callers)."""
    return np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(_key_int(k) for k in key))


def make_rng(seed: int | np.random.SeedSequence | np.random.Generator | None, *key: int | str) -> np.random.Generator:
    """
    [职责] 统一构造 numpy Generator（PCG64）。
    [边界] 传入 Generator 时原样返回（key 被忽略）；None 表示非确定性。
    """
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        ss = seed if not key else np.random.SeedSequence(seed.entropy, spawn_key=tuple(seed.spawn_key) + tuple(_key_int(k) for k in key))
        return np.random.default_rng(ss)
    if seed is None:
        return np.random.default_rng()
    return np.random.default_rng(derive_seed_sequence(int(seed), *key))


def spawn_seeds(seed: int, n: int, *key: int | str) -> Sequence[int]:
    """Return `n` plain integer seeds derived from `seed` and `key` (JSON-friendly)."""
    ss = derive_seed_sequence(seed, *key)
    return [int(s.generate_state(1, dtype=np.uint32)[0]) for s in ss.spawn(n)]
