# src/pm_cdm/pipelines/simulate/qmatrix.py

"""
[职责] 内置模拟 Q 矩阵：K=3/5 的完备（含 K×K 单位子阵）与不完备变体，各 20 题。
[边界] 仅返回常量矩阵；不做随机化。
"""

from __future__ import annotations

from typing import Dict, Tuple

import numpy as np

from pm_cdm.schemas.model import QMatrix
from pm_cdm.utils.errors import ParameterError

_Rows = Tuple[Tuple[int, ...], ...]

_PAIRS_3: _Rows = ((1, 1, 0), (1, 0, 1), (0, 1, 1))
_TAIL_3: _Rows = _PAIRS_3 * 2 + ((1, 1, 0), (1, 0, 1)) + ((1, 1, 1),) * 3

_Q3: _Rows = ((1, 0, 0), (0, 1, 0), (0, 0, 1)) * 3 + _TAIL_3
_Q3_INCOMPLETE: _Rows = ((0, 1, 1), (1, 0, 1), (1, 1, 0)) * 3 + _TAIL_3

_CHAIN_5: _Rows = (
    (1, 1, 0, 0, 0),
    (0, 1, 1, 0, 0),
    (0, 0, 1, 1, 0),
    (0, 0, 0, 1, 1),
    (1, 0, 0, 0, 1),
)
_TRIPLES_5: _Rows = (
    (1, 1, 1, 0, 0),
    (0, 1, 1, 1, 0),
    (0, 0, 1, 1, 1),
    (1, 0, 0, 1, 1),
    (1, 1, 0, 0, 1),
)
_IDENTITY_5: _Rows = tuple(tuple(int(i == k) for i in range(5)) for k in range(5))

_Q5: _Rows = _IDENTITY_5 * 2 + _CHAIN_5 + _TRIPLES_5
_Q5_INCOMPLETE: _Rows = _CHAIN_5 * 2 + _TRIPLES_5 * 2

_BUILTIN: Dict[Tuple[int, str], _Rows] = {
    (3, "complete"): _Q3,
    (3, "incomplete"): _Q3_INCOMPLETE,
    (5, "complete"): _Q5,
    (5, "incomplete"): _Q5_INCOMPLETE,
}


def builtin_q(n_attributes: int, variant: str = "complete") -> QMatrix:
    """Q3, Q3', Q5 or Q5' (20 items each)."""
    key = (int(n_attributes), str(variant).strip().lower())
    if key not in _BUILTIN:
        raise ParameterError(
            message=f"no built-in Q-matrix for K={n_attributes}, variant={variant!r}",
            detail={"K": int(n_attributes), "variant": str(variant), "supported_K": [3, 5]},
            error_code="QMATRIX__UNSUPPORTED",
        )
    return QMatrix(entries=np.asarray(_BUILTIN[key], dtype=np.int8))
