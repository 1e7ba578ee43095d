# src/pm_cdm/pipelines/model/response.py

"""
[职责] 题目响应函数：DINA 理想响应与 θ、约化表查表、GDINA 效应 ↔ 约化表互换、单调性检查。
[边界] 纯函数；不做抽样与 I/O；不在抽样中强制 GDINA 单调性（只报告）。
[上游关系] simulate 构造真值表；diagnostics 汇报拟合表的单调性。
[下游关系] copula/likelihood 通过 ItemParamTable 消费约化表。
"""

from __future__ import annotations

from itertools import combinations
from typing import Iterable, List, Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray

from pm_cdm.schemas.model import ItemParamTable, as_profile, profile_bits
from pm_cdm.schemas.reports import MonotonicityReport, MonotonicityViolation
from pm_cdm.utils.errors import DimensionError, ParameterError


def ideal_response_dina(alpha: ArrayLike, q_row: ArrayLike) -> int:
    """ξ = I(α ⪰ q): 1 iff every required attribute is mastered."""
    q = as_profile(q_row)
    a = as_profile(alpha)
    if a.shape != q.shape:
        raise DimensionError(
            message=f"profile length {a.size} does not match q-row length {q.size}",
            detail={"alpha": int(a.size), "q_row": int(q.size)},
        )
    return int(np.all(a >= q))


def theta_dina(guess: float, slip: float, xi: int) -> float:
    """(1 − s)^ξ · g^{1−ξ}. Closed bounds are accepted here (s = g = 0 is a deterministic responder)."""
    g, s = float(guess), float(slip)
    if not (0.0 <= g <= 1.0 and 0.0 <= s <= 1.0):
        raise ParameterError(message="guess/slip must lie in [0, 1]", detail={"guess": g, "slip": s})
    if xi not in (0, 1):
        raise ParameterError(message="ideal response must be 0 or 1", detail={"xi": str(xi)})
    return (1.0 - s) if xi == 1 else g


def theta_lookup(table: ItemParamTable, j: int, alpha: ArrayLike) -> float:
    """θ_{j,α}: restrict α to S_j and index the reduced table."""
    return table.theta(j, table.q.reduce(j, alpha))


# -----------------------------
# GDINA effects <-> reduced table
# -----------------------------


def _n_required(q_row: ArrayLike) -> int:
    q = as_profile(q_row)
    s = int(q.sum())
    if s == 0:
        raise DimensionError(message="q-row requires no attribute", error_code="QMATRIX__ZERO_ROW")
    return s


def _subset_sum(values: NDArray[np.float64], n_bits: int, *, sign: float) -> NDArray[np.float64]:
    out = values.copy()
    for m in range(n_bits):
        bit = 1 << m
        for a in range(out.size):
            if a & bit:
                out[a] += sign * out[a ^ bit]
    return out


def gdina_effects_to_table(beta: ArrayLike, q_row: ArrayLike) -> NDArray[np.float64]:
    """
    [职责] 由 GDINA 效应（截距、主效应、各阶交互）得到约化表：θ(a) = Σ_{b ⊆ a} β_b。
    [边界] β 的第 b 个元素对应属性子集 b（与约化类同一位序：β_0 截距，β_1/β_2 主效应，β_3 二阶交互……）。
    """
    s = _n_required(q_row)
    b = np.asarray(beta, dtype=np.float64).reshape(-1)
    if b.size != 2**s:
        raise DimensionError(
            message=f"expected {2**s} effects for an item requiring {s} attributes, got {b.size}",
            detail={"expected": 2**s, "got": int(b.size)},
        )
    table = _subset_sum(b, s, sign=1.0)
    bad = np.flatnonzero((table <= 0.0) | (table >= 1.0))
    if bad.size:
        raise ParameterError(
            message=f"effects give a probability outside (0, 1) at reduced class {int(bad[0])}",
            detail={"reduced_class": int(bad[0]), "value": float(table[bad[0]])},
            error_code="GDINA__OUT_OF_RANGE",
        )
    return table


def table_to_gdina_effects(table_values: ArrayLike) -> NDArray[np.float64]:
    """Möbius inverse of `gdina_effects_to_table` (inclusion-exclusion over subsets)."""
    t = np.asarray(table_values, dtype=np.float64).reshape(-1)
    s = int(round(np.log2(t.size)))
    if 2**s != t.size:
        raise DimensionError(message="reduced table length must be a power of two", detail={"length": int(t.size)})
    return _subset_sum(t, s, sign=-1.0)


# -----------------------------
# monotonicity
# -----------------------------


def item_monotonicity_violations(item: int, values: ArrayLike) -> List[MonotonicityViolation]:
    """
    [职责] 单题约化表的单调性违例。
    [边界] mastery：全掌握类 θ 须不小于其他任一类；coordinatewise：a ⊋ b 时 θ_a ≥ θ_b。
    """
    t = np.asarray(values, dtype=np.float64).reshape(-1)
    s = int(round(np.log2(t.size)))
    bits = profile_bits(s).astype(int)
    full = t.size - 1
    out: List[MonotonicityViolation] = []

    for a in range(full):
        if t[full] < t[a]:
            out.append(
                MonotonicityViolation(
                    item=item, form="mastery",
                    higher_class=bits[full].tolist(), lower_class=bits[a].tolist(),
                    theta_higher=float(t[full]), theta_lower=float(t[a]),
                )
            )
    for hi, lo in combinations(range(t.size), 2):
        if hi < lo:
            hi, lo = lo, hi
        if (hi & lo) != lo:
            continue  # not a superset pair
        if t[hi] < t[lo]:
            out.append(
                MonotonicityViolation(
                    item=item, form="coordinatewise",
                    higher_class=bits[hi].tolist(), lower_class=bits[lo].tolist(),
                    theta_higher=float(t[hi]), theta_lower=float(t[lo]),
                )
            )
    return out


def monotonicity_check(table: ItemParamTable, items: Optional[Iterable[int]] = None) -> MonotonicityReport:
    """Check every (or the selected) item of a fitted or true table; GDINA fits may legitimately violate."""
    idx = list(range(table.n_items)) if items is None else [int(j) for j in items]
    violations: List[MonotonicityViolation] = []
    for j in idx:
        table.q._check_item(j)
        violations.extend(item_monotonicity_violations(j, table.tables[j]))
    return MonotonicityReport(items_checked=len(idx), violations=violations)
