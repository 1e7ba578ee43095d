# src/pm_cdm/schemas/model.py

"""
[职责] 模型契约层：Q 矩阵、作答矩阵、题目参数表（约化类索引）、DINA 参数、高斯 copula 参数、类别比例与模型种类。
[边界] 只做构造期校验与索引换算；不做抽样、似然或 I/O。所有对象构造后只读。
[上游关系] formats 读取文件后构造；simulate 生成真值；sampler 汇总后构造后验均值表。
[下游关系] pipelines/model 的响应函数与似然、sampler 的条件分布、diagnostics 的指标计算均消费这些类型。
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Sequence, Tuple

import numpy as np
from numpy.typing import ArrayLike, NDArray

from pm_cdm.utils.constants import PROPORTION_SUM_TOL
from pm_cdm.utils.errors import DataValidationError, DimensionError, ParameterError


AttributeProfile = NDArray[np.int8]  # docstring: 长度 K 的 0/1 掌握模式 α
MasteryScore = NDArray[np.float64]  # docstring: 长度 K 的部分掌握分数 d ∈ [0,1]^K
GaussianScore = NDArray[np.float64]  # docstring: d 的高斯尺度变换 Φ^{-1}(d)
MasteryScores = NDArray[np.float64]  # docstring: N×K 掌握分数矩阵
ProfileMatrix = NDArray[np.int8]  # docstring: N×K 掌握模式矩阵


class ModelKind(str, Enum):
    """四种模型：二值掌握 DINA/GDINA 与部分掌握 PM-DINA/PM-GDINA。"""

    DINA = "DINA"
    GDINA = "GDINA"
    PM_DINA = "PM-DINA"
    PM_GDINA = "PM-GDINA"

    @property
    def is_partial_mastery(self) -> bool:
        return self in (ModelKind.PM_DINA, ModelKind.PM_GDINA)

    @property
    def is_dina_family(self) -> bool:
        return self in (ModelKind.DINA, ModelKind.PM_DINA)

    @property
    def binary_counterpart(self) -> "ModelKind":
        return ModelKind.DINA if self.is_dina_family else ModelKind.GDINA

    @property
    def partial_counterpart(self) -> "ModelKind":
        return ModelKind.PM_DINA if self.is_dina_family else ModelKind.PM_GDINA

    @classmethod
    def parse(cls, value: "str | ModelKind") -> "ModelKind":
        """Accept `PM-DINA`, `pm_dina`, `pmdina` and friends."""
        if isinstance(value, ModelKind):
            return value
        key = str(value or "").strip().upper().replace("_", "").replace("-", "")
        for kind in cls:
            if kind.value.replace("-", "") == key:
                return kind
        raise DataValidationError(
            message=f"unknown model kind: {value!r}",
            detail={"value": str(value), "allowed": [k.value for k in cls]},
            error_code="MODEL__UNKNOWN_KIND",
        )


# -----------------------------
# profile helpers
# -----------------------------


def profile_bits(n_bits: int) -> NDArray[np.int8]:
    """
    [职责] 枚举 2^n 个 0/1 向量，第 ℓ 行满足 ℓ = Σ_m bit_m·2^m（第 0 位为第一个属性）。
    [边界] 该排序即约化类索引约定：两属性题目的顺序为 00, 10, 01, 11。
    """
    idx = np.arange(2**n_bits, dtype=np.int64)
    return ((idx[:, None] >> np.arange(n_bits, dtype=np.int64)[None, :]) & 1).astype(np.int8)


def profile_index(alpha: ArrayLike) -> NDArray[np.int64] | int:
    """Inverse of `profile_bits` for one profile or a stack of profiles (last axis = attributes)."""
    arr = np.asarray(alpha, dtype=np.int64)
    weights = 1 << np.arange(arr.shape[-1], dtype=np.int64)
    out = arr @ weights
    return int(out) if np.ndim(out) == 0 else out


def as_profile(alpha: ArrayLike, *, n_attributes: int | None = None) -> AttributeProfile:
    arr = np.asarray(alpha)
    if arr.ndim != 1:
        raise DimensionError(message="attribute profile must be a 1-D vector", detail={"shape": list(arr.shape)})
    if n_attributes is not None and arr.shape[0] != n_attributes:
        raise DimensionError(
            message=f"attribute profile has length {arr.shape[0]}, expected {n_attributes}",
            detail={"got": int(arr.shape[0]), "expected": int(n_attributes)},
        )
    if not np.isin(arr, (0, 1)).all():
        raise DataValidationError(message="attribute profile entries must be 0 or 1", error_code="PROFILE__NON_BINARY")
    return arr.astype(np.int8)


def as_mastery(d: ArrayLike, *, n_attributes: int | None = None) -> MasteryScore:
    arr = np.asarray(d, dtype=np.float64)
    if n_attributes is not None and arr.shape[-1] != n_attributes:
        raise DimensionError(
            message=f"mastery score has {arr.shape[-1]} attributes, expected {n_attributes}",
            detail={"got": int(arr.shape[-1]), "expected": int(n_attributes)},
        )
    if not np.all((arr >= 0.0) & (arr <= 1.0)):
        raise ParameterError(message="mastery scores must lie in [0, 1]", error_code="MASTERY__OUT_OF_RANGE")
    return arr


# -----------------------------
# Q-matrix / responses
# -----------------------------


def _binary_matrix(values: ArrayLike, *, what: str) -> NDArray[np.int8]:
    arr = np.asarray(values)
    if arr.ndim != 2:
        raise DimensionError(message=f"{what} must be a 2-D matrix", detail={"shape": list(arr.shape)})
    bad = np.argwhere(~np.isin(arr, (0, 1)))
    if bad.size:
        r, c = (int(x) for x in bad[0])
        raise DataValidationError(
            message=f"{what} cell (row {r + 1}, col {c + 1}) is not binary: {arr[r, c]!r}",
            detail={"row": r + 1, "col": c + 1, "value": str(arr[r, c])},
            error_code=f"{what.upper().replace('-', '')}__NON_BINARY",
        )
    out = arr.astype(np.int8)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class QMatrix:
    """
    [职责] J×K 题目-属性需求矩阵；提供每题需求集合 S_j 与约化类索引换算。
    [边界] 每个元素 ∈ {0,1}；每行至少一个 1。
    """

    entries: NDArray[np.int8]

    def __post_init__(self) -> None:
        arr = _binary_matrix(self.entries, what="QMATRIX")
        if arr.shape[0] == 0 or arr.shape[1] == 0:
            raise DataValidationError(message="Q-matrix is empty", error_code="QMATRIX__EMPTY")
        zero_rows = np.flatnonzero(arr.sum(axis=1) == 0)
        if zero_rows.size:
            raise DataValidationError(
                message=f"Q-matrix row {int(zero_rows[0]) + 1} requires no attribute",
                detail={"row": int(zero_rows[0]) + 1},
                error_code="QMATRIX__ZERO_ROW",
            )
        object.__setattr__(self, "entries", arr)

    @property
    def n_items(self) -> int:
        return int(self.entries.shape[0])

    @property
    def n_attributes(self) -> int:
        return int(self.entries.shape[1])

    def row(self, j: int) -> NDArray[np.int8]:
        self._check_item(j)
        return self.entries[j]

    @cached_property
    def required_sets(self) -> Tuple[NDArray[np.int64], ...]:
        return tuple(np.flatnonzero(self.entries[j]).astype(np.int64) for j in range(self.n_items))

    @cached_property
    def n_required(self) -> NDArray[np.int64]:
        return self.entries.sum(axis=1).astype(np.int64)

    @cached_property
    def reduce_index(self) -> NDArray[np.int64]:
        """(J, 2^K) map from full profile index to the item's reduced-class index."""
        profiles = profile_bits(self.n_attributes).astype(np.int64)
        out = np.zeros((self.n_items, profiles.shape[0]), dtype=np.int64)
        for j, req in enumerate(self.required_sets):
            out[j] = profiles[:, req] @ (1 << np.arange(req.size, dtype=np.int64))
        out.setflags(write=False)
        return out

    def reduce(self, j: int, alpha: ArrayLike) -> int:
        """Reduced-class index of `alpha` restricted to S_j."""
        self._check_item(j)
        a = as_profile(alpha, n_attributes=self.n_attributes)
        req = self.required_sets[j]
        return int(a[req].astype(np.int64) @ (1 << np.arange(req.size, dtype=np.int64)))

    def equals(self, other: "QMatrix") -> bool:
        return self.entries.shape == other.entries.shape and bool(np.array_equal(self.entries, other.entries))

    def _check_item(self, j: int) -> None:
        if not 0 <= int(j) < self.n_items:
            raise DimensionError(
                message=f"item index {j} out of range [0, {self.n_items})",
                detail={"item": int(j), "n_items": self.n_items},
                error_code="ITEM__OUT_OF_RANGE",
            )


@dataclass(frozen=True, eq=False)
class ResponseMatrix:
    """N×J 二值作答矩阵。"""

    entries: NDArray[np.int8]

    def __post_init__(self) -> None:
        arr = _binary_matrix(self.entries, what="RESPONSES")
        object.__setattr__(self, "entries", arr)

    @property
    def n_subjects(self) -> int:
        return int(self.entries.shape[0])

    @property
    def n_items(self) -> int:
        return int(self.entries.shape[1])

    def check_against(self, q: QMatrix) -> None:
        """Column count must match the Q-matrix item count (checked at fit time)."""
        if self.n_items != q.n_items:
            raise DimensionError(
                message=f"responses have {self.n_items} columns but the Q-matrix has {q.n_items} items",
                detail={"responses_items": self.n_items, "q_items": q.n_items},
                error_code="RESPONSES__ITEM_COUNT_MISMATCH",
            )


# -----------------------------
# item parameters
# -----------------------------


@dataclass(frozen=True, eq=False)
class DinaItemParams:
    """
    [职责] DINA 题目参数：猜测 g_j 与失误 s_j。
    [边界] g_j, s_j ∈ (0,1) 且 1 − s_j > g_j。
    """

    guess: NDArray[np.float64]
    slip: NDArray[np.float64]

    def __post_init__(self) -> None:
        g = np.asarray(self.guess, dtype=np.float64).reshape(-1)
        s = np.asarray(self.slip, dtype=np.float64).reshape(-1)
        if g.shape != s.shape:
            raise DimensionError(message="guess and slip must have equal length",
                                 detail={"guess": int(g.size), "slip": int(s.size)})
        for name, arr in (("guess", g), ("slip", s)):
            if not np.all((arr > 0.0) & (arr < 1.0)):
                raise ParameterError(message=f"{name} parameters must lie in (0, 1)", error_code="DINA__OUT_OF_RANGE")
        bad = np.flatnonzero(1.0 - s <= g)
        if bad.size:
            j = int(bad[0])
            raise ParameterError(
                message=f"item {j + 1} violates 1 - slip > guess ({1.0 - s[j]:.4f} <= {g[j]:.4f})",
                detail={"item": j + 1, "guess": float(g[j]), "slip": float(s[j])},
                error_code="DINA__NOT_MONOTONE",
            )
        g.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "guess", g)
        object.__setattr__(self, "slip", s)

    @property
    def n_items(self) -> int:
        return int(self.guess.size)

    @classmethod
    def constant(cls, n_items: int, *, guess: float, slip: float) -> "DinaItemParams":
        return cls(guess=np.full(n_items, guess), slip=np.full(n_items, slip))


@dataclass(frozen=True, eq=False)
class ItemParamTable:
    """
    [职责] 饱和约化表：第 j 题 2^{|S_j|} 个正确作答概率 θ，按约化类索引（见 profile_bits）存放。
    [边界] 所有概率 ∈ (0,1)；仅由 S_j 上的属性决定（非需求属性不改变 θ）。
    [上游关系] simulate 构造真值；sampler 汇总后验均值；formats 反序列化。
    [下游关系] θ 查表、边际作答概率、似然与 MAE/RMSE。
    """

    q: QMatrix
    tables: Tuple[NDArray[np.float64], ...]

    def __post_init__(self) -> None:
        tables = tuple(np.asarray(t, dtype=np.float64).reshape(-1) for t in self.tables)
        if len(tables) != self.q.n_items:
            raise DimensionError(
                message=f"expected {self.q.n_items} item tables, got {len(tables)}",
                detail={"expected": self.q.n_items, "got": len(tables)},
            )
        for j, (t, s) in enumerate(zip(tables, self.q.n_required)):
            if t.size != 2 ** int(s):
                raise DimensionError(
                    message=f"item {j + 1} table has {t.size} cells, expected 2^{int(s)}",
                    detail={"item": j + 1, "got": int(t.size), "expected": int(2 ** int(s))},
                )
            if not np.all((t > 0.0) & (t < 1.0)):
                raise ParameterError(
                    message=f"item {j + 1} has probabilities outside (0, 1)",
                    detail={"item": j + 1},
                    error_code="THETA__OUT_OF_RANGE",
                )
            t.setflags(write=False)
        object.__setattr__(self, "tables", tables)

    @property
    def n_items(self) -> int:
        return self.q.n_items

    def theta(self, j: int, reduced_index: int) -> float:
        self.q._check_item(j)
        return float(self.tables[j][int(reduced_index)])

    def flat(self) -> NDArray[np.float64]:
        return np.concatenate(self.tables)

    @cached_property
    def offsets(self) -> NDArray[np.int64]:
        sizes = np.array([t.size for t in self.tables], dtype=np.int64)
        return np.concatenate([[0], np.cumsum(sizes)])

    @cached_property
    def full_table(self) -> NDArray[np.float64]:
        """(J, 2^K) θ for every full profile, via the reduced-class map."""
        out = np.stack([self.tables[j][self.q.reduce_index[j]] for j in range(self.n_items)])
        out.setflags(write=False)
        return out

    @classmethod
    def from_flat(cls, q: QMatrix, values: ArrayLike) -> "ItemParamTable":
        flat = np.asarray(values, dtype=np.float64).reshape(-1)
        sizes = [2 ** int(s) for s in q.n_required]
        if flat.size != sum(sizes):
            raise DimensionError(message="flat θ vector has the wrong length",
                                 detail={"got": int(flat.size), "expected": int(sum(sizes))})
        return cls(q=q, tables=tuple(np.split(flat, np.cumsum(sizes)[:-1])))

    @classmethod
    def from_dina(cls, q: QMatrix, params: DinaItemParams) -> "ItemParamTable":
        """Two-level tables: g_j for every reduced class except the full one, 1 − s_j there."""
        if params.n_items != q.n_items:
            raise DimensionError(message="DINA parameter count does not match the Q-matrix",
                                 detail={"params": params.n_items, "q_items": q.n_items})
        return cls(q=q, tables=tuple(dina_table(int(s), params.guess[j], params.slip[j])
                                     for j, s in enumerate(q.n_required)))

    @classmethod
    def constant(cls, q: QMatrix, value: float) -> "ItemParamTable":
        return cls(q=q, tables=tuple(np.full(2 ** int(s), float(value)) for s in q.n_required))


def dina_table(n_required: int, guess: float, slip: float) -> NDArray[np.float64]:
    out = np.full(2**n_required, float(guess))
    out[-1] = 1.0 - float(slip)  # docstring: 全掌握约化类（索引 2^s − 1）
    return out


# -----------------------------
# population parameters
# -----------------------------


@dataclass(frozen=True, eq=False)
class CopulaParams:
    """
    [职责] 高斯 copula 总体参数：Φ^{-1}(d) ~ N(μ, Σ)。
    [边界] Σ 对称正定（Cholesky 成功）；μ 长度与 Σ 阶数一致。
    """

    mu: NDArray[np.float64]
    sigma: NDArray[np.float64]
    chol: NDArray[np.float64] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        mu = np.asarray(self.mu, dtype=np.float64).reshape(-1)
        sigma = np.atleast_2d(np.asarray(self.sigma, dtype=np.float64))
        if sigma.shape != (mu.size, mu.size):
            raise DimensionError(message="sigma must be K×K with K = len(mu)",
                                 detail={"mu": int(mu.size), "sigma": list(sigma.shape)})
        scale = max(1.0, float(np.max(np.abs(sigma))))
        if not np.allclose(sigma, sigma.T, rtol=0.0, atol=1e-10 * scale):
            raise ParameterError(message="sigma must be symmetric", error_code="COPULA__NOT_SYMMETRIC")
        try:
            chol = np.linalg.cholesky(sigma)
        except np.linalg.LinAlgError as exc:
            raise ParameterError(message="sigma is not positive definite", error_code="COPULA__NOT_PD",
                                 cause=exc) from exc
        for arr in (mu, sigma, chol):
            arr.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "chol", chol)

    @property
    def n_attributes(self) -> int:
        return int(self.mu.size)

    @classmethod
    def exchangeable(cls, mu: Sequence[float], *, rho: float, sigma2: float = 1.0) -> "CopulaParams":
        """Σ = σ²{ρ·11ᵀ + (1 − ρ)I}."""
        k = len(mu)
        sigma = sigma2 * (rho * np.ones((k, k)) + (1.0 - rho) * np.eye(k))
        return cls(mu=np.asarray(mu, dtype=np.float64), sigma=sigma)


@dataclass(frozen=True, eq=False)
class ClassProportions:
    """CDM 总体类别比例 p（长度 2^K，按 profile_bits 顺序）。"""

    p: NDArray[np.float64]

    def __post_init__(self) -> None:
        p = np.asarray(self.p, dtype=np.float64).reshape(-1)
        k = int(round(np.log2(p.size))) if p.size else -1
        if k < 0 or 2**k != p.size:
            raise DimensionError(message="class proportions must have length 2^K", detail={"length": int(p.size)})
        if not np.all((p > 0.0) & (p < 1.0)) and p.size > 1:
            raise ParameterError(message="class proportions must lie in (0, 1)", error_code="PROPORTIONS__OUT_OF_RANGE")
        if abs(float(p.sum()) - 1.0) > PROPORTION_SUM_TOL:
            raise ParameterError(message=f"class proportions sum to {float(p.sum())!r}, not 1",
                                 error_code="PROPORTIONS__NOT_NORMALIZED")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @property
    def n_attributes(self) -> int:
        return int(round(np.log2(self.p.size)))

    @classmethod
    def uniform(cls, n_attributes: int) -> "ClassProportions":
        return cls(p=np.full(2**n_attributes, 1.0 / 2**n_attributes))

