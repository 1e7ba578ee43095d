# src/pm_cdm/pipelines/simulate/generate.py

"""
[职责] 数据生成：模拟题目参数表、copula 掌握分数、二值化，以及 PM-CDM（三步生成）与 CDM 的作答生成。
[边界] 所有随机性来自显式 seed/Generator；条件级生成按 (seed, condition_id, replication) 派生独立子流，
       CDM 与 PM 两臂的 d 分别独立抽取。
[上游关系] services/simulate_service 与 grid 调用。
[下游关系] 返回 GeneratedDataset（作答 + 真值）。
"""

from __future__ import annotations

from typing import Optional

import numpy as np
from numpy.typing import ArrayLike

from pm_cdm.pipelines.model.copula import probit_inv, sample_gaussian_scores
from pm_cdm.schemas.model import (
    CopulaParams,
    DinaItemParams,
    ItemParamTable,
    MasteryScores,
    ModelKind,
    ProfileMatrix,
    QMatrix,
    ResponseMatrix,
    as_mastery,
    profile_index,
)
from pm_cdm.schemas.simulation import GeneratedDataset, SimulationCondition
from pm_cdm.utils.constants import MASTERY_CUTOFF, SIM_GUESS, SIM_HIGH, SIM_LOW, SIM_SLIP
from pm_cdm.utils.errors import DimensionError, ParameterError
from pm_cdm.utils.rng import make_rng

from .qmatrix import builtin_q

SeedLike = int | np.random.SeedSequence | np.random.Generator | None


def simulation_item_table(kind: ModelKind | str, q: QMatrix) -> ItemParamTable:
    """
    [职责] 模拟设计的真题目参数。
    [边界] DINA 类：g = s = 0.2；GDINA 类：按已掌握需求属性个数在 0.2..0.8 间等距（最多 3 个需求属性）。
    """
    kind = ModelKind.parse(kind)
    if kind.is_dina_family:
        return ItemParamTable.from_dina(q, DinaItemParams.constant(q.n_items, guess=SIM_GUESS, slip=SIM_SLIP))

    tables = []
    for j, s in enumerate(q.n_required):
        s = int(s)
        if s > 3:
            raise ParameterError(
                message=f"item {j + 1} requires {s} attributes; the additive design covers at most 3",
                detail={"item": j + 1, "n_required": s},
                error_code="SIMULATE__UNSUPPORTED_ITEM",
            )
        mastered = np.array([bin(a).count("1") for a in range(2**s)], dtype=np.float64)
        tables.append(SIM_LOW + (SIM_HIGH - SIM_LOW) * mastered / s)
    return ItemParamTable(q=q, tables=tuple(tables))


def draw_gaussian_and_mastery(copula: CopulaParams, n_subjects: int, seed: SeedLike):
    rng = make_rng(seed)
    tilde = sample_gaussian_scores(copula, n_subjects, rng)
    return tilde, probit_inv(tilde)


def draw_mastery_scores(copula: CopulaParams, n_subjects: int, seed: SeedLike) -> MasteryScores:
    """d_i = Φ(tilde_d_i), tilde_d_i ~ N(μ, Σ)."""
    return draw_gaussian_and_mastery(copula, n_subjects, seed)[1]


def binarize(d: ArrayLike) -> ProfileMatrix:
    """α = I(d ≥ 0.5); a tie at exactly 0.5 rounds to 1."""
    return (np.asarray(d, dtype=np.float64) >= MASTERY_CUTOFF).astype(np.int8)


def _check_table(table: ItemParamTable, q: Optional[QMatrix], n_attributes: int) -> QMatrix:
    if q is not None and not q.equals(table.q):
        raise DimensionError(message="Q-matrix does not match the item parameter table",
                             error_code="SIMULATE__Q_MISMATCH")
    if n_attributes != table.q.n_attributes:
        raise DimensionError(
            message=f"latent matrix has {n_attributes} attributes, the Q-matrix has {table.q.n_attributes}",
            detail={"got": int(n_attributes), "expected": table.q.n_attributes},
        )
    return table.q


def _dina_view(table: ItemParamTable) -> Optional[DinaItemParams]:
    """Recover (g, s) when every table is two-level; None otherwise."""
    guess, slip = [], []
    for t in table.tables:
        if t.size > 1 and not np.all(t[:-1] == t[0]):
            return None
        guess.append(t[0])
        slip.append(1.0 - t[-1])
    try:
        return DinaItemParams(guess=np.asarray(guess), slip=np.asarray(slip))
    except ParameterError:
        return None


def _infer_kind(table: ItemParamTable, *, partial: bool) -> ModelKind:
    base = ModelKind.DINA if _dina_view(table) is not None else ModelKind.GDINA
    return base.partial_counterpart if partial else base


def generate_responses_pmcdm(
    d: ArrayLike,
    table: ItemParamTable,
    q: Optional[QMatrix] = None,
    seed: SeedLike = None,
    *,
    kind: Optional[ModelKind] = None,
    copula: Optional[CopulaParams] = None,
    condition: Optional[SimulationCondition] = None,
    replication: int = 0,
) -> GeneratedDataset:
    """
    [职责] 三步生成：α*_ijk ~ Bernoulli(d_ik)（对 k 独立），R_ij ~ Bernoulli(θ_{j,α*_ij})。
    [边界] α* 为瞬态变量，不返回；true_alpha 记录 I(d ≥ 0.5)。
    """
    dd = as_mastery(np.atleast_2d(d))
    q = _check_table(table, q, dd.shape[1])
    rng = make_rng(seed)
    n = dd.shape[0]

    alpha_star = (rng.random((n, q.n_items, q.n_attributes)) < dd[:, None, :]).astype(np.int64)
    probs = np.empty((n, q.n_items))
    for j, req in enumerate(q.required_sets):
        probs[:, j] = table.tables[j][alpha_star[:, j, req] @ (1 << np.arange(req.size, dtype=np.int64))]
    responses = (rng.random((n, q.n_items)) < probs).astype(np.int8)

    kind = ModelKind.parse(kind) if kind is not None else _infer_kind(table, partial=True)
    return GeneratedDataset(
        model_kind=kind, q=q, responses=ResponseMatrix(entries=responses), true_table=table,
        true_alpha=binarize(dd), true_d=dd, true_dina=_dina_view(table) if kind.is_dina_family else None,
        copula=copula, condition=condition, replication=replication,
        seed=seed if isinstance(seed, int) else None,
    )


def generate_responses_cdm(
    alpha: ArrayLike,
    table: ItemParamTable,
    q: Optional[QMatrix] = None,
    seed: SeedLike = None,
    *,
    kind: Optional[ModelKind] = None,
    copula: Optional[CopulaParams] = None,
    condition: Optional[SimulationCondition] = None,
    replication: int = 0,
) -> GeneratedDataset:
    """R_ij ~ Bernoulli(θ_{j,α_i}) with fixed profiles."""
    a = np.atleast_2d(np.asarray(alpha))
    if not np.isin(a, (0, 1)).all():
        raise ParameterError(message="profiles must be binary", error_code="PROFILE__NON_BINARY")
    q = _check_table(table, q, a.shape[1])
    rng = make_rng(seed)
    probs = table.full_table[:, profile_index(a)].T
    responses = (rng.random(probs.shape) < probs).astype(np.int8)

    kind = ModelKind.parse(kind) if kind is not None else _infer_kind(table, partial=False)
    return GeneratedDataset(
        model_kind=kind, q=q, responses=ResponseMatrix(entries=responses), true_table=table,
        true_alpha=a.astype(np.int8), true_d=None,
        true_dina=_dina_view(table) if kind.is_dina_family else None,
        copula=copula, condition=condition, replication=replication,
        seed=seed if isinstance(seed, int) else None,
    )


def generate_dataset(
    condition: SimulationCondition, replication: int = 0, *, seed: Optional[int] = None
) -> GeneratedDataset:
    """
    [职责] 按条件生成一次重复：内置 Q → 模拟参数表 → copula 抽 d →（CDM 臂二值化）→ 作答。
    [边界] 子流由 (seed 或 condition.seed, condition_id, replication) 决定，与运行顺序无关。
    """
    base = condition.seed if seed is None else int(seed)
    q = builtin_q(condition.n_attributes, condition.q_variant)
    table = simulation_item_table(condition.model_kind, q)
    copula = condition.copula()

    d = draw_mastery_scores(copula, condition.n_subjects, make_rng(base, condition.condition_id, replication, "d"))
    response_rng = make_rng(base, condition.condition_id, replication, "responses")
    common = dict(kind=condition.model_kind, copula=copula, condition=condition, replication=replication)
    if condition.model_kind.is_partial_mastery:
        return generate_responses_pmcdm(d, table, q, response_rng, **common)
    return generate_responses_cdm(binarize(d), table, q, response_rng, **common)
