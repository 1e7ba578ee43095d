# playground/model_gate/test_model_gate.py

"""
[职责] Model gate：锁死模型核心数学（约化类索引、DINA/GDINA 响应、混合权重、copula 积分与似然）。
[边界] 纯数值断言；不跑采样器，不做 I/O。
[上游关系] schemas/model、pipelines/model/{response,copula,likelihood}。
[下游关系] sampler 与 diagnostics 的正确性依赖这里的约定（尤其位序 00,10,01,11）。
"""

from __future__ import annotations

import numpy as np
import pytest

from pm_cdm.pipelines.model.copula import (
    copula_nodes,
    marginal_item_prob,
    mixture_weight,
    probit,
    probit_inv,
    reduced_class_weights,
    rlcm_class_weight,
)
from pm_cdm.pipelines.model.likelihood import (
    cdm_loglik,
    cdm_subject_loglik,
    pmcdm_loglik,
    pmcdm_loglik_from_scores,
    pmcdm_subject_loglik,
)
from pm_cdm.pipelines.model.response import (
    gdina_effects_to_table,
    ideal_response_dina,
    item_monotonicity_violations,
    monotonicity_check,
    table_to_gdina_effects,
    theta_dina,
    theta_lookup,
)
from pm_cdm.schemas.model import (
    ClassProportions,
    CopulaParams,
    DinaItemParams,
    ItemParamTable,
    ModelKind,
    QMatrix,
    profile_bits,
    profile_index,
)
from pm_cdm.utils.errors import DataValidationError, DimensionError, ParameterError, SizeError


pytestmark = pytest.mark.model_gate


# -----------------------------
# schemas/model.py
# -----------------------------


def test_profile_bits_order_is_first_attribute_lowest() -> None:
    """Reduced-class order for two attributes is 00, 10, 01, 11."""  # docstring: 位序约定
    assert profile_bits(2).tolist() == [[0, 0], [1, 0], [0, 1], [1, 1]]
    assert profile_index(np.array([0, 1])) == 2
    assert profile_index(profile_bits(3)).tolist() == list(range(8))


def test_qmatrix_rejects_zero_row_and_non_binary() -> None:
    """A row requiring nothing and a cell value of 2 are both rejected."""  # docstring: Q 合法性
    with pytest.raises(DataValidationError) as ei:
        QMatrix(entries=np.array([[1, 0], [0, 0]]))
    assert ei.value.error_code == "QMATRIX__ZERO_ROW"
    assert ei.value.detail["row"] == 2

    with pytest.raises(DataValidationError) as ei:
        QMatrix(entries=np.array([[1, 2]]))
    assert "row 1, col 2" in ei.value.message


def test_qmatrix_reduce_index_ignores_unrequired_attributes(q_two: QMatrix) -> None:
    """Item 1 requires A1 only: profiles differing in A2 share a reduced class."""  # docstring: 约化类映射
    assert q_two.reduce(0, [1, 0]) == q_two.reduce(0, [1, 1]) == 1
    assert q_two.reduce(2, [0, 1]) == 2
    assert q_two.reduce_index.shape == (4, 4)
    assert q_two.reduce_index[3].tolist() == [0, 1, 2, 3]


def test_model_kind_parse_accepts_aliases() -> None:
    """ModelKind.parse accepts case and separator variants."""  # docstring: CLI 友好
    assert ModelKind.parse("pm_gdina") is ModelKind.PM_GDINA
    assert ModelKind.parse("PMDINA") is ModelKind.PM_DINA
    assert ModelKind.PM_GDINA.binary_counterpart is ModelKind.GDINA
    with pytest.raises(DataValidationError):
        ModelKind.parse("rasch")


def test_dina_params_require_monotone_items() -> None:
    """1 - s must exceed g."""  # docstring: DINA 单调约束
    with pytest.raises(ParameterError) as ei:
        DinaItemParams(guess=np.array([0.6]), slip=np.array([0.5]))
    assert ei.value.error_code == "DINA__NOT_MONOTONE"


def test_item_table_rejects_wrong_cell_count(q_two: QMatrix) -> None:
    """Each item needs exactly 2^{|S_j|} cells."""  # docstring: 约化表形状
    with pytest.raises(DimensionError):
        ItemParamTable(q=q_two, tables=(np.full(2, 0.5), np.full(2, 0.5), np.full(4, 0.5), np.full(2, 0.5)))


def test_class_proportions_must_sum_to_one() -> None:
    """Proportions off by more than the tolerance are rejected."""  # docstring: 单纯形约束
    with pytest.raises(ParameterError):
        ClassProportions(p=np.array([0.3, 0.3, 0.3, 0.3]))
    assert ClassProportions.uniform(2).p.tolist() == [0.25] * 4


# -----------------------------
# response.py
# -----------------------------


def test_dina_ideal_response_and_theta() -> None:
    """ξ = 1 iff every required attribute is mastered."""  # docstring: DINA 理想响应
    assert ideal_response_dina([1, 1, 0], [1, 1, 0]) == 1
    assert ideal_response_dina([1, 0, 1], [1, 1, 0]) == 0
    assert ideal_response_dina([1, 1, 1], [0, 0, 1]) == 1
    assert theta_dina(0.2, 0.1, 1) == pytest.approx(0.9)
    assert theta_dina(0.2, 0.1, 0) == pytest.approx(0.2)
    assert theta_dina(0.0, 0.0, 1) == 1.0


def test_theta_lookup_uses_reduced_class(q_two: QMatrix) -> None:
    """DINA table lookup: only the full reduced class gets 1 - s."""  # docstring: 查表
    table = ItemParamTable.from_dina(q_two, DinaItemParams.constant(4, guess=0.2, slip=0.2))
    assert theta_lookup(table, 2, [1, 1]) == pytest.approx(0.8)
    assert theta_lookup(table, 2, [1, 0]) == pytest.approx(0.2)
    assert theta_lookup(table, 0, [1, 0]) == theta_lookup(table, 0, [1, 1])
    with pytest.raises(DimensionError):
        theta_lookup(table, 4, [1, 1])


def test_gdina_effects_round_trip() -> None:
    """Effects -> table -> effects recovers the effects to 1e-12."""  # docstring: Möbius 互逆
    beta = np.array([0.2, 0.3, 0.2, 0.1])
    table = gdina_effects_to_table(beta, [1, 1, 0])
    assert table.tolist() == pytest.approx([0.2, 0.5, 0.4, 0.8], abs=1e-12)
    assert np.max(np.abs(table_to_gdina_effects(table) - beta)) < 1e-12


def test_additive_gdina_table_has_no_interaction() -> None:
    """(0.2, 0.5, 0.5, 0.8) on a two-attribute item: β0 = 0.2, β1 = β2 = 0.3, β12 = 0."""  # docstring: 加性 GDINA
    beta = table_to_gdina_effects([0.2, 0.5, 0.5, 0.8])
    assert beta.tolist() == pytest.approx([0.2, 0.3, 0.3, 0.0], abs=1e-12)
    assert gdina_effects_to_table([0.2, 0.3, 0.3, 0.0], [1, 1]).tolist() == pytest.approx([0.2, 0.5, 0.5, 0.8])


def test_gdina_effects_out_of_range_rejected() -> None:
    """Effects summing past 1 raise a parameter error."""  # docstring: 概率越界
    with pytest.raises(ParameterError) as ei:
        gdina_effects_to_table([0.5, 0.6, 0.0, 0.0], [1, 1])
    assert ei.value.error_code == "GDINA__OUT_OF_RANGE"
    with pytest.raises(DimensionError):
        gdina_effects_to_table([0.1, 0.2], [1, 1])


def test_monotonicity_coordinatewise_but_not_mastery() -> None:
    """(0.7, 0.46, 0.8, 0.94): 10 < 00 violates coordinatewise only."""  # docstring: 单调性两种形式
    violations = item_monotonicity_violations(0, [0.7, 0.46, 0.8, 0.94])
    assert [v.form for v in violations] == ["coordinatewise"]
    assert violations[0].higher_class == [1, 0]
    assert violations[0].lower_class == [0, 0]


def test_monotonicity_check_on_dina_table_is_clean(q_two: QMatrix) -> None:
    """A DINA table never violates monotonicity."""  # docstring: DINA 单调
    table = ItemParamTable.from_dina(q_two, DinaItemParams.constant(4, guess=0.1, slip=0.3))
    report = monotonicity_check(table)
    assert report.items_checked == 4
    assert report.violations == []


# -----------------------------
# copula.py
# -----------------------------


def test_mixture_weights_sum_to_one(rng: np.random.Generator) -> None:
    """Σ_α ∏ d^α (1 − d)^{1−α} = 1 for any d."""  # docstring: 混合权重归一
    for k in (1, 3, 5):
        d = rng.random(k)
        total = np.sum(mixture_weight(d, profile_bits(k)))
        assert abs(total - 1.0) < 1e-12
    w = reduced_class_weights(rng.random((7, 3)), [0, 2])
    assert w.shape == (7, 4)
    assert np.allclose(w.sum(axis=1), 1.0, atol=1e-12)


def test_binary_mastery_reduces_to_cdm(q_two: QMatrix) -> None:
    """d ∈ {0,1}^K gives θ_{j,d} = θ_{j,α} exactly."""  # docstring: 二值 d 退化
    table = ItemParamTable(
        q=q_two,
        tables=(np.array([0.1, 0.9]), np.array([0.2, 0.7]), np.array([0.1, 0.3, 0.4, 0.95]),
                np.array([0.2, 0.2, 0.2, 0.8])),
    )
    for alpha in profile_bits(2):
        for j in range(4):
            assert marginal_item_prob(alpha.astype(float), j, table) == theta_lookup(table, j, alpha)


def test_marginal_item_prob_is_monotone_for_monotone_tables(q_two: QMatrix, rng: np.random.Generator) -> None:
    """Nonnegative GDINA effects give a monotone table; raising any d_k never lowers θ_{j,d}."""  # docstring: 边际单调
    for _ in range(20):
        tables = []
        for row, s in zip(q_two.entries, q_two.n_required):
            effects = rng.dirichlet(np.ones(2 ** int(s) + 1))[:-1]
            tables.append(gdina_effects_to_table(effects, row))
        table = ItemParamTable(q=q_two, tables=tuple(tables))
        assert monotonicity_check(table).violations == []
        d = rng.random((50, 2))
        for k in range(2):
            up = d.copy()
            up[:, k] = np.minimum(1.0, up[:, k] + rng.random(50) * 0.3)
            for j in range(q_two.n_items):
                assert np.all(marginal_item_prob(up, j, table) >= marginal_item_prob(d, j, table) - 1e-12)


def test_probit_round_trip_and_clamp() -> None:
    """Φ(Φ^{-1}(u)) = u inside the clamp; endpoints stay finite."""  # docstring: probit 截断
    u = np.array([1e-6, 0.3, 0.5, 0.999])
    assert np.allclose(probit_inv(probit(u)), u, rtol=0.0, atol=1e-12)
    assert np.isfinite(probit(0.0)) and np.isfinite(probit(1.0))
    assert probit(0.5) == pytest.approx(0.0, abs=1e-15)
    assert probit(0.975) == pytest.approx(1.959964, abs=1e-6)


def test_copula_rejects_non_pd_sigma() -> None:
    """Σ must be positive definite."""  # docstring: copula 合同
    with pytest.raises(ParameterError) as ei:
        CopulaParams(mu=np.zeros(2), sigma=np.array([[1.0, 2.0], [2.0, 1.0]]))
    assert ei.value.error_code == "COPULA__NOT_PD"


def test_grid_quadrature_limited_to_two_attributes() -> None:
    """Grid nodes are offered for K <= 2."""  # docstring: 网格积分上限
    copula = CopulaParams.exchangeable([0.0, 0.0, 0.0], rho=0.2)
    with pytest.raises(ParameterError):
        copula_nodes(copula, method="grid", grid_points=11)
    d, w = copula_nodes(CopulaParams.exchangeable([0.0, 0.0], rho=0.2), method="grid", grid_points=11)
    assert d.shape == (121, 2)
    assert w.sum() == pytest.approx(1.0)


def test_rlcm_matches_pm_likelihood_at_one_attribute() -> None:
    """K=1, J=3: Σ_A π_A ∏ θ_{j,A_j} equals the PM marginal probability on the same nodes."""  # docstring: RLCM 等价
    q = QMatrix(entries=np.ones((3, 1), dtype=np.int8))
    table = ItemParamTable(q=q, tables=(np.array([0.2, 0.9]), np.array([0.3, 0.7]), np.array([0.1, 0.85])))
    copula = CopulaParams(mu=np.array([0.3]), sigma=np.array([[1.5]]))
    d, w = copula_nodes(copula, method="grid", grid_points=201)

    for r in profile_bits(3):
        pm = float(np.exp(pmcdm_loglik_from_scores(r[None, :], table, d, w)[0]))
        rlcm = 0.0
        for a in profile_bits(3):
            pi = rlcm_class_weight(a[:, None], copula, method="grid", grid_points=201)
            t = np.array([table.tables[j][a[j]] for j in range(3)])
            rlcm += pi * np.prod(t**r * (1.0 - t) ** (1 - r))
        assert pm == pytest.approx(rlcm, abs=1e-10)


def test_rlcm_class_weights_sum_to_one() -> None:
    """π_A over all 2^{KJ} working profiles sums to 1."""  # docstring: 类别权重归一
    copula = CopulaParams.exchangeable([0.0, 0.5], rho=0.4)
    total = 0.0
    for flat in profile_bits(4):
        total += rlcm_class_weight(flat.reshape(2, 2), copula, method="grid", grid_points=41)
    assert total == pytest.approx(1.0, abs=1e-12)


def test_rlcm_size_cap() -> None:
    """2^(K·J) above the cap raises SizeError."""  # docstring: 规模上限
    copula = CopulaParams(mu=np.zeros(1), sigma=np.eye(1))
    with pytest.raises(SizeError):
        rlcm_class_weight(np.ones((20, 1), dtype=int), copula, class_cap=2**16)


# -----------------------------
# likelihood.py
# -----------------------------


def test_degenerate_pm_likelihood_equals_cdm(q_two: QMatrix) -> None:
    """Point-mass d on binary profiles with weights p gives the CDM likelihood."""  # docstring: 退化 p
    table = ItemParamTable(
        q=q_two,
        tables=(np.array([0.1, 0.9]), np.array([0.2, 0.7]), np.array([0.1, 0.3, 0.4, 0.95]),
                np.array([0.2, 0.2, 0.2, 0.8])),
    )
    p = np.array([0.5, 0.0, 0.2, 0.3])
    responses = profile_bits(4)
    pm = pmcdm_loglik_from_scores(responses, table, profile_bits(2).astype(float), p)
    cdm = cdm_loglik(responses, table, p)
    assert np.allclose(pm, cdm, rtol=0.0, atol=1e-12)


def test_cdm_loglik_rejects_unnormalized_proportions(q_two: QMatrix) -> None:
    """Proportions must sum to 1."""  # docstring: p 校验
    table = ItemParamTable.constant(q_two, 0.5)
    with pytest.raises(ParameterError):
        cdm_loglik(np.zeros((1, 4)), table, np.array([0.5, 0.5, 0.5, 0.5]))
    assert cdm_loglik(np.zeros((1, 4)), table, ClassProportions.uniform(2))[0] == pytest.approx(4 * np.log(0.5))


def test_pmcdm_loglik_is_seed_deterministic(q_two: QMatrix) -> None:
    """Same seed, same Monte Carlo nodes, identical result."""  # docstring: 确定性
    table = ItemParamTable.from_dina(q_two, DinaItemParams.constant(4, guess=0.2, slip=0.2))
    copula = CopulaParams.exchangeable([0.0, 0.0], rho=0.3)
    r = profile_bits(4)
    a = pmcdm_loglik(r, table, copula, mc_draws=500, seed=3)
    b = pmcdm_loglik(r, table, copula, mc_draws=500, seed=3)
    assert np.array_equal(a, b)
    assert np.all(a < 0.0)
    with pytest.raises(DimensionError):
        pmcdm_loglik(np.zeros((1, 3)), table, copula, mc_draws=10)


def test_subject_logliks_match_batch_rows(q_two: QMatrix) -> None:
    """Single-subject likelihoods equal the matching row of the batch call (shared nodes for PM)."""  # docstring: 单被试似然
    table = ItemParamTable.from_dina(q_two, DinaItemParams.constant(4, guess=0.15, slip=0.1))
    copula = CopulaParams.exchangeable([0.2, -0.1], rho=0.4)
    r = profile_bits(4)
    p = ClassProportions.uniform(2)
    batch_cdm = cdm_loglik(r, table, p)
    batch_pm = pmcdm_loglik(r, table, copula, mc_draws=300, seed=11)
    for i in (0, 5, 15):
        assert cdm_subject_loglik(r[i], table, p) == pytest.approx(batch_cdm[i], abs=1e-12)
        assert pmcdm_subject_loglik(r[i], table, copula, mc_draws=300, seed=11) == pytest.approx(batch_pm[i], abs=1e-12)
