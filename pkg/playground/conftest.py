# playground/conftest.py

"""
[职责] pytest 公共 fixture：小型 Q 矩阵、题目参数表、固定种子 Generator、短链配置与小数据集。
[边界] 只构造内存对象与临时目录；不跑长链（长链复现见 acceptance_gate）。
[上游关系] pytest runner 调用 fixture 初始化。
[下游关系] playground/*_gate 使用这些 fixture 做断言。
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

_REPO_ROOT = Path(__file__).resolve().parents[1]
_SRC_ROOT = _REPO_ROOT / "src"
if str(_SRC_ROOT) not in sys.path:
    sys.path.insert(0, str(_SRC_ROOT))  # docstring: 优先使用本地源码而非 site-packages

from pm_cdm.pipelines.simulate.generate import generate_responses_pmcdm, simulation_item_table
from pm_cdm.pipelines.sampler.summary import ChainSummary
from pm_cdm.schemas.model import CopulaParams, ItemParamTable, ModelKind, QMatrix, profile_index
from pm_cdm.schemas.sampler import ChainConfig, PriorSpec
from pm_cdm.schemas.simulation import GeneratedDataset


@pytest.fixture()
def rng() -> np.random.Generator:
    """Seeded generator shared by numeric tests."""  # docstring: 固定种子，失败可复现
    return np.random.default_rng(12345)


@pytest.fixture()
def q_two() -> QMatrix:
    """J=4, K=2: two single-attribute items and two items requiring both."""
    return QMatrix(entries=np.array([[1, 0], [0, 1], [1, 1], [1, 1]], dtype=np.int8))


@pytest.fixture()
def q_three() -> QMatrix:
    """J=6, K=3 with an identity block (complete Q)."""
    return QMatrix(
        entries=np.array(
            [[1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 1, 0], [0, 1, 1], [1, 1, 1]],
            dtype=np.int8,
        )
    )


@pytest.fixture()
def dina_table_three(q_three: QMatrix) -> ItemParamTable:
    return simulation_item_table(ModelKind.DINA, q_three)


@pytest.fixture()
def gdina_table_three(q_three: QMatrix) -> ItemParamTable:
    return simulation_item_table(ModelKind.GDINA, q_three)


@pytest.fixture()
def short_chain() -> ChainConfig:
    """Tiny chain for smoke fits (finite output, not convergence)."""  # docstring: 只验证管线，不验证收敛
    return ChainConfig(iters=40, burnin=10, thin=2, chains=1, seed=7)


@pytest.fixture()
def tiny_pm_dataset(q_three: QMatrix, dina_table_three: ItemParamTable) -> GeneratedDataset:
    """PM-DINA data: 120 subjects, K=3, correlated copula."""
    copula = CopulaParams.exchangeable([0.0, 0.0, 0.0], rho=0.5)
    gen = np.random.default_rng(2024)
    d = np.clip(gen.random((120, 3)), 0.01, 0.99)
    return generate_responses_pmcdm(d, dina_table_three, q_three, 99, kind=ModelKind.PM_DINA, copula=copula)


def summary_from_truth(dataset: GeneratedDataset, kind: ModelKind | str) -> ChainSummary:
    """A ChainSummary whose estimates equal the generating values (stub fitter for grid/metric tests)."""
    kind = ModelKind.parse(kind)
    q = dataset.q
    truth_d = dataset.true_d if dataset.true_d is not None else dataset.true_alpha.astype(np.float64)
    fields = {}
    if kind.is_partial_mastery:
        copula = dataset.copula or CopulaParams(mu=np.zeros(q.n_attributes), sigma=np.eye(q.n_attributes))
        fields.update(d_hat=truth_d, d_sd=np.zeros_like(truth_d), mu_mean=copula.mu, sigma_mean=copula.sigma)
    else:
        probs = np.zeros((dataset.n_subjects, 2**q.n_attributes))
        probs[np.arange(dataset.n_subjects), profile_index(dataset.true_alpha)] = 1.0
        smoothed = (probs.sum(axis=0) + 1.0) / (dataset.n_subjects + probs.shape[1])
        fields.update(profile_probs=probs, proportions_mean=smoothed)
    return ChainSummary(
        kind=kind, q=q, n_subjects=dataset.n_subjects, n_chains=1, n_draws=1,
        config=ChainConfig(iters=2, burnin=1), prior=PriorSpec(),
        theta_mean=dataset.true_table, theta_sd=tuple(np.zeros_like(t) for t in dataset.true_table.tables),
        **fields,
    )


@pytest.fixture()
def truth_fitter():
    """Fitter signature (dataset, kind, seed) -> ChainSummary returning the truth."""
    return lambda dataset, kind, seed: summary_from_truth(dataset, kind)


@pytest.fixture()
def truth_summary():
    return summary_from_truth
