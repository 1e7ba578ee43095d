# playground/sampler_gate/test_sampler_gate.py

"""
[职责] Sampler gate：截断正态、各全条件分布的正确性、零题目时的先验复现、DINA 拒绝上限回退与短链拟合的确定性。
[边界] 只跑短链（几十次迭代）与单步抽样；收敛性复现见 acceptance_gate。
[上游关系] pipelines/sampler/{truncnorm,state,steps,chains,pmcdm,cdm,summary}。
[下游关系] diagnostics 与 CLI fit 依赖 ChainSummary 的形状与确定性合同。
"""

from __future__ import annotations

import numpy as np
import pytest
from pydantic import ValidationError
from scipy import stats

from pm_cdm.pipelines.base.context import RunContext
from pm_cdm.pipelines.sampler import steps as steps_mod
from pm_cdm.pipelines.sampler.cdm import fit_cdm_bayes, fit_model
from pm_cdm.pipelines.sampler.pmcdm import fit_pmcdm
from pm_cdm.pipelines.sampler.state import ChainState, ItemLayout, init_state
from pm_cdm.pipelines.sampler.steps import (
    step_alpha_star,
    step_mu,
    step_proportions,
    step_sigma,
    step_theta,
    step_tilde_d,
)
from pm_cdm.pipelines.sampler.summary import SummaryAccumulator, global_parameter_names
from pm_cdm.pipelines.sampler.truncnorm import sample_lower_truncated, sample_sign_truncated
from pm_cdm.schemas.model import ModelKind, QMatrix, ResponseMatrix
from pm_cdm.schemas.sampler import ChainConfig, PriorSpec
from pm_cdm.schemas.simulation import GeneratedDataset
from pm_cdm.utils.errors import DimensionError, UsageError


pytestmark = pytest.mark.sampler_gate


def _pm_state(n: int, k: int, n_items: int = 0) -> ChainState:
    return ChainState(
        kind=ModelKind.PM_GDINA,
        theta=[],
        tilde_d=np.zeros((n, k)),
        d=np.full((n, k), 0.5),
        z=np.zeros((n, n_items, k)),
        mu=np.zeros(k),
        sigma=np.eye(k),
    )


# -----------------------------
# truncnorm.py
# -----------------------------


def test_sign_truncated_respects_sign_even_in_the_tails(rng: np.random.Generator) -> None:
    """positive ⇔ z ≥ 0 for means far on the wrong side."""  # docstring: 符号一致性
    mean = np.array([-12.0, -6.0, -0.5, 0.0, 0.5, 6.0, 12.0] * 200)
    positive = rng.random(mean.size) < 0.5
    z = sample_sign_truncated(mean, positive, rng)
    assert np.all(np.isfinite(z))
    assert np.array_equal(z >= 0.0, positive)


def test_lower_truncated_matches_scipy(rng: np.random.Generator) -> None:
    """N(0.3, 1) truncated to z ≥ 0 has the scipy truncnorm distribution."""  # docstring: 分布正确性
    z = sample_sign_truncated(np.full(20000, 0.3), np.ones(20000, dtype=bool), rng)
    ref = stats.truncnorm(a=-0.3, b=np.inf, loc=0.3, scale=1.0)
    assert stats.kstest(z, ref.cdf).pvalue > 1e-3

    tail = sample_lower_truncated(np.full(5000, 7.0), rng)
    assert np.all(tail >= 7.0)
    assert np.mean(tail) == pytest.approx(stats.truncnorm(a=7.0, b=np.inf).mean(), abs=0.01)


# -----------------------------
# schemas/sampler.py / summary.py
# -----------------------------


def test_chain_config_retention_rule() -> None:
    """M=10, B=4, T=3 keeps iterations 7 and 10."""  # docstring: 预烧与稀疏
    cfg = ChainConfig(iters=10, burnin=4, thin=3)
    assert cfg.n_retained == 2
    assert [t for t in range(1, 11) if cfg.is_retained(t)] == [7, 10]
    with pytest.raises(ValidationError):
        ChainConfig(iters=10, burnin=10)
    with pytest.raises(ValidationError):
        ChainConfig(iters=10, burnin=8, thin=5)


def test_prior_resolve_defaults_and_dimension_check() -> None:
    """Defaults follow K; mismatched μ0 raises."""  # docstring: 先验默认值
    prior = PriorSpec().resolve(3)
    assert prior.nu0 == 4.0
    assert np.array_equal(prior.psi0, np.eye(3))
    assert prior.theta_cell_priors(2)[0].tolist() == [1.0, 1.0, 1.0, 2.0]
    with pytest.raises(DimensionError):
        PriorSpec(mu0=[0.0, 0.0]).resolve(3)


def test_summary_accumulator_merge_is_exact(rng: np.random.Generator) -> None:
    """Merging two accumulators equals accumulating everything in one."""  # docstring: 跨链合并
    xs = rng.normal(size=(9, 4))
    a, b, all_ = SummaryAccumulator(), SummaryAccumulator(), SummaryAccumulator()
    for i, x in enumerate(xs):
        (a if i < 4 else b).add(x)
        all_.add(x)
    merged = a.merge(b)
    assert merged.count == 9
    assert np.allclose(merged.mean, xs.mean(axis=0), atol=1e-12)
    assert np.allclose(merged.sd, xs.std(axis=0, ddof=1), atol=1e-12)
    assert np.allclose(SummaryAccumulator().merge(all_).mean, all_.mean)


def test_parameter_names_follow_kind(q_two: QMatrix) -> None:
    """DINA-family names g/1-s pairs; GDINA names reduced classes; PM adds μ and Σ."""  # docstring: 参数命名
    names = global_parameter_names(ModelKind.PM_DINA, q_two)
    assert names[:2] == ("theta[1|g]", "theta[1|1-s]")
    assert names[-3:] == ("sigma[1,1]", "sigma[1,2]", "sigma[2,2]")
    gd = global_parameter_names(ModelKind.GDINA, q_two)
    assert "theta[3|10]" in gd and gd[-1] == "p[11]"
    assert len(gd) == 2 + 2 + 4 + 4 + 4


# -----------------------------
# steps.py: conjugate updates
# -----------------------------


def test_step_tilde_d_matches_normal_full_conditional(rng: np.random.Generator) -> None:
    """K=1: tilde_d ~ N((μ/σ + Σ_j z)/(1/σ + J), 1/(1/σ + J))."""  # docstring: tilde_d 条件分布
    n, n_items = 6000, 3
    state = _pm_state(n, 1, n_items)
    state.mu, state.sigma = np.array([0.4]), np.array([[2.0]])
    state.z = np.full((n, n_items, 1), 0.7)
    tilde, d = step_tilde_d(state, rng)
    precision = 1.0 / 2.0 + n_items
    mean = (0.4 / 2.0 + n_items * 0.7) / precision
    ref = stats.norm(loc=mean, scale=np.sqrt(1.0 / precision))
    assert stats.kstest(tilde[:, 0], ref.cdf).pvalue > 1e-3
    assert np.allclose(d, stats.norm.cdf(tilde))


def test_step_mu_matches_normal_full_conditional(rng: np.random.Generator) -> None:
    """μ | tilde_d, Σ is normal with precision Σ0⁻¹ + NΣ⁻¹."""  # docstring: μ 条件分布
    state = _pm_state(5, 2)
    state.tilde_d = np.array([[0.1, 0.5], [0.3, -0.2], [1.0, 0.4], [-0.4, 0.0], [0.6, 0.9]])
    state.sigma = np.array([[1.0, 0.3], [0.3, 0.5]])
    prior = PriorSpec().resolve(2)
    draws = np.array([step_mu(state, prior, rng) for _ in range(4000)])

    sigma_inv = np.linalg.inv(state.sigma)
    cov = np.linalg.inv(np.eye(2) + 5 * sigma_inv)
    mean = cov @ (sigma_inv @ state.tilde_d.sum(axis=0))
    assert np.allclose(draws.mean(axis=0), mean, atol=4 * np.sqrt(np.diag(cov) / 4000))
    standardized = (draws[:, 0] - mean[0]) / np.sqrt(cov[0, 0])
    assert stats.kstest(standardized, "norm").pvalue > 1e-3


def test_step_sigma_matches_inverse_gamma_at_one_attribute(rng: np.random.Generator) -> None:
    """K=1: IW(ψ, ν) is inverse-gamma(ν/2, ψ/2)."""  # docstring: Σ 条件分布
    state = _pm_state(4, 1)
    state.tilde_d = np.array([[0.5], [-1.0], [0.2], [1.5]])
    state.mu = np.array([0.1])
    prior = PriorSpec().resolve(1)
    draws = np.array([step_sigma(state, prior, rng)[0, 0] for _ in range(3000)])
    psi = 1.0 + float(np.sum((state.tilde_d - state.mu) ** 2))
    ref = stats.invgamma(a=(prior.nu0 + 4) / 2.0, scale=psi / 2.0)
    assert stats.kstest(draws, ref.cdf).pvalue > 1e-3


def test_zero_items_reproduce_the_prior() -> None:
    """With J=0 the (tilde_d, μ, Σ) sweep leaves the prior invariant."""  # docstring: 先验复现
    rng = np.random.default_rng(77)
    state = _pm_state(1, 2)
    prior = PriorSpec(nu0=8.0).resolve(2)
    mus, sigmas = [], []
    for t in range(1, 30001):
        state.iteration = t
        state.tilde_d, state.d = step_tilde_d(state, rng)
        state.mu = step_mu(state, prior, rng)
        state.sigma = step_sigma(state, prior, rng)
        if t > 1000 and t % 20 == 0:
            mus.append(state.mu.copy())
            sigmas.append(state.sigma.copy())
    mus, sigmas = np.array(mus), np.array(sigmas)
    assert np.all(np.abs(mus.mean(axis=0)) < 0.12)
    assert np.all(np.abs(mus.var(axis=0) - 1.0) < 0.15)
    # E[Σ] = Ψ0 / (ν0 − K − 1)
    assert np.allclose(sigmas.mean(axis=0), np.eye(2) / 5.0, atol=0.05)


def test_step_alpha_star_keeps_z_sign_consistent(q_three: QMatrix, rng: np.random.Generator) -> None:
    """α* = I(z ≥ 0) and reduced classes agree with α* on S_j."""  # docstring: α*/z 一致性
    responses = ResponseMatrix(entries=(rng.random((30, q_three.n_items)) < 0.5).astype(np.int8))
    prior = PriorSpec().resolve(3)
    layout = ItemLayout.build(q_three, prior)
    state = init_state(responses, q_three, ModelKind.PM_GDINA, 5)
    alpha_star, reduced, z = step_alpha_star(state, responses.entries.astype(float), layout, rng)
    assert alpha_star.shape == z.shape == (30, q_three.n_items, 3)
    assert np.array_equal(alpha_star == 1, z >= 0.0)
    assert np.array_equal(reduced, layout.reduce_star(alpha_star))


def test_step_alpha_star_matches_mixture_posterior_at_one_attribute(rng: np.random.Generator) -> None:
    """K=1, d=0.5, θ=(0.2, 0.8): P(α*=1 | R=1) = 0.8 and P(α*=1 | R=0) = 0.2."""  # docstring: α* 条件分布
    q = QMatrix(entries=np.array([[1]], dtype=np.int8))
    layout = ItemLayout.build(q, PriorSpec().resolve(1))
    n = 20000
    state = _pm_state(n, 1, 1)
    state.theta = [np.array([0.2, 0.8])]
    responses = np.repeat([[1.0], [0.0]], n // 2, axis=0)
    alpha_star, reduced, _ = step_alpha_star(state, responses, layout, rng)
    mastered = alpha_star[:, 0, 0]
    assert mastered[: n // 2].mean() == pytest.approx(0.8, abs=0.02)
    assert mastered[n // 2:].mean() == pytest.approx(0.2, abs=0.02)
    assert np.array_equal(reduced[:, 0], mastered)


def test_step_proportions_is_a_simplex_draw(rng: np.random.Generator) -> None:
    """p | α ~ Dirichlet(1 + counts): positive and normalized."""  # docstring: 类别比例
    state = ChainState(kind=ModelKind.DINA, theta=[], profile=np.array([0, 0, 3, 3, 3, 1]))
    p = step_proportions(state, PriorSpec().resolve(2), rng)
    assert p.shape == (4,)
    assert np.all(p > 0.0)
    assert p.sum() == pytest.approx(1.0, abs=1e-12)


def test_dina_rejection_cap_keeps_previous_values(monkeypatch: pytest.MonkeyPatch) -> None:
    """When 1 − s > g cannot be met within the cap, the previous g/s stay and a warning is logged."""  # docstring: 拒绝回退
    warnings = []
    monkeypatch.setattr(steps_mod, "log_event", lambda logger, level, msg, **kw: warnings.append((level, kw)))

    q = QMatrix(entries=np.array([[1]], dtype=np.int8))
    layout = ItemLayout.build(q, PriorSpec().resolve(1))
    profile = np.repeat([0, 1], 60)
    responses = np.where(profile == 0, 1.0, 0.0)[:, None]
    state = ChainState(
        kind=ModelKind.DINA, theta=[np.array([0.3, 0.8])], guess=np.array([0.3]), slip=np.array([0.2]),
        alpha=profile[:, None].astype(np.int8), profile=profile, iteration=12,
    )
    tables, guess, slip = step_theta(state, responses, layout, np.random.default_rng(0), rejection_cap=5)
    assert guess.tolist() == pytest.approx([0.3])
    assert slip.tolist() == pytest.approx([0.2])
    assert tables[0].tolist() == pytest.approx([0.3, 0.8])
    assert len(warnings) == 1
    assert warnings[0][1]["fields"]["items"] == [0]
    assert warnings[0][1]["fields"]["iteration"] == 12


def test_gdina_theta_stays_in_open_interval(q_two: QMatrix, rng: np.random.Generator) -> None:
    """Beta draws are clamped to [1e-10, 1 − 1e-10]."""  # docstring: θ 截断
    layout = ItemLayout.build(q_two, PriorSpec().resolve(2))
    profile = np.arange(40) % 4
    state = ChainState(kind=ModelKind.GDINA, theta=[np.full(2, 0.5), np.full(2, 0.5), np.full(4, 0.5),
                                                    np.full(4, 0.5)], profile=profile)
    tables, guess, slip = step_theta(state, np.ones((40, 4)), layout, rng)
    assert guess is None and slip is None
    assert [t.size for t in tables] == [2, 2, 4, 4]
    assert all(np.all((t > 0.0) & (t < 1.0)) for t in tables)


def test_gdina_theta_cell_matches_beta_posterior(rng: np.random.Generator) -> None:
    """Full class with prior Beta(2,1), 79 ones and 20 zeros: θ ~ Beta(81, 21)."""  # docstring: θ 条件分布
    q = QMatrix(entries=np.array([[1]], dtype=np.int8))
    layout = ItemLayout.build(q, PriorSpec().resolve(1))
    responses = np.r_[np.ones(79), np.zeros(20)][:, None]
    state = ChainState(kind=ModelKind.GDINA, theta=[np.full(2, 0.5)], profile=np.ones(99, dtype=np.int64))
    draws = np.array([step_theta(state, responses, layout, rng)[0][0][1] for _ in range(3000)])
    assert stats.kstest(draws, stats.beta(81, 21).cdf).pvalue > 1e-3


def test_dina_theta_pairs_keep_one_minus_slip_above_guess(q_two: QMatrix, rng: np.random.Generator) -> None:
    """Every emitted (g, 1 − s) pair satisfies 1 − s > g, also when the rejection cap falls back."""  # docstring: DINA 约束
    responses = ResponseMatrix(entries=(rng.random((40, q_two.n_items)) < 0.5).astype(np.int8))
    layout = ItemLayout.build(q_two, PriorSpec().resolve(2))
    state = init_state(responses, q_two, ModelKind.DINA, 3)
    r = responses.entries.astype(np.float64)
    for _ in range(300):
        tables, guess, slip = step_theta(state, r, layout, rng)
        assert np.all(1.0 - slip > guess)
        assert all(t[-1] > t[0] for t in tables)
        state.theta, state.guess, state.slip = tables, guess, slip

    start = init_state(responses, q_two, ModelKind.PM_DINA, 3)
    _, guess, slip = step_theta(start, r, layout, rng, rejection_cap=0)
    assert np.all(1.0 - slip > guess)


def test_init_state_dina_start_satisfies_constraint(q_two: QMatrix) -> None:
    """DINA chains start at g = s = 0.2 with θ expanded from (g, 1 − s); GDINA chains start at 0.5."""  # docstring: 初值
    responses = ResponseMatrix(entries=np.zeros((5, q_two.n_items), dtype=np.int8))
    dina = init_state(responses, q_two, ModelKind.DINA, 1)
    assert np.all(1.0 - dina.slip > dina.guess)
    assert all(t[0] == pytest.approx(0.2) and t[-1] == pytest.approx(0.8) for t in dina.theta)
    gdina = init_state(responses, q_two, ModelKind.PM_GDINA, 1)
    assert gdina.guess is None
    assert all(np.all(t == 0.5) for t in gdina.theta)


# -----------------------------
# pmcdm.py / cdm.py / chains.py
# -----------------------------


def test_pm_fit_shapes_and_ranges(tiny_pm_dataset: GeneratedDataset, short_chain: ChainConfig) -> None:
    """A short PM-DINA fit returns finite estimates in range."""  # docstring: 短链冒烟
    s = fit_pmcdm(tiny_pm_dataset.responses, tiny_pm_dataset.q, "PM-DINA", config=short_chain)
    assert s.n_draws == 15 and s.n_chains == 1
    assert s.d_hat.shape == (120, 3)
    assert np.all((s.d_hat >= 0.0) & (s.d_hat <= 1.0))
    assert np.all((s.theta_mean.flat() > 0.0) & (s.theta_mean.flat() < 1.0))
    assert np.allclose(s.sigma_mean, s.sigma_mean.T)
    assert np.all(np.linalg.eigvalsh(s.sigma_mean) > 0.0)
    assert s.guess_mean.shape == (6,)
    assert s.draws[0].values.shape == (15, 2 * 6 + 3 + 6)
    assert s.draws[0].iterations.tolist() == list(range(12, 41, 2))
    assert s.alpha_hat.shape == (120, 3)


def test_pm_fit_is_bit_reproducible(tiny_pm_dataset: GeneratedDataset, short_chain: ChainConfig) -> None:
    """Same data and seed give bit-identical summaries."""  # docstring: 确定性
    a = fit_pmcdm(tiny_pm_dataset.responses, tiny_pm_dataset.q, "PM-GDINA", config=short_chain)
    b = fit_pmcdm(tiny_pm_dataset.responses, tiny_pm_dataset.q, "PM-GDINA", config=short_chain)
    assert np.array_equal(a.theta_mean.flat(), b.theta_mean.flat())
    assert np.array_equal(a.d_hat, b.d_hat)
    assert np.array_equal(a.draws[0].values, b.draws[0].values)


def test_chains_are_seeded_by_index_and_parallel_safe(tiny_pm_dataset: GeneratedDataset) -> None:
    """Chain c depends on (seed, c) only: serial, parallel and single-chain runs agree."""  # docstring: 多链种子
    one = ChainConfig(iters=20, burnin=5, chains=1, seed=3)
    two = one.model_copy(update={"chains": 2})
    data, q = tiny_pm_dataset.responses, tiny_pm_dataset.q
    single = fit_pmcdm(data, q, "PM-DINA", config=one, workers=1)
    serial = fit_pmcdm(data, q, "PM-DINA", config=two, workers=1)
    parallel = fit_pmcdm(data, q, "PM-DINA", config=two, workers=2)
    assert np.array_equal(single.draws[0].values, serial.draws[0].values)
    assert not np.array_equal(serial.draws[0].values, serial.draws[1].values)
    assert all(np.array_equal(x.values, y.values) for x, y in zip(serial.draws, parallel.draws))
    assert np.array_equal(serial.d_hat, parallel.d_hat)


def test_chain_timings_merge_into_run_context(tiny_pm_dataset: GeneratedDataset) -> None:
    """Per-chain stage timings land in the caller's context under a chain prefix."""  # docstring: 链计时汇总
    ctx = RunContext(seed=3, model_kind="PM-DINA")
    config = ChainConfig(iters=6, burnin=2, chains=2, seed=3)
    summary = fit_pmcdm(tiny_pm_dataset.responses, tiny_pm_dataset.q, "PM-DINA", config=config, context=ctx, workers=1)
    stages = ctx.timing.to_dict(include_total=False)
    for c in (0, 1):
        assert {f"chain{c}.init", f"chain{c}.alpha_star", f"chain{c}.theta"} <= set(stages)
    assert "chains" in stages
    assert summary.timing_ms["chain1.sigma"] == stages["chain1.sigma"]


def test_cdm_fit_profile_posterior(tiny_pm_dataset: GeneratedDataset, short_chain: ChainConfig) -> None:
    """GDINA fit: profile posteriors sum to 1 and the MAP profile is binary."""  # docstring: CDM 拟合
    s = fit_cdm_bayes(tiny_pm_dataset.responses, tiny_pm_dataset.q, "GDINA", config=short_chain)
    assert s.profile_probs.shape == (120, 8)
    assert np.allclose(s.profile_probs.sum(axis=1), 1.0)
    assert s.proportions.p.sum() == pytest.approx(1.0)
    assert set(np.unique(s.alpha_map)) <= {0, 1}
    assert np.array_equal(s.alpha_marginal_map, (s.attribute_probs >= 0.5).astype(np.int8))
    assert np.all((s.d_estimate >= 0.0) & (s.d_estimate <= 1.0))
    assert s.d_hat is None and s.mu_mean is None


def test_fit_entry_points_validate_kind_and_shape(tiny_pm_dataset: GeneratedDataset, q_two: QMatrix) -> None:
    """Wrong kind is a usage error; wrong item count a dimension error."""  # docstring: 入口校验
    cfg = ChainConfig(iters=3, burnin=1)
    with pytest.raises(UsageError):
        fit_pmcdm(tiny_pm_dataset.responses, tiny_pm_dataset.q, "DINA", config=cfg)
    with pytest.raises(UsageError):
        fit_cdm_bayes(tiny_pm_dataset.responses, tiny_pm_dataset.q, "PM-GDINA", config=cfg)
    with pytest.raises(DimensionError):
        fit_model(tiny_pm_dataset.responses, q_two, "DINA", config=cfg)
