# src/pm_cdm/pipelines/sampler/steps.py

"""
[职责] Gibbs 全条件分布：PM 模型的 α*/z、tilde_d、μ、Σ、θ 更新，以及 CDM 的 α、类别比例更新。
[边界] 每个 step 只读 state 并返回新值（由拟合循环写回）；随机性全部来自传入的 Generator。
[上游关系] pmcdm/cdm 拟合循环按固定顺序调用：α*/z → tilde_d → μ → Σ → θ（CDM：α → p → θ）。
[下游关系] 返回 numpy 数组；数值失败抛 NumericError。
"""

from __future__ import annotations

import logging
from typing import List, Optional, Tuple

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import LinAlgError, cho_factor, cho_solve, cholesky, solve_triangular
from scipy.special import log_ndtr, logsumexp, ndtr
from scipy.stats import invwishart

from pm_cdm.config import settings
from pm_cdm.schemas.model import profile_bits
from pm_cdm.schemas.sampler import ResolvedPrior
from pm_cdm.utils.constants import THETA_EPS
from pm_cdm.utils.errors import NumericError
from pm_cdm.utils.logging_ import get_logger, log_event

from .state import ChainState, ItemLayout
from .truncnorm import sample_sign_truncated

logger = get_logger("sampler")


# -----------------------------
# shared helpers
# -----------------------------


def _categorical(log_mass: NDArray[np.float64], rng: np.random.Generator) -> NDArray[np.int64]:
    """Row-wise draw from unnormalized log masses (N, L)."""
    shifted = np.exp(log_mass - np.max(log_mass, axis=1, keepdims=True))
    cum = np.cumsum(shifted, axis=1)
    target = rng.random(log_mass.shape[0]) * cum[:, -1]
    idx = np.sum(cum <= target[:, None], axis=1)
    return np.minimum(idx, log_mass.shape[1] - 1).astype(np.int64)


def _inverse(mat: NDArray[np.float64], *, what: str) -> NDArray[np.float64]:
    try:
        cf = cho_factor(mat, lower=True)
    except LinAlgError as exc:
        raise NumericError(message=f"{what} is not positive definite", detail={"matrix": what}, cause=exc) from exc
    return cho_solve(cf, np.eye(mat.shape[0]))


def _gaussian_from_precision(
    precision: NDArray[np.float64], rhs: NDArray[np.float64], rng: np.random.Generator, *, what: str
) -> NDArray[np.float64]:
    """
    [职责] 对每行 b 抽 N(P⁻¹b, P⁻¹)：P = LLᵀ，均值由 Cholesky 求解，噪声为 L⁻ᵀε。
    [边界] rhs 形状 (N, K)；返回同形状。
    """
    try:
        chol = cholesky(precision, lower=True)
    except LinAlgError as exc:
        raise NumericError(message=f"{what} precision is not positive definite",
                           detail={"step": what}, cause=exc) from exc
    mean = cho_solve((chol, True), rhs.T).T
    eps = rng.standard_normal(rhs.shape)
    return mean + solve_triangular(chol, eps.T, lower=True, trans="T").T


# -----------------------------
# partial-mastery steps
# -----------------------------


def step_alpha_star(
    state: ChainState, responses: NDArray[np.float64], layout: ItemLayout, rng: np.random.Generator
) -> Tuple[NDArray[np.int8], NDArray[np.int64], NDArray[np.float64]]:
    """
    [职责] 对每个 (i,j) 在 S_j 上联合抽取约化类（质量 ∝ 混合权重 × θ 似然），k ∉ S_j 独立 Bernoulli(d_ik)，
           再按 α* 的取值从截断正态刷新全部 z_ijk。
    [边界] 返回 (alpha_star, reduced_star, z)；log d 与 log(1 − d) 由 log_ndtr(±tilde_d) 计算。
    """
    tilde, d = state.tilde_d, state.d
    n, k = tilde.shape
    n_items = layout.n_items
    log_d, log_1md = log_ndtr(tilde), log_ndtr(-tilde)

    alpha_star = (rng.random((n, n_items, k)) < d[:, None, :]).astype(np.int8)
    reduced = np.empty((n, n_items), dtype=np.int64)
    for j in range(n_items):
        req, bits = layout.required[j], layout.bits[j]
        log_w = np.where(bits[None, :, :] > 0, log_d[:, None, req], log_1md[:, None, req]).sum(axis=-1)
        th = state.theta[j]
        r = responses[:, j][:, None]
        log_lik = r * np.log(th)[None, :] + (1.0 - r) * np.log1p(-th)[None, :]
        idx = _categorical(log_w + log_lik, rng)
        reduced[:, j] = idx
        alpha_star[:, j, req] = bits[idx].astype(np.int8)

    mean = np.broadcast_to(tilde[:, None, :], alpha_star.shape)
    z = sample_sign_truncated(mean, alpha_star == 1, rng)
    return alpha_star, reduced, z


def step_tilde_d(state: ChainState, rng: np.random.Generator) -> Tuple[NDArray[np.float64], NDArray[np.float64]]:
    """tilde_d_i ~ N((Σ⁻¹ + J·I)⁻¹(Σ⁻¹μ + Σ_j z_ij·), (Σ⁻¹ + J·I)⁻¹); d = Φ(tilde_d)."""
    z = state.z
    n_items = z.shape[1]
    k = state.mu.size
    sigma_inv = _inverse(state.sigma, what="sigma")
    precision = sigma_inv + n_items * np.eye(k)
    rhs = (sigma_inv @ state.mu)[None, :] + z.sum(axis=1)
    tilde = _gaussian_from_precision(precision, rhs, rng, what="tilde_d")
    bad = np.flatnonzero(~np.all(np.isfinite(tilde), axis=1))
    if bad.size:
        raise NumericError(
            message=f"non-finite tilde_d for subject {int(bad[0])}",
            detail={"subject": int(bad[0]), "iteration": int(state.iteration)},
        )
    return tilde, ndtr(tilde)


def step_mu(state: ChainState, prior: ResolvedPrior, rng: np.random.Generator) -> NDArray[np.float64]:
    """Conjugate normal: precision Σ0⁻¹ + N·Σ⁻¹, mean solved against Σ0⁻¹μ0 + Σ⁻¹·Σ_i tilde_d_i."""
    tilde = state.tilde_d
    sigma0_inv = _inverse(prior.sigma0, what="sigma0")
    sigma_inv = _inverse(state.sigma, what="sigma")
    precision = sigma0_inv + tilde.shape[0] * sigma_inv
    rhs = sigma0_inv @ prior.mu0 + sigma_inv @ tilde.sum(axis=0)
    return _gaussian_from_precision(precision, rhs[None, :], rng, what="mu")[0]


def step_sigma(state: ChainState, prior: ResolvedPrior, rng: np.random.Generator) -> NDArray[np.float64]:
    """Σ ~ IW(Ψ0 + Σ_i (tilde_d_i − μ)(tilde_d_i − μ)ᵀ, ν0 + N); symmetrized and Cholesky-checked."""
    resid = state.tilde_d - state.mu
    k = state.mu.size
    scale = prior.psi0 + resid.T @ resid
    draw = invwishart.rvs(df=prior.nu0 + resid.shape[0], scale=scale, random_state=rng)
    draw = np.asarray(draw, dtype=np.float64).reshape(k, k)
    draw = 0.5 * (draw + draw.T)
    try:
        cholesky(draw, lower=True)
    except LinAlgError as exc:
        raise NumericError(
            message=f"sigma draw is not positive definite at iteration {state.iteration}",
            detail={"iteration": int(state.iteration)},
            cause=exc,
        ) from exc
    return draw


# -----------------------------
# item parameters
# -----------------------------


def class_counts(
    reduced: NDArray[np.int64], responses: NDArray[np.float64], layout: ItemLayout
) -> List[Tuple[NDArray[np.float64], NDArray[np.float64]]]:
    """Per item (n1, n0): positive/negative response counts per reduced class."""
    out = []
    for j in range(layout.n_items):
        size = layout.bits[j].shape[0]
        idx = reduced[:, j]
        n1 = np.bincount(idx, weights=responses[:, j], minlength=size)
        n_all = np.bincount(idx, minlength=size).astype(np.float64)
        out.append((n1, n_all - n1))
    return out


def current_reduced(state: ChainState, layout: ItemLayout) -> NDArray[np.int64]:
    """(N, J) reduced classes: α* for PM chains, α for CDM chains."""
    if state.kind.is_partial_mastery:
        return state.reduced_star
    return layout.q.reduce_index[:, state.profile].T


def step_theta(
    state: ChainState,
    responses: NDArray[np.float64],
    layout: ItemLayout,
    rng: np.random.Generator,
    *,
    rejection_cap: Optional[int] = None,
    log_fields: Optional[dict] = None,
) -> Tuple[List[NDArray[np.float64]], Optional[NDArray[np.float64]], Optional[NDArray[np.float64]]]:
    """
    [职责] θ | rest：GDINA 类逐约化类 Beta(a0 + n1, b0 + n0)；DINA 类把非全掌握类合并为 ξ=0，
           g 与 1 − s 成对抽取并拒绝直到 1 − s > g。
    [边界] 拒绝上限（默认 100）用尽时保留上一轮取值并记 WARNING；所有 θ 截断到 [1e-10, 1 − 1e-10]。
    """
    counts = class_counts(current_reduced(state, layout), responses, layout)

    if not state.kind.is_dina_family:
        tables = [
            np.clip(rng.beta(layout.a0[j] + n1, layout.b0[j] + n0), THETA_EPS, 1.0 - THETA_EPS)
            for j, (n1, n0) in enumerate(counts)
        ]
        return tables, None, None

    cap = int(rejection_cap if rejection_cap is not None else settings.PM_CDM_DINA_REJECTION_CAP)
    n_items = layout.n_items
    a_g = np.array([layout.a0[j][0] + n1[:-1].sum() for j, (n1, _) in enumerate(counts)])
    b_g = np.array([layout.b0[j][0] + n0[:-1].sum() for j, (_, n0) in enumerate(counts)])
    a_f = np.array([layout.a0[j][-1] + n1[-1] for j, (n1, _) in enumerate(counts)])
    b_f = np.array([layout.b0[j][-1] + n0[-1] for j, (_, n0) in enumerate(counts)])

    guess = np.array(state.guess, dtype=np.float64, copy=True)
    one_minus_slip = 1.0 - np.asarray(state.slip, dtype=np.float64)
    pending = np.arange(n_items)
    for _ in range(cap):
        if pending.size == 0:
            break
        g = rng.beta(a_g[pending], b_g[pending])
        f = rng.beta(a_f[pending], b_f[pending])
        ok = f > g
        guess[pending[ok]] = g[ok]
        one_minus_slip[pending[ok]] = f[ok]
        pending = pending[~ok]
    if pending.size:
        log_event(
            logger, logging.WARNING, "dina rejection cap reached; keeping previous guess/slip",
            fields={**(log_fields or {}), "iteration": int(state.iteration), "items": pending.tolist(), "cap": cap},
        )

    guess = np.clip(guess, THETA_EPS, 1.0 - THETA_EPS)
    one_minus_slip = np.clip(one_minus_slip, THETA_EPS, 1.0 - THETA_EPS)
    tables = []
    for j in range(n_items):
        t = np.full(layout.bits[j].shape[0], guess[j])
        t[-1] = one_minus_slip[j]
        tables.append(t)
    return tables, guess, 1.0 - one_minus_slip


# -----------------------------
# binary-mastery steps
# -----------------------------


def step_alpha_cdm(
    state: ChainState, responses: NDArray[np.float64], layout: ItemLayout, rng: np.random.Generator
) -> Tuple[NDArray[np.int8], NDArray[np.int64], NDArray[np.float64]]:
    """
    [职责] α_i | rest：在 2^K 个掌握模式上按 p_α ∏_j θ^{R}(1 − θ)^{1−R} 抽样。
    [边界] 同时返回归一化后的类别后验概率（用于 Rao-Blackwell 化的后验模式概率）。
    """
    q = layout.q
    full = state.full_table(q)
    log_lik = responses @ np.log(full) + (1.0 - responses) @ np.log1p(-full)
    with np.errstate(divide="ignore"):
        log_mass = log_lik + np.log(state.proportions)[None, :]
    probs = np.exp(log_mass - logsumexp(log_mass, axis=1, keepdims=True))
    profile = _categorical(log_mass, rng)
    alpha = profile_bits(q.n_attributes)[profile]
    return alpha, profile, probs


def step_proportions(state: ChainState, prior: ResolvedPrior, rng: np.random.Generator) -> NDArray[np.float64]:
    """p | α ~ Dirichlet(concentration + class counts)."""
    counts = np.bincount(state.profile, minlength=prior.dirichlet.size)
    p = rng.dirichlet(prior.dirichlet + counts)
    p = np.maximum(p, np.finfo(np.float64).tiny)
    return p / p.sum()
