# src/pm_cdm/pipelines/sampler/state.py

"""
[职责] Gibbs 链状态：PM 模型的 (tilde_d, d, z, α*, μ, Σ, θ) 与 CDM 的 (α, p, θ)，以及按题目预计算的约化类布局。
[边界] ChainState 为单链私有可变对象；不在链之间共享。
[上游关系] pmcdm/cdm 拟合循环初始化并逐步更新。
[下游关系] steps.* 读取状态并返回新值；summary 累计保留迭代。
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from numpy.typing import NDArray

from pm_cdm.pipelines.model.copula import probit
from pm_cdm.schemas.model import ModelKind, QMatrix, ResponseMatrix, profile_bits
from pm_cdm.schemas.sampler import ResolvedPrior
from pm_cdm.utils.constants import INIT_GUESS, INIT_SLIP, INIT_THETA
from pm_cdm.utils.errors import NumericError
from pm_cdm.utils.rng import make_rng


@dataclass(frozen=True, eq=False)
class ItemLayout:
    """Per-item reduced-class bookkeeping shared by every step of a chain."""

    q: QMatrix
    required: Tuple[NDArray[np.int64], ...]
    bits: Tuple[NDArray[np.float64], ...]  # docstring: (2^s, s) 约化类 bits
    powers: Tuple[NDArray[np.int64], ...]  # docstring: (s,) 2^m 权重
    a0: Tuple[NDArray[np.float64], ...]
    b0: Tuple[NDArray[np.float64], ...]

    @classmethod
    def build(cls, q: QMatrix, prior: ResolvedPrior) -> "ItemLayout":
        req = q.required_sets
        priors = [prior.theta_cell_priors(r.size) for r in req]
        return cls(
            q=q,
            required=req,
            bits=tuple(profile_bits(r.size).astype(np.float64) for r in req),
            powers=tuple(1 << np.arange(r.size, dtype=np.int64) for r in req),
            a0=tuple(p[0] for p in priors),
            b0=tuple(p[1] for p in priors),
        )

    @property
    def n_items(self) -> int:
        return self.q.n_items

    def reduce_star(self, alpha_star: NDArray[np.int8]) -> NDArray[np.int64]:
        """(N, J) reduced-class index of each working profile α*_ij."""
        out = np.empty(alpha_star.shape[:2], dtype=np.int64)
        for j in range(self.n_items):
            out[:, j] = alpha_star[:, j, self.required[j]].astype(np.int64) @ self.powers[j]
        return out


@dataclass
class ChainState:
    """
    [职责] 一次 Gibbs 迭代的潜变量与参数。
    [边界] PM：α*_ijk = I(z_ijk ≥ 0)；Σ 正定。CDM 字段在 PM 链中为 None，反之亦然。
    """

    kind: ModelKind
    theta: List[NDArray[np.float64]]
    guess: Optional[NDArray[np.float64]] = None
    slip: Optional[NDArray[np.float64]] = None
    iteration: int = 0

    # partial mastery
    tilde_d: Optional[NDArray[np.float64]] = None
    d: Optional[NDArray[np.float64]] = None
    z: Optional[NDArray[np.float64]] = None
    alpha_star: Optional[NDArray[np.int8]] = None
    reduced_star: Optional[NDArray[np.int64]] = None
    mu: Optional[NDArray[np.float64]] = None
    sigma: Optional[NDArray[np.float64]] = None

    # binary mastery
    alpha: Optional[NDArray[np.int8]] = None
    profile: Optional[NDArray[np.int64]] = None
    proportions: Optional[NDArray[np.float64]] = None
    profile_probs: Optional[NDArray[np.float64]] = field(default=None, repr=False)

    def full_table(self, q: QMatrix) -> NDArray[np.float64]:
        """(J, 2^K) θ per full profile from the current reduced tables."""
        return np.stack([self.theta[j][q.reduce_index[j]] for j in range(q.n_items)])

    def check_finite(self) -> None:
        """Abort the chain on the first non-finite parameter."""
        named = {"theta": np.concatenate(self.theta)}
        if self.kind.is_partial_mastery:
            named.update(mu=self.mu, sigma=self.sigma, tilde_d=self.tilde_d)
        else:
            named.update(proportions=self.proportions)
        for name, arr in named.items():
            if arr is not None and not np.all(np.isfinite(arr)):
                raise NumericError(
                    message=f"non-finite {name} at iteration {self.iteration}",
                    detail={"iteration": int(self.iteration), "parameter": name},
                )


def init_state(
    responses: ResponseMatrix,
    q: QMatrix,
    kind: ModelKind | str,
    seed: int | np.random.Generator | None,
) -> ChainState:
    """
    [职责] 初始值：d⁰ ~ U(0.01, 0.99)，tilde_d⁰ = Φ^{-1}(d⁰)，μ⁰ = 0，Σ⁰ = I，z⁰ ~ N(tilde_d⁰, 1)，α*⁰ = I(z⁰ ≥ 0)。
    [边界] CDM 链：α⁰ ~ Bernoulli(0.5)，p⁰ 均匀。GDINA 类 θ⁰ = 0.5；DINA 类 g⁰ = s⁰ = 0.2，θ⁰ 按 (g⁰, 1 − s⁰) 展开，
           拒绝上限用尽时保留的初值仍满足 1 − s > g。
    """
    kind = ModelKind.parse(kind)
    rng = make_rng(seed)
    n, k, j = responses.n_subjects, q.n_attributes, q.n_items
    state = ChainState(kind=kind, theta=[np.full(2 ** int(s), INIT_THETA) for s in q.n_required])
    if kind.is_dina_family:
        state.guess, state.slip = np.full(j, INIT_GUESS), np.full(j, INIT_SLIP)
        for t in state.theta:
            t[:-1] = INIT_GUESS
            t[-1] = 1.0 - INIT_SLIP
    if kind.is_partial_mastery:
        d0 = rng.uniform(0.01, 0.99, size=(n, k))
        tilde = probit(d0)
        z = tilde[:, None, :] + rng.standard_normal((n, j, k))
        alpha_star = (z >= 0.0).astype(np.int8)
        state.tilde_d, state.d, state.z, state.alpha_star = tilde, d0, z, alpha_star
        state.reduced_star = np.stack(
            [alpha_star[:, jj, q.required_sets[jj]].astype(np.int64) @ (1 << np.arange(q.n_required[jj]))
             for jj in range(j)], axis=1,
        )
        state.mu = np.zeros(k)
        state.sigma = np.eye(k)
    else:
        state.alpha = (rng.random((n, k)) < 0.5).astype(np.int8)
        state.profile = state.alpha.astype(np.int64) @ (1 << np.arange(k, dtype=np.int64))
        state.proportions = np.full(2**k, 1.0 / 2**k)
    return state
