# src/pm_cdm/schemas/sampler.py

"""
[职责] 采样器配置契约：先验 PriorSpec 与链配置 ChainConfig；ResolvedPrior 为按 K 展开后的数值先验。
[边界] 只做字段约束与跨字段不变量校验（B < M、ν0 > K − 1、Beta 超参 > 0）；不做抽样。
[上游关系] RunConfig/CLI 覆盖项构造；grid 使用默认值。
[下游关系] pipelines/sampler 的各 step_* 读取 ResolvedPrior；fit 循环读取 ChainConfig。
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from pm_cdm.config import settings
from pm_cdm.utils.constants import (
    DEFAULT_BURNIN,
    DEFAULT_CHAINS,
    DEFAULT_ITERS,
    DEFAULT_THETA_PRIOR_FULL,
    DEFAULT_THETA_PRIOR_NONE,
    DEFAULT_THETA_PRIOR_OTHER,
    DEFAULT_THIN,
)
from pm_cdm.utils.errors import DimensionError, ParameterError


BetaPair = Tuple[float, float]


class PriorSpec(BaseModel):
    """
    [职责] 先验覆盖项：μ ~ N(μ0, Σ0)，Σ ~ IW(Ψ0, ν0)，θ 单元 Beta 先验，CDM 类别比例 Dirichlet 浓度。
    [边界] None 表示按 K 取默认（μ0=0，Σ0=I，Ψ0=I，ν0=K+1，Dirichlet 全 1）。
    """

    model_config = ConfigDict(extra="forbid")

    mu0: Optional[List[float]] = None
    sigma0: Optional[List[List[float]]] = None
    psi0: Optional[List[List[float]]] = None
    nu0: Optional[float] = None
    theta_none: BetaPair = DEFAULT_THETA_PRIOR_NONE  # docstring: 全 0 约化类
    theta_full: BetaPair = DEFAULT_THETA_PRIOR_FULL  # docstring: α ⪰ q_j 约化类
    theta_other: BetaPair = DEFAULT_THETA_PRIOR_OTHER
    dirichlet: Optional[List[float]] = None  # docstring: 长度 2^K；None 为全 1
    dirichlet_scalar: float = Field(default=1.0, gt=0.0)

    @field_validator("theta_none", "theta_full", "theta_other")
    @classmethod
    def _beta_positive(cls, v: BetaPair) -> BetaPair:
        if not (v[0] > 0 and v[1] > 0):
            raise ValueError("beta hyperparameters must be > 0")
        return v

    @model_validator(mode="after")
    def _check_nu0(self) -> "PriorSpec":
        if self.nu0 is not None and self.mu0 is not None and self.nu0 <= len(self.mu0) - 1:
            raise ValueError(f"nu0 must exceed K - 1 (nu0={self.nu0}, K={len(self.mu0)})")
        if self.dirichlet is not None and any(c <= 0 for c in self.dirichlet):
            raise ValueError("dirichlet concentrations must be > 0")
        return self

    def resolve(self, n_attributes: int) -> "ResolvedPrior":
        k = int(n_attributes)
        mu0 = np.zeros(k) if self.mu0 is None else np.asarray(self.mu0, dtype=np.float64)
        sigma0 = np.eye(k) if self.sigma0 is None else np.asarray(self.sigma0, dtype=np.float64)
        psi0 = np.eye(k) if self.psi0 is None else np.asarray(self.psi0, dtype=np.float64)
        nu0 = float(k + 1) if self.nu0 is None else float(self.nu0)
        if mu0.shape != (k,) or sigma0.shape != (k, k) or psi0.shape != (k, k):
            raise DimensionError(
                message="prior dimensions do not match K",
                detail={"K": k, "mu0": list(mu0.shape), "sigma0": list(sigma0.shape), "psi0": list(psi0.shape)},
                error_code="PRIOR__DIMENSION",
            )
        if nu0 <= k - 1:
            raise ParameterError(message=f"nu0 must exceed K - 1 (nu0={nu0}, K={k})", error_code="PRIOR__NU0")
        for name, m in (("sigma0", sigma0), ("psi0", psi0)):
            try:
                np.linalg.cholesky(m)
            except np.linalg.LinAlgError as exc:
                raise ParameterError(message=f"{name} is not positive definite", error_code="PRIOR__NOT_PD",
                                     cause=exc) from exc
        if self.dirichlet is None:
            conc = np.full(2**k, float(self.dirichlet_scalar))
        else:
            conc = np.asarray(self.dirichlet, dtype=np.float64)
            if conc.shape != (2**k,):
                raise DimensionError(message="dirichlet concentration must have length 2^K",
                                     detail={"got": int(conc.size), "expected": 2**k})
        return ResolvedPrior(
            mu0=mu0, sigma0=sigma0, psi0=psi0, nu0=nu0,
            theta_none=tuple(self.theta_none), theta_full=tuple(self.theta_full),
            theta_other=tuple(self.theta_other), dirichlet=conc,
        )


@dataclass(frozen=True, eq=False)
class ResolvedPrior:
    mu0: NDArray[np.float64]
    sigma0: NDArray[np.float64]
    psi0: NDArray[np.float64]
    nu0: float
    theta_none: BetaPair
    theta_full: BetaPair
    theta_other: BetaPair
    dirichlet: NDArray[np.float64]

    def theta_cell_priors(self, n_required: int) -> Tuple[NDArray[np.float64], NDArray[np.float64]]:
        """(a0, b0) per reduced class of an item requiring `n_required` attributes."""
        n = 2**n_required
        a0 = np.full(n, self.theta_other[0])
        b0 = np.full(n, self.theta_other[1])
        a0[0], b0[0] = self.theta_none
        a0[-1], b0[-1] = self.theta_full
        return a0, b0


class ChainConfig(BaseModel):
    """
    [职责] 链长度与数量：总迭代 M、预烧 B、稀疏 T、链数 C、种子。
    [边界] B < M；保留 (M − B)//T ≥ 1 条记录（每个稀疏块的最后一次迭代）。
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    iters: int = Field(default=DEFAULT_ITERS, ge=1)
    burnin: int = Field(default=DEFAULT_BURNIN, ge=0)
    thin: int = Field(default=DEFAULT_THIN, ge=1)
    chains: int = Field(default=DEFAULT_CHAINS, ge=1)
    seed: int = Field(default_factory=lambda: settings.PM_CDM_DEFAULT_SEED)

    @model_validator(mode="after")
    def _check_lengths(self) -> "ChainConfig":
        if self.burnin >= self.iters:
            raise ValueError(f"burnin ({self.burnin}) must be smaller than iters ({self.iters})")
        if (self.iters - self.burnin) // self.thin < 1:
            raise ValueError("thinning leaves no retained draws")
        return self

    @property
    def n_retained(self) -> int:
        return (self.iters - self.burnin) // self.thin

    def is_retained(self, iteration: int) -> bool:
        """1-based iteration index; keep the last iteration of each thinning block after burn-in."""
        t = int(iteration)
        return t > self.burnin and (t - self.burnin) % self.thin == 0
