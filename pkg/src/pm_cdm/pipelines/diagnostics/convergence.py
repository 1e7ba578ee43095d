# src/pm_cdm/pipelines/diagnostics/convergence.py

"""
[职责] 多链收敛诊断：Gelman-Rubin 潜在尺度缩减因子（组间/组内方差比）及按参数名汇总的 ConvergenceReport。
[边界] 需要 C ≥ 2 条等长链；所有链上方差都为 0 的参数（如被约束的单元）被排除并记日志。
"""

from __future__ import annotations

import logging
from typing import Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from pm_cdm.config import settings
from pm_cdm.pipelines.sampler.summary import DrawStore
from pm_cdm.schemas.reports import ConvergenceEntry, ConvergenceReport
from pm_cdm.utils.errors import DimensionError
from pm_cdm.utils.logging_ import get_logger, log_event

logger = get_logger("diagnostics.convergence")


def _stack_chains(chains: ArrayLike | Sequence[ArrayLike]) -> NDArray[np.float64]:
    if isinstance(chains, (list, tuple)):
        lengths = {np.shape(c)[0] if np.ndim(c) else 0 for c in chains}
        if len(lengths) > 1:
            raise DimensionError(message="chains must have equal lengths",
                                 detail={"lengths": sorted(int(n) for n in lengths)},
                                 error_code="CONVERGENCE__RAGGED_CHAINS")
    x = np.asarray(chains, dtype=np.float64)
    if x.ndim not in (2, 3):
        raise DimensionError(message="expected draws shaped (chains, draws) or (chains, draws, params)",
                             detail={"shape": list(x.shape)})
    if x.shape[0] < 2:
        raise DimensionError(message=f"Gelman-Rubin needs at least 2 chains, got {x.shape[0]}",
                             detail={"chains": int(x.shape[0])},
                             error_code="CONVERGENCE__TOO_FEW_CHAINS")
    if x.shape[1] < 2:
        raise DimensionError(message="each chain needs at least 2 retained draws",
                             detail={"draws": int(x.shape[1])})
    return x


def gelman_rubin(chains: ArrayLike | Sequence[ArrayLike]) -> NDArray[np.float64] | float:
    """
    [职责] PSRF = sqrt(V / W)，W 为链内方差均值，B 为链均值的组间方差（乘 n），V = (n−1)/n·W + (C+1)/(Cn)·B。
    [边界] 输入 (C, n) 返回标量，(C, n, P) 返回长度 P 的数组；W = B = 0 的参数返回 NaN，W = 0 < B 返回 inf。
    """
    x = _stack_chains(chains)
    scalar = x.ndim == 2
    if scalar:
        x = x[:, :, None]
    c, n, _ = x.shape
    w = np.mean(np.var(x, axis=1, ddof=1), axis=0)
    means = np.mean(x, axis=1)
    b = n / (c - 1.0) * np.sum((means - means.mean(axis=0)) ** 2, axis=0)
    v = w * (n - 1.0) / n + b * (c + 1.0) / (c * n)
    with np.errstate(divide="ignore", invalid="ignore"):
        psrf = np.sqrt(v / w)
    psrf = np.where((w == 0.0) & (b == 0.0), np.nan, np.where(w == 0.0, np.inf, psrf))
    return float(psrf[0]) if scalar else psrf


def convergence_report(
    draws: Sequence[DrawStore],
    *,
    threshold: Optional[float] = None,
    prefix: str = "",
) -> ConvergenceReport:
    """Per-parameter PSRF over the chains' retained global draws (names filtered by prefix)."""
    thr = float(threshold if threshold is not None else settings.PM_CDM_GR_THRESHOLD)
    if len(draws) < 2:
        raise DimensionError(message=f"Gelman-Rubin needs at least 2 chains, got {len(draws)}",
                             detail={"chains": len(draws)}, error_code="CONVERGENCE__TOO_FEW_CHAINS")
    names, _ = draws[0].select(prefix)
    for store in draws[1:]:
        if store.names != draws[0].names:
            raise DimensionError(message="chains record different parameters",
                                 error_code="CONVERGENCE__NAME_MISMATCH")
    stacked = [store.select(prefix)[1] for store in draws]
    psrf = np.atleast_1d(gelman_rubin(stacked)) if names else np.zeros(0)

    entries = []
    excluded = []
    for name, r in zip(names, psrf):
        if np.isnan(r):
            excluded.append(name)
            entries.append(ConvergenceEntry(name=name, excluded=True))
            continue
        entries.append(ConvergenceEntry(name=name, psrf=float(r), converged=bool(r < thr)))
    if excluded:
        log_event(logger, logging.INFO, "zero-variance parameters excluded from Gelman-Rubin",
                  fields={"count": len(excluded), "names": excluded[:20]})
    return ConvergenceReport(
        threshold=thr, n_chains=len(draws), n_draws=draws[0].n_draws, entries=entries
    )
