# src/pm_cdm/pipelines/diagnostics/diagnosis.py

"""
[职责] 部分掌握诊断：Σ̂ 对角方差判定（二值型/部分掌握型/不确定）、总体汇总、掌握分数散点数据导出与题目估计对照表。
[边界] 判定只依赖阈值（默认 >5 二值型，<3 部分掌握型）；散点只导出表格数据，不画图。
[上游关系] diagnose 子命令消费 ChainSummary。
[下游关系] DiagnosisReport / ItemEstimateRow；散点 CSV 供外部绘图。
"""

from __future__ import annotations

import logging
from itertools import combinations
from pathlib import Path
from typing import List, Mapping, Optional, Tuple

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import ndtr

from pm_cdm.config import settings
from pm_cdm.pipelines.model.response import monotonicity_check
from pm_cdm.pipelines.sampler.summary import ChainSummary
from pm_cdm.schemas.reports import AttributeVerdict, DiagnosisReport, ItemEstimateRow, PopulationSummary
from pm_cdm.utils.artifacts import ensure_dir, write_text_atomic
from pm_cdm.utils.errors import DimensionError, UsageError
from pm_cdm.utils.logging_ import get_logger, log_event

logger = get_logger("diagnostics.diagnosis")

MARGINALS_FILE = "marginals.csv"


def correlation_matrix(sigma: ArrayLike) -> NDArray[np.float64]:
    s = np.asarray(sigma, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise DimensionError(message="covariance must be square", detail={"shape": list(s.shape)})
    sd = np.sqrt(np.diag(s))
    corr = s / np.outer(sd, sd)
    np.fill_diagonal(corr, 1.0)
    return corr


def attribute_verdict(
    sigma2: float, *, binary_threshold: float, partial_threshold: float
) -> AttributeVerdict:
    if sigma2 > binary_threshold:
        return "binary-like"
    if sigma2 < partial_threshold:
        return "partial-like"
    return "indeterminate"


def resolve_thresholds(binary: Optional[float], partial: Optional[float]) -> Tuple[float, float]:
    """Explicit values win (0.0 included); None falls back to settings."""
    hi = float(binary if binary is not None else settings.PM_CDM_DIAG_BINARY_THRESHOLD)
    lo = float(partial if partial is not None else settings.PM_CDM_DIAG_PARTIAL_THRESHOLD)
    if lo > hi:
        raise UsageError(message="partial threshold must not exceed binary threshold",
                         detail={"binary": hi, "partial": lo})
    return hi, lo


def variance_diagnostic(
    sigma_hat: ArrayLike,
    *,
    sigma_sd: Optional[ArrayLike] = None,
    fitted_kind: str = "PM-CDM",
    binary_threshold: Optional[float] = None,
    partial_threshold: Optional[float] = None,
) -> DiagnosisReport:
    """
    [职责] 由 Σ̂ 的对角元判定每个属性：σ̂²_k > 上阈值为 binary-like，< 下阈值为 partial-like，否则 indeterminate。
    [边界] 大方差把 Φ(tilde_d) 推向 0/1 两端，即数据更像二值掌握。
    """
    hi, lo = resolve_thresholds(binary_threshold, partial_threshold)
    corr = correlation_matrix(sigma_hat)
    sigma2 = np.diag(np.asarray(sigma_hat, dtype=np.float64))
    return DiagnosisReport(
        fitted_kind=fitted_kind,
        sigma2=sigma2.tolist(),
        sigma2_sd=[] if sigma_sd is None else np.diag(np.asarray(sigma_sd, dtype=np.float64)).tolist(),
        correlation=corr.tolist(),
        verdicts=[attribute_verdict(float(v), binary_threshold=hi, partial_threshold=lo) for v in sigma2],
        binary_threshold=hi,
        partial_threshold=lo,
    )


def population_summary(summary: ChainSummary) -> PopulationSummary:
    """μ̂, Φ(μ̂), diag(Σ̂), correlation and mean off-diagonal correlation of a PM fit."""
    if summary.mu_mean is None:
        raise UsageError(message=f"{summary.kind.value} fits carry no copula population parameters",
                         detail={"kind": summary.kind.value})
    corr = correlation_matrix(summary.sigma_mean)
    k = corr.shape[0]
    off = corr[np.triu_indices(k, 1)]
    return PopulationSummary(
        mu=summary.mu_mean.tolist(),
        mastery_mean=ndtr(summary.mu_mean).tolist(),
        sigma2=np.diag(summary.sigma_mean).tolist(),
        correlation=corr.tolist(),
        rho_mean=float(off.mean()) if off.size else None,
    )


def scatter_export(d_hat: ArrayLike, path: str | Path) -> List[Path]:
    """
    [职责] 写出 marginals.csv（每被试一行，K 列）以及每对属性 (k, k') 一张 panel_A{k}_A{k'}.csv（x, y 两列）。
    [边界] K = 1 时只有 marginals；每张表 N 行数据（另有表头）。
    """
    d = np.atleast_2d(np.asarray(d_hat, dtype=np.float64))
    out_dir = ensure_dir(Path(path))
    n, k = d.shape
    header = ",".join(["subject"] + [f"A{a + 1}" for a in range(k)])
    lines = [header] + [",".join([str(i + 1)] + [repr(float(v)) for v in d[i]]) for i in range(n)]
    written = [write_text_atomic(out_dir / MARGINALS_FILE, "\n".join(lines) + "\n")]
    for a, b in combinations(range(k), 2):
        rows = [f"subject,A{a + 1},A{b + 1}"]
        rows += [f"{i + 1},{float(d[i, a])!r},{float(d[i, b])!r}" for i in range(n)]
        written.append(write_text_atomic(out_dir / f"panel_A{a + 1}_A{b + 1}.csv", "\n".join(rows) + "\n"))
    log_event(logger, logging.INFO, "scatter data written",
              fields={"dir": str(out_dir), "panels": len(written) - 1, "n_subjects": n})
    return written


def diagnose_summary(
    summary: ChainSummary,
    *,
    scatter_dir: Optional[str | Path] = None,
    binary_threshold: Optional[float] = None,
    partial_threshold: Optional[float] = None,
) -> DiagnosisReport:
    """Variance diagnostic and population summary for PM fits, monotonicity for every fit, optional scatter files."""
    if summary.kind.is_partial_mastery:
        report = variance_diagnostic(
            summary.sigma_mean,
            sigma_sd=summary.sigma_sd,
            fitted_kind=summary.kind.value,
            binary_threshold=binary_threshold,
            partial_threshold=partial_threshold,
        )
        report = report.model_copy(update={"population": population_summary(summary)})
    else:
        hi, lo = resolve_thresholds(binary_threshold, partial_threshold)
        report = DiagnosisReport(
            fitted_kind=summary.kind.value, sigma2=[], correlation=[], verdicts=[],
            binary_threshold=hi, partial_threshold=lo,
        )
    update = {"monotonicity": monotonicity_check(summary.theta_mean)}
    if scatter_dir is not None:
        scatter_export(summary.d_estimate, scatter_dir)
        update["scatter_dir"] = str(scatter_dir)
    return report.model_copy(update=update)


def item_estimate_table(summaries: Mapping[str, ChainSummary]) -> List[ItemEstimateRow]:
    """Per-item reduced-class estimates of several fits side by side (fits must share Q)."""
    fits = list(summaries.items())
    if not fits:
        return []
    q = fits[0][1].q
    for label, s in fits[1:]:
        if not s.q.equals(q):
            raise DimensionError(message=f"fit {label!r} uses a different Q-matrix",
                                 error_code="ITEMS__Q_MISMATCH")
    rows = []
    for j in range(q.n_items):
        est = {}
        for label, s in fits:
            if s.guess_mean is not None:
                est[label] = [float(s.guess_mean[j]), float(1.0 - s.slip_mean[j])]
            else:
                est[label] = [float(v) for v in s.theta_mean.tables[j]]
        rows.append(ItemEstimateRow(item=j + 1, q_row=q.row(j).tolist(), estimates=est))
    return rows
