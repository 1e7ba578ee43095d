# src/pm_cdm/formats/tables.py

"""
[职责] 人类可读的文本表：指标、σ̂² 诊断、收敛、AIC/BIC 比较、题目估计对照与 grid 聚合表。
[边界] 只负责排版，不做计算；数字统一保留 3 位小数（比较表 ℓ/AIC/BIC 保留 2 位）。
"""

from __future__ import annotations

from typing import List, Optional, Sequence

from pm_cdm.schemas.reports import (
    ComparisonTable,
    ConvergenceReport,
    DiagnosisReport,
    GridResult,
    ItemEstimateRow,
    MetricReport,
)


def _num(v: Optional[float], digits: int = 3) -> str:
    return "-" if v is None else f"{v:.{digits}f}"


def render_table(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    widths = [max(len(str(c)) for c in col) for col in zip(header, *rows)] if rows else [len(h) for h in header]
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    lines = [fmt.format(*header), "  ".join("-" * w for w in widths)]
    lines += [fmt.format(*[str(c) for c in row]) for row in rows]
    return "\n".join(lines) + "\n"


def render_metric_report(report: MetricReport) -> str:
    header = ["true", "fitted", "MAE", "RMSE", "AMCR", "ARSE"]
    row = [report.true_kind, report.fitted_kind, _num(report.item_mae), _num(report.item_rmse),
           _num(report.amcr), _num(report.arse)]
    out = render_table(header, [row])
    if report.amcr_marginal_map is not None:
        out += f"AMCR (marginal MAP): {report.amcr_marginal_map:.3f}\n"
    return out


def render_diagnosis(report: DiagnosisReport) -> str:
    """σ̂² row per attribute (posterior sd in parentheses), verdict row, then the correlation matrix."""
    k = len(report.sigma2)
    if k == 0:
        out = f"{report.fitted_kind}: no copula covariance (binary-mastery fit)\n"
    else:
        header = [""] + [f"A{a + 1}" for a in range(k)]
        sd = report.sigma2_sd or [None] * k
        rows = [
            ["sigma^2"] + [f"{v:.3f}" + (f" ({s:.3f})" if s is not None else "") for v, s in zip(report.sigma2, sd)],
            ["verdict"] + list(report.verdicts),
        ]
        rows += [[f"corr A{a + 1}"] + [f"{c:.3f}" for c in report.correlation[a]] for a in range(k)]
        out = render_table(header, rows)
        out += f"thresholds: binary-like > {report.binary_threshold:g}, partial-like < {report.partial_threshold:g}\n"
    if report.monotonicity is not None:
        bad = report.monotonicity.violating_items()
        out += f"monotonicity: {len(report.monotonicity.violations)} violation(s)"
        out += f" on items {', '.join(str(j + 1) for j in bad)}\n" if bad else "\n"
    return out


def render_convergence(report: ConvergenceReport) -> str:
    rows = [[e.name, "excluded" if e.excluded else _num(e.psrf), "-" if e.converged is None else str(e.converged)]
            for e in report.entries]
    out = render_table(["parameter", "psrf", "converged"], rows)
    out += (f"chains={report.n_chains} draws/chain={report.n_draws} threshold={report.threshold:g} "
            f"converged share={report.share_converged:.3f}\n")
    return out


def render_comparison(table: ComparisonTable) -> str:
    rows = [
        [r.label, r.fitted_kind, str(r.n_params), _num(r.loglik, 2), _num(r.aic, 2), _num(r.bic, 2),
         _num(r.delta_bic, 2), r.evidence]
        for r in table.rows
    ]
    out = render_table(["model", "kind", "P", "loglik", "AIC", "BIC", "dBIC", "evidence"], rows)
    return out + f"best by AIC: {table.best_by_aic}; best by BIC: {table.best_by_bic}\n"


def render_item_estimates(rows: Sequence[ItemEstimateRow]) -> str:
    if not rows:
        return ""
    labels = list(rows[0].estimates)
    body: List[List[str]] = []
    for row in rows:
        q = "".join(str(v) for v in row.q_row)
        body.append([str(row.item), q] + [" ".join(f"{v:.3f}" for v in row.estimates[lab]) for lab in labels])
    return render_table(["item", "q"] + labels, body)


def render_grid(result: GridResult) -> str:
    """One line per (condition, fitted model), in the layout of a simulation results table."""
    body: List[List[str]] = []
    for row in result.rows:
        c = row.condition
        lead = [c["model_kind"], f"K={c['n_attributes']}", c["q_variant"], c["mu_variant"], f"{c['rho']:g}",
                str(c["n_subjects"])]
        if not row.fits:
            body.append(lead + ["-", "0", "-", "-", "-", "-", "-"])
        for fit in row.fits:
            body.append(lead + [fit.fitted_kind, str(fit.n_replications), _num(fit.item_mae), _num(fit.item_rmse),
                                _num(fit.amcr), _num(fit.arse), _num(fit.sigma2_mean)])
    header = ["true", "K", "Q", "mu", "rho", "N", "fitted", "reps", "MAE", "RMSE", "AMCR", "ARSE", "sigma^2"]
    return render_table(header, body)
