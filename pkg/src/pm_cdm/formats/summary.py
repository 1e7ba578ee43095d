# src/pm_cdm/formats/summary.py

"""
[职责] 拟合汇总文档（summary.json）的读写：后验均值/标准差、d_hat、θ̂、μ̂、Σ̂、链配置与先验。
[边界] 浮点 17 位有效数字，写→读逐位无损；不含时间戳与耗时，相同配置+种子得到逐字节相同的文件；
       读回的 ChainSummary 不含每条链的抽样（见 archive）。
[上游关系] fit 子命令写出；diagnose/compare 读入。
[下游关系] ChainSummary。
"""

from __future__ import annotations

from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np
from pydantic import ValidationError

from pm_cdm.pipelines.sampler.summary import ChainSummary
from pm_cdm.schemas.model import ItemParamTable, ModelKind, QMatrix
from pm_cdm.schemas.sampler import ChainConfig, PriorSpec
from pm_cdm.utils.artifacts import read_text, write_text_atomic
from pm_cdm.utils.constants import SUMMARY_FORMAT, SUMMARY_FORMAT_VERSION
from pm_cdm.utils.errors import FormatError

from .jsontext import array_node, check_header, dumps, loads, read_array

ESTIMATE_FIELDS = (
    "guess_mean", "guess_sd", "slip_mean", "slip_sd",
    "d_hat", "d_sd", "mu_mean", "mu_sd", "sigma_mean", "sigma_sd",
    "profile_probs", "proportions_mean", "proportions_sd",
)


def summary_document(summary: ChainSummary) -> Dict[str, Any]:
    estimates: Dict[str, Any] = {
        "theta_mean": array_node(summary.theta_mean.flat()),
        "theta_sd": array_node(np.concatenate(summary.theta_sd)),
    }
    for name in ESTIMATE_FIELDS:
        value = getattr(summary, name)
        if value is not None:
            estimates[name] = array_node(value)
    return {
        "format": SUMMARY_FORMAT,
        "version": SUMMARY_FORMAT_VERSION,
        "kind": summary.kind.value,
        "n_subjects": summary.n_subjects,
        "n_chains": summary.n_chains,
        "n_draws": summary.n_draws,
        "q": array_node(summary.q.entries),
        "config": summary.config.model_dump(mode="json"),
        "prior": summary.prior.model_dump(mode="json"),
        "parameter_names": list(summary.parameter_names),
        "estimates": estimates,
        "meta": dict(summary.meta),
    }


def dumps_summary(summary: ChainSummary) -> str:
    return dumps(summary_document(summary)) + "\n"


def write_summary(summary: ChainSummary, path: str | Path) -> Path:
    return write_text_atomic(Path(path), dumps_summary(summary))


def summary_from_document(doc: Any, *, source: str = "summary") -> ChainSummary:
    check_header(doc, expected_format=SUMMARY_FORMAT, expected_version=SUMMARY_FORMAT_VERSION, source=source)
    try:
        q = QMatrix(entries=read_array(doc["q"], name="q", dtype=np.int8))
        est = doc["estimates"]
        theta_mean = ItemParamTable.from_flat(q, read_array(est["theta_mean"], name="theta_mean"))
        sd_flat = read_array(est["theta_sd"], name="theta_sd")
        offsets = theta_mean.offsets
        arrays: Dict[str, Optional[np.ndarray]] = {
            name: read_array(est[name], name=name) if name in est else None for name in ESTIMATE_FIELDS
        }
        return ChainSummary(
            kind=ModelKind.parse(doc["kind"]),
            q=q,
            n_subjects=int(doc["n_subjects"]),
            n_chains=int(doc["n_chains"]),
            n_draws=int(doc["n_draws"]),
            config=ChainConfig(**doc["config"]),
            prior=PriorSpec(**doc["prior"]),
            theta_mean=theta_mean,
            theta_sd=tuple(sd_flat[offsets[j]:offsets[j + 1]] for j in range(q.n_items)),
            meta=dict(doc.get("meta") or {}),
            **arrays,
        )
    except KeyError as exc:
        raise FormatError(message=f"{source} is missing field {exc.args[0]!r}",
                          detail={"source": source, "field": str(exc.args[0])},
                          error_code="SUMMARY__MISSING_FIELD", cause=exc) from exc
    except ValidationError as exc:
        raise FormatError(message=f"{source} holds an invalid chain configuration or prior: {exc.errors()[0]['msg']}",
                          detail={"source": source}, error_code="SUMMARY__INVALID_FIELD", cause=exc) from exc


def read_summary(path: str | Path) -> ChainSummary:
    p = Path(path)
    return summary_from_document(loads(read_text(p), source=p.name), source=p.name)
