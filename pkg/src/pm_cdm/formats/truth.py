# src/pm_cdm/formats/truth.py

"""
[职责] 模拟真值文件（truth.json）：生成模型、Q、真题目参数表、真掌握模式与（PM）真掌握分数、copula 与条件记录。
[边界] 与 responses.csv 一起可还原 GeneratedDataset，供 diagnose 计算 MetricReport。
"""

from __future__ import annotations

from pathlib import Path
from typing import Any, Dict

import numpy as np

from pm_cdm.schemas.model import CopulaParams, DinaItemParams, ItemParamTable, ModelKind, QMatrix, ResponseMatrix
from pm_cdm.schemas.simulation import GeneratedDataset, SimulationCondition
from pm_cdm.utils.artifacts import read_text, write_text_atomic
from pm_cdm.utils.constants import TRUTH_FORMAT, TRUTH_FORMAT_VERSION
from pm_cdm.utils.errors import DimensionError, FormatError

from .jsontext import array_node, check_header, dumps, loads, read_array


def truth_document(dataset: GeneratedDataset) -> Dict[str, Any]:
    doc: Dict[str, Any] = {
        "format": TRUTH_FORMAT,
        "version": TRUTH_FORMAT_VERSION,
        "kind": dataset.model_kind.value,
        "replication": dataset.replication,
        "seed": dataset.seed,
        "condition": dataset.condition.record() if dataset.condition is not None else None,
        "q": array_node(dataset.q.entries),
        "theta": array_node(dataset.true_table.flat()),
        "alpha": array_node(dataset.true_alpha),
    }
    if dataset.true_d is not None:
        doc["d"] = array_node(dataset.true_d)
    if dataset.true_dina is not None:
        doc["guess"] = array_node(dataset.true_dina.guess)
        doc["slip"] = array_node(dataset.true_dina.slip)
    if dataset.copula is not None:
        doc["mu"] = array_node(dataset.copula.mu)
        doc["sigma"] = array_node(dataset.copula.sigma)
    return doc


def write_truth(dataset: GeneratedDataset, path: str | Path) -> Path:
    return write_text_atomic(Path(path), dumps(truth_document(dataset)) + "\n")


def read_truth(path: str | Path, responses: ResponseMatrix) -> GeneratedDataset:
    """Rebuild the generated dataset from its truth file and the responses written next to it."""
    p = Path(path)
    doc = check_header(loads(read_text(p), source=p.name), expected_format=TRUTH_FORMAT,
                       expected_version=TRUTH_FORMAT_VERSION, source=p.name)
    try:
        q = QMatrix(entries=read_array(doc["q"], name="q", dtype=np.int8))
        alpha = read_array(doc["alpha"], name="alpha", dtype=np.int8)
        if alpha.shape[0] != responses.n_subjects:
            raise DimensionError(
                message=f"truth holds {alpha.shape[0]} subjects, responses hold {responses.n_subjects}",
                detail={"truth": int(alpha.shape[0]), "responses": responses.n_subjects},
                error_code="TRUTH__SUBJECT_MISMATCH",
            )
        condition = doc.get("condition")
        if condition is not None:
            condition = SimulationCondition(**{k: v for k, v in condition.items() if k != "condition_id"})
        return GeneratedDataset(
            model_kind=ModelKind.parse(doc["kind"]),
            q=q,
            responses=responses,
            true_table=ItemParamTable.from_flat(q, read_array(doc["theta"], name="theta")),
            true_alpha=alpha,
            true_d=read_array(doc["d"], name="d") if "d" in doc else None,
            true_dina=DinaItemParams(guess=read_array(doc["guess"], name="guess"),
                                     slip=read_array(doc["slip"], name="slip")) if "guess" in doc else None,
            copula=CopulaParams(mu=read_array(doc["mu"], name="mu"),
                                sigma=read_array(doc["sigma"], name="sigma")) if "mu" in doc else None,
            condition=condition,
            replication=int(doc.get("replication") or 0),
            seed=doc.get("seed"),
        )
    except KeyError as exc:
        raise FormatError(message=f"{p.name} is missing field {exc.args[0]!r}",
                          detail={"source": p.name, "field": str(exc.args[0])},
                          error_code="TRUTH__MISSING_FIELD", cause=exc) from exc
