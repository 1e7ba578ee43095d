# src/pm_cdm/formats/matrices.py

"""
[职责] CSV 矩阵读写：Q 矩阵（J×K）与作答矩阵（N×J），可选表头（首行含非数字单元即视为表头）。
[边界] 只接受 0/1 单元；错误指出行列（1-based 文件行号、列号）；单列 0/1 数字串（如 "1100111…"）展开为逐位作答。
[上游关系] CLI fit/simulate/diagnose 读写数据。
[下游关系] QMatrix / ResponseMatrix 的不变量校验在构造时完成。
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from pm_cdm.schemas.model import QMatrix, ResponseMatrix
from pm_cdm.utils.artifacts import read_text, write_text_atomic
from pm_cdm.utils.errors import FormatError


@dataclass(frozen=True)
class ParsedMatrix:
    header: Optional[List[str]]
    values: NDArray[np.int8]


def _is_int(cell: str) -> bool:
    try:
        int(cell)
    except ValueError:
        return False
    return True


def _expand_bitstring(row: List[str]) -> List[str]:
    if len(row) == 1 and len(row[0]) > 1 and set(row[0]) <= {"0", "1"}:
        return list(row[0])
    return row


def parse_binary_csv(text: str, *, source: str = "matrix") -> ParsedMatrix:
    """
    [职责] 解析二值 CSV 文本。
    [边界] 空行跳过；首个非空行含非整数单元则作为表头；行长不一致报 ragged。
    """
    rows = [(n, [c.strip() for c in r]) for n, r in enumerate(csv.reader(io.StringIO(text)), start=1)]
    rows = [(n, r) for n, r in rows if any(c for c in r)]
    if not rows:
        raise FormatError(message=f"{source} is empty", detail={"source": source}, error_code="MATRIX__EMPTY")

    header: Optional[List[str]] = None
    if not all(_is_int(c) for c in _expand_bitstring(rows[0][1])):
        header = rows[0][1]
        rows = rows[1:]
        if not rows:
            raise FormatError(message=f"{source} has a header but no data rows", detail={"source": source},
                              error_code="MATRIX__EMPTY")

    width: Optional[int] = None
    data: List[List[int]] = []
    for line, raw in rows:
        cells = _expand_bitstring(raw)
        if width is None:
            width = len(cells)
        elif len(cells) != width:
            raise FormatError(
                message=f"{source} line {line} has {len(cells)} columns, expected {width}",
                detail={"source": source, "line": line, "columns": len(cells), "expected": width},
                error_code="MATRIX__RAGGED",
            )
        parsed = []
        for col, cell in enumerate(cells, start=1):
            if cell not in ("0", "1"):
                raise FormatError(
                    message=f"{source} line {line}, column {col}: {cell!r} is not 0 or 1",
                    detail={"source": source, "line": line, "column": col, "value": cell},
                    error_code="MATRIX__NON_BINARY",
                )
            parsed.append(int(cell))
        data.append(parsed)
    if header is not None and width is not None and len(header) != width:
        raise FormatError(
            message=f"{source} header has {len(header)} names for {width} columns",
            detail={"source": source, "header": len(header), "columns": width},
            error_code="MATRIX__RAGGED",
        )
    return ParsedMatrix(header=header, values=np.asarray(data, dtype=np.int8))


def read_q_matrix(path: str | Path) -> QMatrix:
    p = Path(path)
    return QMatrix(entries=parse_binary_csv(read_text(p), source=p.name).values)


def read_responses(path: str | Path) -> ResponseMatrix:
    p = Path(path)
    return ResponseMatrix(entries=parse_binary_csv(read_text(p), source=p.name).values)


def format_matrix_csv(values: ArrayLike, header: Optional[Sequence[str]] = None) -> str:
    arr = np.atleast_2d(np.asarray(values, dtype=np.int64))
    lines = [",".join(header)] if header is not None else []
    lines += [",".join(str(int(v)) for v in row) for row in arr]
    return "\n".join(lines) + "\n"


def write_q_matrix(q: QMatrix, path: str | Path) -> Path:
    header = [f"A{k + 1}" for k in range(q.n_attributes)]
    return write_text_atomic(Path(path), format_matrix_csv(q.entries, header))


def write_responses(responses: ResponseMatrix, path: str | Path) -> Path:
    header = [f"item{j + 1}" for j in range(responses.n_items)]
    return write_text_atomic(Path(path), format_matrix_csv(responses.entries, header))
