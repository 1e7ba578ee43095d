# src/pm_cdm/formats/jsontext.py

"""
[职责] 确定性 JSON 文本：浮点数按 17 位有效数字输出（逐位无损），numpy 数组写成 {"shape", "data"}。
[边界] 只接受有限浮点；键顺序按插入顺序保留；解析错误转为带字节偏移的 FormatError。
[上游关系] formats/summary、archive、truth 写出文档。
[下游关系] 相同输入 → 逐字节相同的文本。
"""

from __future__ import annotations

import json
import math
from typing import Any, Mapping, Optional

import numpy as np
from numpy.typing import NDArray

from pm_cdm.utils.errors import FormatError


def format_float(value: float) -> str:
    v = float(value)
    if not math.isfinite(v):
        raise FormatError(message=f"non-finite value {v!r} cannot be written", error_code="FORMAT__NON_FINITE")
    return format(v, ".17g")


def array_node(values: Any) -> dict:
    arr = np.asarray(values)
    return {"shape": list(arr.shape), "data": arr.reshape(-1)}


def _dump(obj: Any) -> str:
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=True)
    if isinstance(obj, np.ndarray):
        if obj.dtype.kind in "iub":
            return "[" + ",".join(str(int(v)) for v in obj.reshape(-1)) + "]"
        return "[" + ",".join(format_float(v) for v in obj.reshape(-1)) + "]"
    if isinstance(obj, Mapping):
        return "{" + ",".join(f"{json.dumps(str(k))}:{_dump(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(_dump(v) for v in obj) + "]"
    raise FormatError(message=f"cannot serialize {type(obj).__name__}", error_code="FORMAT__UNSUPPORTED_TYPE")


def dumps(obj: Any) -> str:
    """Compact single-line JSON."""
    return _dump(obj)


def loads(text: str, *, source: Optional[str] = None) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        offset = len(text[: exc.pos].encode("utf-8"))
        raise FormatError(
            message=f"cannot parse {source or 'document'}: {exc.msg} at byte {offset}",
            detail={"source": source, "byte_offset": offset, "line": exc.lineno, "column": exc.colno},
            error_code="FORMAT__PARSE",
            cause=exc,
        ) from exc


def read_array(node: Any, *, name: str, dtype: Any = np.float64) -> NDArray:
    if not isinstance(node, Mapping) or "shape" not in node or "data" not in node:
        raise FormatError(message=f"field {name!r} is not an array node", detail={"field": name},
                          error_code="FORMAT__BAD_ARRAY")
    shape = tuple(int(s) for s in node["shape"])
    data = np.asarray(node["data"], dtype=dtype)
    if data.size != int(np.prod(shape)):
        raise FormatError(message=f"array {name!r} has {data.size} values for shape {list(shape)}",
                          detail={"field": name, "shape": list(shape), "size": int(data.size)},
                          error_code="FORMAT__BAD_ARRAY")
    return data.reshape(shape)


def check_header(doc: Any, *, expected_format: str, expected_version: int, source: str) -> Mapping[str, Any]:
    """Reject documents of another format, or of a version this build cannot read (naming both versions)."""
    if not isinstance(doc, Mapping) or doc.get("format") != expected_format:
        found = doc.get("format") if isinstance(doc, Mapping) else None
        raise FormatError(
            message=f"{source} is not a {expected_format} document (format={found!r})",
            detail={"source": source, "format": found, "expected": expected_format},
            error_code="FORMAT__WRONG_KIND",
        )
    version = doc.get("version")
    if version != expected_version:
        raise FormatError(
            message=f"{source} has {expected_format} version {version}; this build reads version {expected_version}",
            detail={"source": source, "found_version": version, "supported_version": expected_version},
            error_code="FORMAT__VERSION_MISMATCH",
        )
    return doc
