# src/pm_cdm/formats/config_file.py

"""
[职责] 扁平键值配置文件：`namespace.key = value`（如 chain.iters = 3000、prior.nu0 = 4、simulate.rho = 0.8）。
[边界] `#` 起注释；值优先按 JSON 字面量解析（数字、true/false、列表），否则按字符串；未知命名空间报错（带行号）。
[上游关系] CLI --config。
[下游关系] services/_shared 按命名空间合并进 RunConfig，命令行参数优先。
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Dict

from pm_cdm.utils.artifacts import read_text
from pm_cdm.utils.errors import FormatError

CONFIG_NAMESPACES = ("run", "chain", "prior", "simulate", "diagnose", "compare", "grid")

ConfigTree = Dict[str, Dict[str, Any]]


def _parse_value(raw: str) -> Any:
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def parse_config_text(text: str, *, source: str = "config") -> ConfigTree:
    tree: ConfigTree = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        key, sep, value = body.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise FormatError(message=f"{source} line {line_no}: expected `namespace.key = value`",
                              detail={"source": source, "line": line_no}, error_code="CONFIG__SYNTAX")
        namespace, dot, name = key.partition(".")
        if not dot or not name:
            raise FormatError(message=f"{source} line {line_no}: key {key!r} has no namespace",
                              detail={"source": source, "line": line_no, "key": key}, error_code="CONFIG__SYNTAX")
        if namespace not in CONFIG_NAMESPACES:
            raise FormatError(
                message=f"{source} line {line_no}: unknown namespace {namespace!r}",
                detail={"source": source, "line": line_no, "namespace": namespace, "allowed": list(CONFIG_NAMESPACES)},
                error_code="CONFIG__UNKNOWN_NAMESPACE",
            )
        section = tree.setdefault(namespace, {})
        if name in section:
            raise FormatError(message=f"{source} line {line_no}: {key!r} is set twice",
                              detail={"source": source, "line": line_no, "key": key}, error_code="CONFIG__DUPLICATE")
        section[name] = _parse_value(value)
    return tree


def read_config_file(path: str | Path) -> ConfigTree:
    p = Path(path)
    return parse_config_text(read_text(p), source=p.name)
