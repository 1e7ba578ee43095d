# src/pm_cdm/utils/logging_.py

"""
[职责] 定义结构化日志字段规范与统一 logger 获取方式，提供最小 JSON 格式化 helper。
[边界] 不绑定具体日志后端；不记录业务日志；仅提供工具。
[上游关系] services/pipelines/scripts 通过 get_logger/log_event 组织日志上下文（run/chain/condition）。
[下游关系] stderr 上的 JSON 行可被 grep/jq 检索。
"""

from __future__ import annotations

import hashlib
import json
import logging
from datetime import datetime, timezone
from typing import Any, Dict, Mapping, Optional


DEFAULT_LOGGER_NAME = "pm_cdm"
DEFAULT_LOG_LEVEL = logging.INFO

TRACE_FIELD_KEYS = (
    "run_id",
    "model_kind",
    "condition_id",
    "replication",
    "chain_id",
    "iteration",
)  # docstring: 推荐结构化日志字段

_HANDLER_NAME = "structured_json"

_LOG_RECORD_RESERVED = {
    "name",
    "msg",
    "args",
    "levelname",
    "levelno",
    "pathname",
    "filename",
    "module",
    "exc_info",
    "exc_text",
    "stack_info",
    "lineno",
    "funcName",
    "created",
    "msecs",
    "relativeCreated",
    "thread",
    "threadName",
    "processName",
    "process",
    "message",
    "asctime",
    "taskName",
}


class StructuredLogFormatter(logging.Formatter):
    """
    [职责] 将 LogRecord 转换为 JSON 字符串（含 extra 结构化字段）。
    [边界] 仅输出基础字段 + extra；numpy 标量经 default=str 兜底。
    """

    def __init__(self, *, ensure_ascii: bool = True) -> None:
        super().__init__()
        self._ensure_ascii = ensure_ascii

    def format(self, record: logging.LogRecord) -> str:
        payload: Dict[str, Any] = {
            "ts": datetime.fromtimestamp(record.created, tz=timezone.utc).isoformat(),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
        }
        extras = {k: v for k, v in record.__dict__.items() if k not in _LOG_RECORD_RESERVED and v is not None}
        payload.update(extras)

        if record.exc_info:
            payload["exception"] = self.formatException(record.exc_info)
        if record.stack_info:
            payload["stack_info"] = record.stack_info

        return json.dumps(payload, ensure_ascii=self._ensure_ascii, default=str)


def _has_structured_handler(logger: logging.Logger) -> bool:
    return any(getattr(h, "name", "") == _HANDLER_NAME for h in logger.handlers)


def configure_logging(
    *,
    logger_name: str = DEFAULT_LOGGER_NAME,
    level: int | str = DEFAULT_LOG_LEVEL,
    as_json: bool = True,
) -> logging.Logger:
    """
    [职责] 配置项目 base logger（JSON 或纯文本 formatter，输出到 stderr）。
    [边界] 不触碰 root logger；重复调用只更新级别，不重复挂载 handler。
    [上游关系] scripts/cli.py 入口或测试初始化时调用。
    [下游关系] get_logger 返回的子 logger 复用本 handler。
    """

    logger = logging.getLogger(logger_name)
    logger.setLevel(level)

    if not _has_structured_handler(logger):
        handler = logging.StreamHandler()
        handler.name = _HANDLER_NAME  # docstring: 标记 handler，避免重复挂载
        handler.setFormatter(
            StructuredLogFormatter() if as_json else logging.Formatter("%(asctime)s %(levelname)s %(name)s %(message)s")
        )
        logger.addHandler(handler)
    for h in logger.handlers:
        if getattr(h, "name", "") == _HANDLER_NAME:
            h.setLevel(level)

    logger.propagate = False
    return logger


def get_logger(name: Optional[str] = None, *, level: Optional[int] = None) -> logging.Logger:
    """
    [职责] 获取项目统一 logger（base logger 未配置时做最小配置）。
    [边界] 子 logger 统一挂载在 pm_cdm 根下。
    """
    base_logger = logging.getLogger(DEFAULT_LOGGER_NAME)
    if not _has_structured_handler(base_logger):
        configure_logging()
    full_name = name or DEFAULT_LOGGER_NAME
    if name and not name.startswith(DEFAULT_LOGGER_NAME):
        full_name = f"{DEFAULT_LOGGER_NAME}.{name}"
    logger = logging.getLogger(full_name)
    if level is not None:
        logger.setLevel(level)
    return logger


def build_log_fields(
    *,
    context: Optional[Any] = None,
    run_id: Optional[str] = None,
    model_kind: Optional[str] = None,
    condition_id: Optional[str] = None,
    replication: Optional[int] = None,
    chain_id: Optional[int] = None,
    iteration: Optional[int] = None,
    extra: Optional[Mapping[str, Any]] = None,
) -> Dict[str, Any]:
    """
    [职责] 统一构建结构化日志字段（run/chain/condition 等）。
    [边界] 显式参数覆盖 context 中的同名字段；None 值丢弃。
    """

    fields: Dict[str, Any] = {}
    if context is not None:
        fields.update(_extract_fields_from_context(context))

    explicit_fields = {
        "run_id": run_id,
        "model_kind": model_kind,
        "condition_id": condition_id,
        "replication": replication,
        "chain_id": chain_id,
        "iteration": iteration,
    }
    for key, value in explicit_fields.items():
        if value is not None:
            fields[key] = value

    if extra:
        for key, value in extra.items():
            if value is not None:
                fields[key] = value
    return fields


def log_event(
    logger: logging.Logger,
    level: int,
    message: str,
    *,
    context: Optional[Any] = None,
    fields: Optional[Mapping[str, Any]] = None,
    exc_info: Optional[Any] = None,
) -> None:
    """Single entry point for structured log lines."""
    extra = build_log_fields(context=context, extra=fields)
    logger.log(level, message, extra=extra, exc_info=exc_info)


def hash_payload(payload: Any) -> str:
    """
    [职责] 生成 JSON 快照的 sha256 摘要（配置哈希、数据哈希）。
    [边界] 使用 sort_keys 的规范 JSON；不可序列化对象经 str 兜底。
    """
    if isinstance(payload, (bytes, bytearray)):
        raw = bytes(payload)
    elif isinstance(payload, str):
        raw = payload.encode("utf-8")
    else:
        raw = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str).encode("utf-8")
    return hashlib.sha256(raw).hexdigest()


def _extract_fields_from_context(context: Any) -> Dict[str, Any]:
    fields: Dict[str, Any] = {}
    for key in TRACE_FIELD_KEYS:
        if isinstance(context, Mapping):
            value = context.get(key)
        else:
            value = getattr(context, key, None)
        if value is not None:
            fields[key] = value
    return fields
