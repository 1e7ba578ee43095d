# src/pm_cdm/utils/errors.py

"""
[职责] 统一领域错误合同（error_code/message/detail/cause）与 CLI 退出码映射（exit_code）。
[边界] 不依赖 argparse；不做日志；仅提供错误壳、错误码校验与 CLI payload 转换。
[上游关系] pipelines/formats/services 抛出 DomainError 或其子类；调用方负责补充 detail 上下文。
[下游关系] scripts/cli.py 使用 to_cli_error 输出单行 JSON 错误并以映射退出码结束进程。
"""

from __future__ import annotations

import json
import re
from typing import Any, Dict, Optional, Tuple


ErrorDetail = Dict[str, Any]  # docstring: 错误细节类型（必须 JSON-safe）

ERROR_CODE_PATTERN_AREA = re.compile(r"^[A-Z][A-Z0-9]*(?:__[A-Z0-9_]+)+$")  # docstring: AREA__REASON 规范
ERROR_CODE_PATTERN_DOT = re.compile(r"^[a-z][a-z0-9_]*(?:\.[a-z0-9_]+)+$")  # docstring: area.reason 规范

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA_VALIDATION = 2
EXIT_NUMERIC = 3

STANDARD_ERROR_CODES = {
    "usage_error",
    "data_validation",
    "dimension_mismatch",
    "invalid_parameter",
    "size_exceeded",
    "format_error",
    "numeric_failure",
    "grid_cell_failed",
    "internal_error",
}

ERROR_EXIT_CODE_BY_CODE = {  # docstring: 通用错误码 -> CLI 退出码
    "usage_error": EXIT_USAGE,
    "data_validation": EXIT_DATA_VALIDATION,
    "dimension_mismatch": EXIT_DATA_VALIDATION,
    "invalid_parameter": EXIT_DATA_VALIDATION,
    "size_exceeded": EXIT_DATA_VALIDATION,
    "format_error": EXIT_DATA_VALIDATION,
    "numeric_failure": EXIT_NUMERIC,
    "grid_cell_failed": EXIT_NUMERIC,
    "internal_error": EXIT_USAGE,
}

INTERNAL_ERROR_CODE = "internal_error"
INTERNAL_ERROR_MESSAGE = "internal error"


def is_valid_error_code(error_code: str) -> bool:
    """
    [职责] 校验错误码是否满足命名规范或属于通用错误码。
    [边界] 仅做格式校验，不保证全局唯一。
    """

    if not error_code:
        return False
    if error_code in STANDARD_ERROR_CODES:
        return True
    return bool(ERROR_CODE_PATTERN_AREA.match(error_code) or ERROR_CODE_PATTERN_DOT.match(error_code))


def ensure_json_safe_detail(detail: ErrorDetail) -> ErrorDetail:
    """
    [职责] 校验 detail 是否可 JSON 序列化。
    [边界] detail 必须是 dict；不做降级或裁剪。
    """

    if not isinstance(detail, dict):
        raise ValueError("detail must be a dict")
    try:
        json.dumps(detail)
    except TypeError as exc:
        raise ValueError("detail must be JSON-serializable") from exc
    return detail


class DomainError(Exception):
    """
    [职责] 领域错误最小合同：统一 error_code/message/detail/cause，并给出 CLI 退出码提示。
    [边界] 仅表达语义，不承担日志与输出。
    [上游关系] pipelines/formats/services 抛出；必要时携带 cause。
    [下游关系] scripts/cli.py 读取 exit_code 与 to_dict() 输出。
    """

    def __init__(
        self,
        *,
        error_code: str,
        message: str,
        detail: Optional[ErrorDetail] = None,
        cause: Optional[Exception] = None,
        exit_code: Optional[int] = None,
        allow_nonstandard_code: bool = False,
    ) -> None:
        if not is_valid_error_code(error_code) and not allow_nonstandard_code:
            raise ValueError(f"invalid error_code: {error_code}")
        normalized_detail = {} if detail is None else dict(detail)  # docstring: 拷贝一次，避免外部修改
        ensure_json_safe_detail(normalized_detail)

        super().__init__(message)
        self.error_code = error_code
        self.message = message
        self.detail = normalized_detail
        self.cause = cause
        self.exit_code = exit_code if exit_code is not None else ERROR_EXIT_CODE_BY_CODE.get(error_code, EXIT_USAGE)

        if cause is not None:
            self.__cause__ = cause  # docstring: 保留异常链路

    def to_dict(self) -> Dict[str, Any]:
        """Return the stable `{code, message, detail}` triple."""
        return {
            "code": self.error_code,
            "message": self.message,
            "detail": dict(self.detail),
        }


class UsageError(DomainError):
    """CLI 参数或运行配置不合法（退出码 1）。"""

    def __init__(self, *, message: str = "usage error", detail: Optional[ErrorDetail] = None,
                 cause: Optional[Exception] = None) -> None:
        super().__init__(error_code="usage_error", message=message, detail=detail, cause=cause, exit_code=EXIT_USAGE)


class DataValidationError(DomainError):
    """
    [职责] 输入数据/参数不满足类型不变量（退出码 2）的基类。
    [边界] 子类仅替换默认 error_code；调用方可传更具体的 AREA__REASON 码。
    """

    default_code = "data_validation"

    def __init__(
        self,
        *,
        message: str = "data validation failed",
        detail: Optional[ErrorDetail] = None,
        cause: Optional[Exception] = None,
        error_code: Optional[str] = None,
    ) -> None:
        super().__init__(
            error_code=error_code or self.default_code,
            message=message,
            detail=detail,
            cause=cause,
            exit_code=EXIT_DATA_VALIDATION,
        )


class DimensionError(DataValidationError):
    """长度/形状不一致。"""

    default_code = "dimension_mismatch"


class ParameterError(DataValidationError):
    """概率越界、协方差非正定等参数错误。"""

    default_code = "invalid_parameter"


class SizeError(DataValidationError):
    """规模超过配置上限（如 RLCM 类别数 2^{KJ}）。"""

    default_code = "size_exceeded"


class FormatError(DataValidationError):
    """文件格式错误：解析失败、版本不匹配、非二值单元等。"""

    default_code = "format_error"


class NumericError(DomainError):
    """
    [职责] 采样过程中的数值失败（NaN、Cholesky/线性求解失败），退出码 3。
    [边界] detail 中携带 iteration/subject 等定位信息。
    """

    def __init__(
        self,
        *,
        message: str = "numeric failure",
        detail: Optional[ErrorDetail] = None,
        cause: Optional[Exception] = None,
        error_code: str = "numeric_failure",
    ) -> None:
        super().__init__(error_code=error_code, message=message, detail=detail, cause=cause, exit_code=EXIT_NUMERIC)


class GridCellError(DomainError):
    """
    [职责] 包装 grid 单元（condition × replication）中拟合器的失败，并附带条件上下文。
    [边界] 退出码沿用被包装错误；未知异常按数值失败处理。
    """

    def __init__(
        self,
        *,
        condition_id: str,
        replication: int,
        fitted_kind: str,
        cause: Exception,
    ) -> None:
        inner_exit = cause.exit_code if isinstance(cause, DomainError) else EXIT_NUMERIC
        inner_code = cause.error_code if isinstance(cause, DomainError) else type(cause).__name__
        super().__init__(
            error_code="grid_cell_failed",
            message=f"fit {fitted_kind} failed in {condition_id} rep {replication}: {cause}",
            detail={
                "condition_id": condition_id,
                "replication": int(replication),
                "fitted_kind": fitted_kind,
                "inner_code": str(inner_code),
            },
            cause=cause,
            exit_code=inner_exit,
        )


class InternalError(DomainError):
    """未知异常的统一包装（不暴露堆栈）。"""

    def __init__(self, *, message: str = INTERNAL_ERROR_MESSAGE, detail: Optional[ErrorDetail] = None,
                 cause: Optional[Exception] = None) -> None:
        super().__init__(error_code=INTERNAL_ERROR_CODE, message=message, detail=detail, cause=cause,
                         exit_code=EXIT_USAGE)


def to_cli_error(error: Exception, *, run_id: Optional[str] = None) -> Tuple[int, Dict[str, Any]]:
    """
    [职责] 将异常转换为 (退出码, 单行错误 payload)。
    [边界] 不打印；不记录日志。
    [上游关系] scripts/cli.py 顶层捕获异常后调用。
    [下游关系] stderr 单行 JSON，可被脚本按 error.code 解析。
    """

    if not isinstance(error, DomainError):
        error = InternalError(detail={"type": type(error).__name__}, cause=error)  # docstring: 不暴露原始消息
    exit_code = error.exit_code
    payload = {"error": error.to_dict()}

    if run_id:
        payload["error"]["run_id"] = run_id
    return exit_code, payload
