# src/pm_cdm/utils/artifacts.py

from __future__ import annotations

import os
from pathlib import Path

from .errors import FormatError, UsageError


def ensure_dir(p: Path) -> Path:
    """
    [职责] 确保目录存在。
    [边界] 失败则抛异常。
    """
    p.mkdir(parents=True, exist_ok=True)
    return p


def write_text_atomic(path: Path, text: str, encoding: str = "utf-8") -> Path:
    """
    [职责] 原子写入文本文件（先写同目录 tmp，再 replace）。
    [边界] 跨盘 replace 可能失败；tmp 与目标同目录以避免该情况。
    """
    path = Path(path).resolve()
    ensure_dir(path.parent)
    tmp = path.with_name(f".{path.name}.{os.getpid()}.tmp")
    try:
        with open(tmp, "w", encoding=encoding, newline="\n") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        tmp.replace(path)
    finally:
        if tmp.exists():
            tmp.unlink()
    return path


def read_text(path: Path, encoding: str = "utf-8") -> str:
    """Read a UTF-8 input file; a missing file is a usage error, undecodable bytes a format error."""
    p = Path(path)
    try:
        return p.read_text(encoding=encoding)
    except UnicodeDecodeError as exc:
        raise FormatError(message=f"{p.name} is not valid UTF-8 (byte {exc.start})",
                          detail={"path": str(p), "byte_offset": exc.start},
                          error_code="FORMAT__ENCODING", cause=exc) from exc
    except OSError as exc:
        raise UsageError(message=f"cannot read {p}: {exc.strerror or exc}", detail={"path": str(p)},
                         cause=exc) from exc


def resolve_out_dir(out: str | os.PathLike[str]) -> Path:
    """Resolve and create an output directory."""
    return ensure_dir(Path(out).expanduser().resolve())
