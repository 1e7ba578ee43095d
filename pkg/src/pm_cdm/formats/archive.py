# src/pm_cdm/formats/archive.py

"""
[职责] 链存档（chain_{c}.jsonl）：一行表头（模型、维度、配置哈希、种子、格式版本、参数名）+ 每个保留迭代一行记录。
[边界] 记录数必须等于 (M − B)//T，表头哈希必须与表头内配置一致；解析错误给出行号与字节偏移。
[上游关系] fit 子命令在链结束后由 DrawStore 写出。
[下游关系] diagnose 读回各链抽样做 Gelman-Rubin。
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Sequence

import numpy as np

from pm_cdm.pipelines.sampler.summary import DrawStore
from pm_cdm.schemas.model import ModelKind, QMatrix
from pm_cdm.schemas.sampler import ChainConfig
from pm_cdm.utils.artifacts import read_text, write_text_atomic
from pm_cdm.utils.constants import ARCHIVE_FORMAT, ARCHIVE_FORMAT_VERSION, CHAIN_FILE_TEMPLATE
from pm_cdm.utils.errors import FormatError
from pm_cdm.utils.logging_ import hash_payload

from .jsontext import check_header, dumps, loads


def config_hash(config: ChainConfig) -> str:
    return hash_payload(config.model_dump(mode="json"))


@dataclass(frozen=True)
class ChainArchive:
    header: Dict[str, Any]
    draws: DrawStore

    @property
    def config(self) -> ChainConfig:
        return ChainConfig(**self.header["config"])


def archive_path(out_dir: str | Path, chain_id: int) -> Path:
    return Path(out_dir) / CHAIN_FILE_TEMPLATE.format(chain=int(chain_id))


def format_archive(
    draws: DrawStore, *, kind: ModelKind, q: QMatrix, n_subjects: int, config: ChainConfig
) -> str:
    header = {
        "format": ARCHIVE_FORMAT,
        "version": ARCHIVE_FORMAT_VERSION,
        "kind": kind.value,
        "n_subjects": int(n_subjects),
        "n_items": q.n_items,
        "n_attributes": q.n_attributes,
        "chain_id": draws.chain_id,
        "seed": config.seed,
        "config": config.model_dump(mode="json"),
        "config_hash": config_hash(config),
        "n_records": draws.n_draws,
        "names": list(draws.names),
    }
    lines = [dumps(header)]
    lines += [dumps({"iteration": int(t), "values": row}) for t, row in zip(draws.iterations, draws.values)]
    return "\n".join(lines) + "\n"


def write_chain_archive(
    draws: DrawStore, path: str | Path, *, kind: ModelKind, q: QMatrix, n_subjects: int, config: ChainConfig
) -> Path:
    return write_text_atomic(Path(path), format_archive(draws, kind=kind, q=q, n_subjects=n_subjects, config=config))


def parse_archive(text: str, *, source: str = "archive") -> ChainArchive:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise FormatError(message=f"{source} is empty", detail={"source": source}, error_code="ARCHIVE__EMPTY")

    offsets: List[int] = []
    pos = 0
    for line in lines:
        offsets.append(pos)
        pos += len(line.encode("utf-8")) + 1

    def parse_line(i: int) -> Any:
        try:
            return loads(lines[i], source=f"{source} line {i + 1}")
        except FormatError as exc:
            detail = dict(exc.detail)
            detail["byte_offset"] = offsets[i] + int(detail.get("byte_offset") or 0)
            detail["line"] = i + 1
            raise FormatError(message=f"{source} line {i + 1} is malformed (byte {detail['byte_offset']})",
                              detail=detail, error_code="ARCHIVE__PARSE", cause=exc) from exc

    header = check_header(parse_line(0), expected_format=ARCHIVE_FORMAT,
                          expected_version=ARCHIVE_FORMAT_VERSION, source=source)
    config = ChainConfig(**header["config"])
    if header.get("config_hash") != config_hash(config):
        raise FormatError(message=f"{source} header hash does not match its chain configuration",
                          detail={"source": source}, error_code="ARCHIVE__HASH_MISMATCH")
    names = tuple(header["names"])
    records = [parse_line(i) for i in range(1, len(lines))]
    expected = config.n_retained
    if len(records) != expected or header.get("n_records") != expected:
        raise FormatError(
            message=f"{source} holds {len(records)} records, expected (M - B)/T = {expected}",
            detail={"source": source, "records": len(records), "expected": expected},
            error_code="ARCHIVE__RECORD_COUNT",
        )
    for i, rec in enumerate(records, start=2):
        if len(rec.get("values", ())) != len(names):
            raise FormatError(message=f"{source} line {i} has {len(rec.get('values', ()))} values, expected {len(names)}",
                              detail={"source": source, "line": i}, error_code="ARCHIVE__RECORD_WIDTH")
    draws = DrawStore(
        chain_id=int(header["chain_id"]),
        names=names,
        iterations=np.asarray([r["iteration"] for r in records], dtype=np.int64),
        values=np.asarray([r["values"] for r in records], dtype=np.float64).reshape(len(records), len(names)),
    )
    return ChainArchive(header=dict(header), draws=draws)


def read_chain_archive(path: str | Path) -> ChainArchive:
    p = Path(path)
    return parse_archive(read_text(p), source=p.name)


def read_chain_archives(paths: Sequence[str | Path]) -> List[ChainArchive]:
    return [read_chain_archive(p) for p in paths]
