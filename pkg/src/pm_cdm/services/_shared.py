# src/pm_cdm/services/_shared.py

"""
[职责] services/_shared：服务层共用的纯函数（配置合并、RunConfig 构造、数据加载、数据哈希、报告写出）。
[边界] 不执行采样；只处理配置与文件。
[上游关系] simulate/fit/diagnose/compare/grid 服务调用。
[下游关系] 返回 RunConfig、(Q, 作答) 与写出的路径。
"""

from __future__ import annotations

from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple

from pydantic import BaseModel, ValidationError

from pm_cdm.config import settings
from pm_cdm.formats.config_file import ConfigTree
from pm_cdm.formats.matrices import read_q_matrix, read_responses
from pm_cdm.schemas.model import QMatrix, ResponseMatrix
from pm_cdm.schemas.run import RunConfig
from pm_cdm.schemas.sampler import ChainConfig, PriorSpec
from pm_cdm.schemas.simulation import SimulationCondition
from pm_cdm.utils.artifacts import write_text_atomic
from pm_cdm.utils.errors import UsageError
from pm_cdm.utils.logging_ import hash_payload

__all__ = [
    "_merge_values",
    "_validated",
    "build_chain_config",
    "build_prior",
    "build_condition",
    "build_run_config",
    "load_data",
    "data_hash",
    "write_report",
]


def _merge_values(file_values: Optional[Mapping[str, Any]], flag_values: Mapping[str, Any]) -> Dict[str, Any]:
    """Config-file values overridden by flags; flags left unset (None) do not override."""
    merged = dict(file_values or {})
    merged.update({k: v for k, v in flag_values.items() if v is not None})
    return merged


def _validated(model: type[BaseModel], values: Mapping[str, Any], *, what: str) -> Any:
    try:
        return model(**values)
    except ValidationError as exc:
        first = exc.errors()[0]
        where = ".".join(str(p) for p in first.get("loc", ())) or what
        raise UsageError(
            message=f"invalid {what}: {where}: {first.get('msg')}",
            detail={"section": what, "errors": [
                {"loc": ".".join(str(p) for p in e.get("loc", ())), "msg": str(e.get("msg"))} for e in exc.errors()
            ]},
            cause=exc,
        ) from exc


def build_chain_config(tree: ConfigTree, *, seed: int, **flags: Any) -> ChainConfig:
    return _validated(ChainConfig, _merge_values(tree.get("chain"), {**flags, "seed": seed}), what="chain")


def build_prior(tree: ConfigTree) -> PriorSpec:
    return _validated(PriorSpec, dict(tree.get("prior") or {}), what="prior")


def build_condition(tree: ConfigTree, *, model: Optional[str], seed: int, **flags: Any) -> SimulationCondition:
    values = _merge_values(tree.get("simulate"), {**flags, "model_kind": model, "seed": seed})
    values.pop("replication", None)
    return _validated(SimulationCondition, values, what="simulate")


def resolve_seed(tree: ConfigTree, seed: Optional[int]) -> int:
    if seed is not None:
        return int(seed)
    run = tree.get("run") or {}
    return int(run.get("seed", settings.PM_CDM_DEFAULT_SEED))


def build_run_config(
    tree: ConfigTree,
    *,
    model: Optional[str],
    q: Optional[str],
    responses: Optional[str],
    out: Optional[str],
    seed: Optional[int],
    chain_flags: Mapping[str, Any],
    mc_draws: Optional[int] = None,
    simulate: bool = False,
) -> RunConfig:
    """
    [职责] 合并配置文件与命令行参数构造 RunConfig（参数优先）。
    [边界] 未给出数据路径且 simulate=True 时使用 simulate.* 条件；模型缺省时报 UsageError。
    """
    run = dict(tree.get("run") or {})
    resolved_seed = resolve_seed(tree, seed)
    kind = model or run.get("model")
    if kind is None:
        raise UsageError(message="a model kind is required (--model or run.model)")
    q_path = q or run.get("q")
    r_path = responses or run.get("responses")
    condition = None
    if simulate and q_path is None and r_path is None:
        condition = build_condition(tree, model=str(kind), seed=resolved_seed)
    values = {
        "model_kind": kind,
        "q_path": q_path,
        "responses_path": r_path,
        "simulation": condition,
        "prior": build_prior(tree),
        "chain": build_chain_config(tree, seed=resolved_seed, **chain_flags),
        "out_dir": out or run.get("out"),
        "seed": resolved_seed,
        "mc_draws": mc_draws if mc_draws is not None else run.get("mc_draws"),
        "workers": int(run.get("workers", settings.PM_CDM_GRID_WORKERS)),
    }
    if values["out_dir"] is None:
        raise UsageError(message="an output directory is required (--out or run.out)")
    return _validated(RunConfig, values, what="run")


def load_data(q_path: str | Path, responses_path: str | Path) -> Tuple[QMatrix, ResponseMatrix]:
    q = read_q_matrix(q_path)
    responses = read_responses(responses_path)
    responses.check_against(q)
    return q, responses


def data_hash(q: QMatrix, responses: ResponseMatrix) -> str:
    parts = [repr(q.entries.shape).encode(), q.entries.tobytes(),
             repr(responses.entries.shape).encode(), responses.entries.tobytes()]
    return hash_payload(b"|".join(parts))


def write_report(report: BaseModel, path: str | Path) -> Path:
    return write_text_atomic(Path(path), report.model_dump_json(indent=2) + "\n")
