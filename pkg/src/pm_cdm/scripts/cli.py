# src/pm_cdm/scripts/cli.py

"""
[职责] pm-cdm 命令行入口：simulate | fit | diagnose | compare | grid。
[边界] 只做参数解析、配置合并与结果打印；错误统一转为单行 JSON（stderr）并按类别返回退出码（0/1/2/3）。
[上游关系] 用户 / 脚本调用（pyproject [project.scripts] pm-cdm）。
[下游关系] services/* 执行具体流程。
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import Any, Dict, Optional, Sequence

from pm_cdm.config import settings
from pm_cdm.formats.config_file import ConfigTree, read_config_file
from pm_cdm.pipelines.base.context import RunContext
from pm_cdm.services._shared import build_chain_config, build_condition, build_prior, build_run_config, resolve_seed
from pm_cdm.services.compare_service import run_compare
from pm_cdm.services.diagnose_service import run_diagnose
from pm_cdm.services.fit_service import run_fit
from pm_cdm.services.grid_service import run_grid
from pm_cdm.services.simulate_service import run_simulate
from pm_cdm.utils.errors import EXIT_OK, DomainError, UsageError, to_cli_error
from pm_cdm.utils.logging_ import configure_logging, get_logger, log_event

logger = get_logger("cli")


class _ArgumentParser(argparse.ArgumentParser):
    """argparse that raises UsageError instead of exiting, so errors share one output format."""

    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(message=message, detail={"prog": self.prog})


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=None)  # docstring: 键值配置文件（flags 优先）
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--json", action="store_true")  # docstring: 结果以单行 JSON 打印到 stdout
    p.add_argument("--quiet", action="store_true")  # docstring: 只输出 WARNING 以上日志，关闭进度条


def _add_chain(p: argparse.ArgumentParser) -> None:
    p.add_argument("--iters", type=int, default=None)
    p.add_argument("--burnin", type=int, default=None)
    p.add_argument("--thin", type=int, default=None)
    p.add_argument("--chains", type=int, default=None)


def _build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="pm-cdm", description="Partial-mastery cognitive diagnosis models.")
    sub = parser.add_subparsers(dest="command", parser_class=_ArgumentParser)
    sub.required = True

    p = sub.add_parser("simulate", help="generate one dataset for a simulation condition")
    _add_common(p)
    p.add_argument("--model", default=None)
    p.add_argument("--replication", type=int, default=None)

    p = sub.add_parser("fit", help="fit a model by Gibbs sampling")
    _add_common(p)
    _add_chain(p)
    p.add_argument("--model", default=None)
    p.add_argument("--q", default=None)
    p.add_argument("--responses", default=None)
    p.add_argument("--simulate", action="store_true")  # docstring: 无数据路径时按 simulate.* 条件生成数据

    p = sub.add_parser("diagnose", help="metrics, partial-mastery diagnosis and convergence for a fit")
    _add_common(p)
    p.add_argument("summary")
    p.add_argument("--truth", default=None)
    p.add_argument("--responses", default=None)

    p = sub.add_parser("compare", help="AIC/BIC comparison of two or more fits on the same data")
    _add_common(p)
    p.add_argument("summaries", nargs="+")
    p.add_argument("--responses", default=None)
    p.add_argument("--mc-draws", dest="mc_draws", type=int, default=None)

    p = sub.add_parser("grid", help="run the simulation condition grid")
    _add_common(p)
    _add_chain(p)
    p.add_argument("--replications", type=int, default=None)
    p.add_argument("--model", action="append", default=None)  # docstring: 只跑指定真模型（可重复）
    p.add_argument("--workers", type=int, default=None)
    return parser


def _parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    return _build_parser().parse_args(list(argv) if argv is not None else None)


def _chain_flags(args: argparse.Namespace) -> Dict[str, Any]:
    return {k: getattr(args, k) for k in ("iters", "burnin", "thin", "chains")}


def _require_out(args: argparse.Namespace, tree: ConfigTree) -> str:
    out = args.out or (tree.get("run") or {}).get("out")
    if out is None:
        raise UsageError(message="an output directory is required (--out or run.out)")
    return str(out)


def _dispatch(args: argparse.Namespace, tree: ConfigTree, show_progress: bool) -> Dict[str, Any]:
    seed = resolve_seed(tree, args.seed)
    if args.command == "simulate":
        model = args.model or (tree.get("run") or {}).get("model")
        if model is None:
            raise UsageError(message="a model kind is required (--model or run.model)")
        condition = build_condition(tree, model=model, seed=seed)
        replication = args.replication if args.replication is not None else (tree.get("simulate") or {}).get("replication", 0)
        _, result = run_simulate(condition, _require_out(args, tree), replication=int(replication))
        return result
    if args.command == "fit":
        config = build_run_config(
            tree, model=args.model, q=args.q, responses=args.responses, out=args.out, seed=args.seed,
            chain_flags=_chain_flags(args), simulate=bool(args.simulate),
        )
        ctx = RunContext(seed=config.seed, model_kind=config.model_kind.value, show_progress=show_progress)
        _, result = run_fit(config, context=ctx)
        return result
    if args.command == "diagnose":
        diag = tree.get("diagnose") or {}
        return run_diagnose(
            args.summary, out_dir=args.out, truth_path=args.truth, responses_path=args.responses,
            binary_threshold=diag.get("binary_threshold"), partial_threshold=diag.get("partial_threshold"),
        )
    if args.command == "compare":
        cmp_cfg = tree.get("compare") or {}
        return run_compare(
            args.summaries, out_dir=_require_out(args, tree), responses_path=args.responses,
            mc_draws=args.mc_draws if args.mc_draws is not None else cmp_cfg.get("mc_draws"), seed=seed,
        )
    if args.command == "grid":
        grid_cfg = dict(tree.get("grid") or {})
        replications = args.replications if args.replications is not None else grid_cfg.pop("replications", None)
        workers = args.workers if args.workers is not None else grid_cfg.pop("workers", None)
        if args.model:
            grid_cfg["model_kind"] = args.model
        return run_grid(
            out_dir=_require_out(args, tree), seed=seed,
            chain=build_chain_config(tree, seed=seed, **_chain_flags(args)), prior=build_prior(tree),
            replications=replications, filters=grid_cfg, workers=workers, show_progress=show_progress,
        )
    raise UsageError(message=f"unknown command {args.command!r}")


def _print_result(result: Dict[str, Any], *, as_json: bool, command: str) -> None:
    if as_json:
        print(json.dumps(result, ensure_ascii=True, default=str, sort_keys=True))
        return
    print(f"[{command}] status={'ok' if result.get('ok') else 'failed'}")
    for key, value in (result.get("paths") or {}).items():
        print(f"[{command}] {key}={value}")
    for key in ("best_by_aic", "best_by_bic", "conditions", "model_kind", "n_subjects"):
        if key in result:
            print(f"[{command}] {key}={result[key]}")


def main(argv: Optional[Sequence[str]] = None) -> int:
    as_json = False
    try:
        args = _parse_args(argv)
        as_json = bool(args.json)
        level = logging.WARNING if args.quiet else settings.PM_CDM_LOG_LEVEL
        configure_logging(level=level, as_json=settings.PM_CDM_LOG_JSON)
        show_progress = not args.quiet and sys.stderr.isatty()
        tree = read_config_file(args.config) if args.config else {}
        result = _dispatch(args, tree, show_progress)
    except Exception as exc:  # noqa: BLE001
        code, payload = to_cli_error(exc)
        if not isinstance(exc, UsageError):
            log_event(logger, logging.ERROR, "command failed", fields={"code": payload["error"]["code"]},
                      exc_info=not isinstance(exc, DomainError))
        print(json.dumps(payload, ensure_ascii=True, default=str), file=sys.stderr)
        return code
    _print_result(result, as_json=as_json, command=args.command)
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
