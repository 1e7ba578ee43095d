from __future__ import annotations

from pathlib import Path

from dotenv import load_dotenv
from pydantic_settings import BaseSettings, SettingsConfigDict


def _find_repo_root(start: Path) -> Path:
    """
    Best-effort repository root discovery.
    - Prefer the closest ancestor containing `pyproject.toml`.
    - Fallback to the starting directory if not found.
    """
    cur = start.resolve()
    for _ in range(20):
        if (cur / "pyproject.toml").exists():
            return cur
        if cur.parent == cur:
            break
        cur = cur.parent
    return start.resolve()


PACKAGE_ROOT = Path(__file__).resolve().parent
REPO_ROOT = _find_repo_root(PACKAGE_ROOT)

# Load .env early; explicit process env always wins.
load_dotenv(str(REPO_ROOT / ".env"), override=False)

DATA_ROOT = REPO_ROOT / ".data"


class Settings(BaseSettings):
    """
    [职责] 库级默认值（随机种子、蒙特卡洛次数、诊断阈值、日志级别等），可由 .env / 环境变量覆盖。
    [边界] 不承载单次运行配置（RunConfig/ChainConfig/PriorSpec 负责）；CLI 不要求任何环境变量。
    [上游关系] 进程启动时实例化一次（模块级 settings）。
    [下游关系] pipelines/services/scripts 读取默认值；生效值写入 summary 文档 meta。
    """

    PM_CDM_DATA_DIR: str = str(DATA_ROOT)
    PM_CDM_LOG_LEVEL: str = "INFO"
    PM_CDM_LOG_JSON: bool = True

    PM_CDM_DEFAULT_SEED: int = 20240521

    # marginal likelihood of PM fits (information criteria)
    PM_CDM_IC_MC_DRAWS: int = 1000

    # RLCM class-weight oracle
    PM_CDM_RLCM_MC_DRAWS: int = 100_000
    PM_CDM_RLCM_GRID_POINTS: int = 201
    PM_CDM_RLCM_CLASS_CAP: int = 2**16

    PM_CDM_DINA_REJECTION_CAP: int = 100
    PM_CDM_GR_THRESHOLD: float = 1.1
    PM_CDM_DIAG_BINARY_THRESHOLD: float = 5.0
    PM_CDM_DIAG_PARTIAL_THRESHOLD: float = 3.0

    PM_CDM_GRID_WORKERS: int = 1

    @property
    def data_dir(self) -> Path:
        return Path(self.PM_CDM_DATA_DIR).expanduser().resolve()

    def snapshot(self) -> dict:
        """Return JSON-safe numeric defaults."""  # docstring: 写入 summary meta 以便回放（不含机器相关路径）
        return self.model_dump(mode="json", exclude={"PM_CDM_DATA_DIR", "PM_CDM_LOG_LEVEL", "PM_CDM_LOG_JSON"})

    model_config = SettingsConfigDict(
        env_file=str(REPO_ROOT / ".env"),
        env_file_encoding="utf-8",
        case_sensitive=True,
        extra="ignore",
    )


settings = Settings()
