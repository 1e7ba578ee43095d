# src/pm_cdm/utils/constants.py

"""
[职责] 集中定义模型常量、文件格式字段名与默认值，降低跨模块硬编码。
[边界] 不读取环境变量（可变默认值见 config.Settings）；不依赖业务实现。
[上游关系] schemas/pipelines/formats/services 引用。
[下游关系] summary/archive/CSV 使用一致字段名，保证下游子命令可直接消费。
"""

from __future__ import annotations

from .logging_ import TRACE_FIELD_KEYS as LOG_TRACE_FIELD_KEYS


TRACE_FIELD_KEYS = LOG_TRACE_FIELD_KEYS

PROBIT_EPS = 1e-12  # docstring: probit 输入截断到 [eps, 1-eps]
THETA_EPS = 1e-10  # docstring: θ 抽样结果截断，保持开区间 (0,1)
PROPORTION_SUM_TOL = 1e-10  # docstring: 类别比例求和容差

MASTERY_CUTOFF = 0.5  # docstring: d>=0.5 记为掌握（平局归 1）

TRUNCNORM_TAIL_SWITCH = 5.0  # docstring: |mean|>5 时改用互补 CDF 公式

# --- default priors ---
DEFAULT_THETA_PRIOR_NONE = (1.0, 2.0)  # docstring: 全 0 约化类 Beta(1,2)
DEFAULT_THETA_PRIOR_FULL = (2.0, 1.0)  # docstring: α ⪰ q_j 约化类 Beta(2,1)
DEFAULT_THETA_PRIOR_OTHER = (1.0, 1.0)  # docstring: 其他约化类 Beta(1,1)

# --- chain start values ---
INIT_THETA = 0.5
INIT_GUESS = 0.2  # docstring: DINA 初值须满足 1 − s > g
INIT_SLIP = 0.2

# --- desk-scale chain defaults ---
DEFAULT_ITERS = 3000
DEFAULT_BURNIN = 1000
DEFAULT_THIN = 1
DEFAULT_CHAINS = 1
DEFAULT_REPLICATIONS = 10

# --- simulation design ---
SIM_GUESS = 0.2
SIM_SLIP = 0.2
SIM_LOW = 0.2
SIM_HIGH = 0.8
SIM_SAMPLE_SIZES = {3: (500, 1000), 5: (1000, 2000)}
SIM_NONCONSTANT_MU = {3: (-1.0, 0.0, 1.0), 5: (-1.0, -0.5, 0.0, 0.5, 1.0)}
SIM_SIGMA2 = 1.0

# --- formats ---
SUMMARY_FORMAT = "pm-cdm-summary"
SUMMARY_FORMAT_VERSION = 1
ARCHIVE_FORMAT = "pm-cdm-chain"
ARCHIVE_FORMAT_VERSION = 1
TRUTH_FORMAT = "pm-cdm-truth"
TRUTH_FORMAT_VERSION = 1

RESPONSES_FILE = "responses.csv"
CONDITION_FILE = "condition.json"
Q_FILE = "q.csv"
TRUTH_FILE = "truth.json"
SUMMARY_FILE = "summary.json"
CHAIN_FILE_TEMPLATE = "chain_{chain}.jsonl"
METRICS_FILE = "metrics.json"
DIAGNOSIS_FILE = "diagnosis.json"
DIAGNOSIS_TABLE_FILE = "diagnosis.txt"
CONVERGENCE_FILE = "convergence.json"
CONVERGENCE_TABLE_FILE = "convergence.txt"
SCATTER_DIR = "scatter"
COMPARISON_FILE = "comparison.json"
COMPARISON_TABLE_FILE = "comparison.txt"
GRID_FILE = "grid.json"
GRID_TABLE_FILE = "grid.txt"
