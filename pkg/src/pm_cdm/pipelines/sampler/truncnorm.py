# src/pm_cdm/pipelines/sampler/truncnorm.py

"""
[职责] 截断正态抽样：辅助变量 z_ijk ~ N(tilde_d_ik, 1) 截断到 [0,∞) 或 (−∞,0)。
[边界] 逆 CDF 法；下界 b > 5 时改用互补 CDF；结果仍非有限时退回指数尾近似 b + E/b。
"""

from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import ndtr, ndtri

from pm_cdm.utils.constants import TRUNCNORM_TAIL_SWITCH


def sample_lower_truncated(lower: ArrayLike, rng: np.random.Generator) -> NDArray[np.float64]:
    """Y ~ N(0,1) conditioned on Y ≥ lower, elementwise."""
    b = np.asarray(lower, dtype=np.float64)
    u = rng.random(b.shape)
    out = np.empty_like(b)

    body = b <= TRUNCNORM_TAIL_SWITCH
    out[body] = ndtri(ndtr(b[body]) + u[body] * ndtr(-b[body]))
    tail = ~body
    with np.errstate(divide="ignore"):
        out[tail] = -ndtri(u[tail] * ndtr(-b[tail]))

    bad = ~np.isfinite(out)
    if bad.any():
        bb = np.maximum(b[bad], 1.0)
        out[bad] = bb - np.log1p(-u[bad]) / bb  # exponential tail
    return np.maximum(out, b)


def sample_sign_truncated(mean: ArrayLike, positive: ArrayLike, rng: np.random.Generator) -> NDArray[np.float64]:
    """
    [职责] z ~ N(mean, 1) 截断到 z ≥ 0（positive）或 z < 0（否则）。
    [边界] 输出严格满足符号一致性：positive ⇔ z ≥ 0。
    """
    m = np.asarray(mean, dtype=np.float64)
    pos = np.asarray(positive, dtype=bool)
    y = sample_lower_truncated(np.where(pos, -m, m), rng)
    z = np.where(pos, m + y, m - y)
    z = np.where(pos, np.maximum(z, 0.0), np.minimum(z, np.nextafter(0.0, -1.0)))
    return z
