#!/usr/bin/env python3
"""
確率幾何モジュール
PPP によるネットワーク生成・順序距離の分布・干渉の平均（Campbell の定理）・
厳密／近似の局所平均 SIR

距離は km、SIR は無次元（干渉制限モードでは β と P は打ち消し合う）。
"""
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np
from scipy.special import gammaln

sys.path.append(str(Path(__file__).parent.parent))

from models.network_geometry import NetworkGeometry
from models.system_config import SystemConfig
from scripts.error_handler import ValidationError
from scripts.parallel import run_trials, trial_rng
from scripts.utils import logger

ArrayLike = Union[float, np.ndarray]


def sample_ppp(config: SystemConfig, rng: np.random.Generator) -> NetworkGeometry:
    """半径 R の円板上の一様 PPP（点数 ~ Poisson(λπR²)）"""
    radius = config.area_radius_km
    count = rng.poisson(config.lambda_density * math.pi * radius ** 2)
    # 1-U ∈ (0, 1] なので原点上の点は生じない
    r = radius * np.sqrt(1.0 - rng.random(count))
    theta = 2.0 * math.pi * rng.random(count)
    geom = NetworkGeometry(points=np.column_stack([r * np.cos(theta), r * np.sin(theta)]))
    if geom.is_empty:
        logger.debug("PPP 実現の点数が 0 です")
    return geom


def _scalar_or_array(value: np.ndarray, like) -> ArrayLike:
    return float(value) if np.ndim(like) == 0 else value


def distance_pdf(n: int, lam: float, v: ArrayLike) -> ArrayLike:
    """n 番目に近い点までの距離 r_n の PDF"""
    if n < 1:
        raise ValidationError("n", n, "n は 1 以上である必要があります")
    v_arr = np.asarray(v, dtype=float)
    if np.any(v_arr < 0):
        raise ValidationError("v", v, "距離は 0 以上である必要があります")
    with np.errstate(divide="ignore"):
        log_pdf = (math.log(2.0) + n * math.log(math.pi * lam) - gammaln(n)
                   + (2 * n - 1) * np.log(v_arr) - math.pi * lam * v_arr ** 2)
    return _scalar_or_array(np.exp(log_pdf), v)


def joint_distance_pdf(ell: int, n: int, lam: float, u: ArrayLike, v: ArrayLike) -> ArrayLike:
    """
    (r_ℓ, r_n) の同時 PDF（ℓ < n）

    4(πλ)^n / ((ℓ-1)!(n-ℓ-1)!) · u^{2ℓ-1} v (v²-u²)^{n-ℓ-1} e^{-πλv²},  0 <= u <= v
    """
    if not 1 <= ell < n:
        raise ValidationError("ell", ell, f"1 <= ell < n={n} である必要があります")
    u_arr, v_arr = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
    support = (u_arr >= 0) & (u_arr <= v_arr)
    gap = np.where(support, v_arr ** 2 - u_arr ** 2, 0.0)
    coef = math.exp(math.log(4.0) + n * math.log(math.pi * lam) - gammaln(ell) - gammaln(n - ell))
    value = coef * u_arr ** (2 * ell - 1) * v_arr * gap ** (n - ell - 1) * np.exp(-math.pi * lam * v_arr ** 2)
    value = np.where(support, value, 0.0)
    return float(value) if np.ndim(u) == 0 and np.ndim(v) == 0 else value


def expected_interference(lam: float, eta: float, r_L: ArrayLike) -> ArrayLike:
    """r_L より遠い点からの干渉の条件付き平均 2πλ/(η-2) · r_L^{2-η}"""
    if not eta > 2:
        raise ValidationError("eta", eta, "eta <= 2 では干渉の平均が発散します")
    r_arr = np.asarray(r_L, dtype=float)
    if np.any(r_arr <= 0):
        raise ValidationError("r_L", r_L, "r_L は正である必要があります")
    return _scalar_or_array(2.0 * math.pi * lam / (eta - 2.0) * r_arr ** (2.0 - eta), r_L)


def local_avg_sir_exact(geom: NetworkGeometry, ell: int, L: int, eta: float) -> float:
    """厳密な局所平均 SIR r_ℓ^{-η} / Σ_{j>L} r_j^{-η}"""
    if not 1 <= ell <= L:
        raise ValidationError("ell", ell, f"1 <= ell <= L={L} である必要があります")
    if not geom.has_interferers(L):
        raise ValidationError("geom", geom.count, f"幾何には L={L} より多くの点が必要です")
    r = geom.sorted_distances
    return float(r[ell - 1] ** (-eta) / np.sum(r[L:] ** (-eta)))


def local_avg_sir_approx(r_ell: ArrayLike, r_L: ArrayLike, lam: float, eta: float) -> ArrayLike:
    """近似局所平均 SIR（干渉を条件付き平均で置換）"""
    r_ell_arr = np.asarray(r_ell, dtype=float)
    r_L_arr = np.asarray(r_L, dtype=float)
    if np.any(r_ell_arr <= 0) or np.any(r_ell_arr > r_L_arr):
        raise ValidationError("r_ell", r_ell, "0 < r_ell <= r_L である必要があります")
    value = r_L_arr ** (eta - 2.0) / r_ell_arr ** eta * (eta - 2.0) / (2.0 * math.pi * lam)
    return float(value) if np.ndim(r_ell) == 0 and np.ndim(r_L) == 0 else value


@dataclass
class LocalSirSample:
    """局所平均 SIR の一括サンプル（行=試行, 列=ℓ）"""
    rho: np.ndarray
    rho_tilde: np.ndarray
    distances: np.ndarray
    resampled: int
    trials: int
    diagnostics: Dict[str, float] = field(default_factory=dict)


def _local_sir_chunk(seed: int, start: int, stop: int, config: SystemConfig, min_points: int):
    L, eta, lam = config.L, config.eta, config.lambda_density
    rho = np.empty((stop - start, L))
    rho_tilde = np.empty((stop - start, L))
    dist = np.empty((stop - start, L))
    resampled = 0
    for row, trial in enumerate(range(start, stop)):
        rng = trial_rng(seed, trial)
        geom = sample_ppp(config, rng)
        while geom.count < min_points:
            resampled += 1
            geom = sample_ppp(config, rng)
        r = geom.sorted_distances
        interference = np.sum(r[L:] ** (-eta))
        rho[row] = r[:L] ** (-eta) / interference
        rho_tilde[row] = local_avg_sir_approx(r[:L], r[L - 1], lam, eta)
        dist[row] = r[:L]
    return rho, rho_tilde, dist, resampled


def simulate_local_sir(config: SystemConfig, trials: int, seed: Optional[int] = None,
                       workers: int = 1, min_points: Optional[int] = None) -> LocalSirSample:
    """
    PPP 実現ごとの厳密 ρ_ℓ と近似 ρ̃_ℓ（ℓ = 1..L）

    点数が min_points（既定 L+1）未満の実現は再サンプルし、その回数を記録する。
    """
    seed = config.seed if seed is None else seed
    min_points = config.L + 1 if min_points is None else min_points
    chunks = run_trials(_local_sir_chunk, trials, seed, workers, args=(config, min_points))
    sample = LocalSirSample(
        rho=np.concatenate([c[0] for c in chunks]),
        rho_tilde=np.concatenate([c[1] for c in chunks]),
        distances=np.concatenate([c[2] for c in chunks]),
        resampled=sum(c[3] for c in chunks),
        trials=trials,
    )
    if sample.resampled:
        logger.info(f"点数不足による再サンプル: {sample.resampled} 回")
    return sample


@dataclass
class InterferenceEstimate:
    """r_L で条件付けた干渉の経験平均と Campbell 公式"""
    mean: float
    std_error: float
    campbell: float
    campbell_truncated: float
    trials: int

    @property
    def relative_error(self) -> float:
        return abs(self.mean - self.campbell) / self.campbell


def _interference_chunk(seed: int, start: int, stop: int, lam: float, eta: float,
                        r_L: float, outer: float):
    area = math.pi * (outer ** 2 - r_L ** 2)
    out = np.empty(stop - start)
    for row, trial in enumerate(range(start, stop)):
        rng = trial_rng(seed, trial)
        count = rng.poisson(lam * area)
        r = np.sqrt(r_L ** 2 + rng.random(count) * (outer ** 2 - r_L ** 2))
        out[row] = np.sum(r ** (-eta))
    return out


def conditioned_interference_mc(lam: float, eta: float, r_L: float, trials: int, seed: int,
                                outer_radius_km: float = 3.0, workers: int = 1) -> InterferenceEstimate:
    """r_L より外側の円環上の PPP による干渉 Σ_{j>L} r_j^{-η} のモンテカルロ平均"""
    if not 0 < r_L < outer_radius_km:
        raise ValidationError("r_L", r_L, "0 < r_L < 外径 である必要があります")
    samples = np.concatenate(run_trials(_interference_chunk, trials, seed, workers,
                                        args=(lam, eta, r_L, outer_radius_km)))
    campbell = expected_interference(lam, eta, r_L)
    truncated = campbell - expected_interference(lam, eta, outer_radius_km)
    return InterferenceEstimate(
        mean=float(samples.mean()),
        std_error=float(samples.std(ddof=1) / math.sqrt(trials)) if trials > 1 else float("nan"),
        campbell=campbell,
        campbell_truncated=truncated,
        trials=trials,
    )
