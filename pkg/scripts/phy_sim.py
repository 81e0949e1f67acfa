#!/usr/bin/env python3
"""
物理層モンテカルロモジュール
レイリーチャネル・PZF / PZF-SIC 受信処理・ストリーム SIR とエルゴードレート・
準下界レート（qlb）とその逆関数・経験的アウテージ・SIC 復号順序の総当たり検証

レートはすべて bit/s/Hz（log₂）。ストリーム番号 ℓ と復号順序は 1 始まり。
"""
import math
import sys
from functools import lru_cache
from itertools import permutations
from pathlib import Path
from typing import List, NamedTuple, Optional, Sequence, Union

import numpy as np
from scipy import optimize, stats

sys.path.append(str(Path(__file__).parent.parent))

from models.curve_table import CurveTable
from models.estimates import StreamRateEstimate, OutageEstimate, SicOrderReport
from models.network_geometry import NetworkGeometry
from models.system_config import SystemConfig
from scripts.error_handler import ValidationError, RankDeficientChannelError
from scripts.geometry import sample_ppp, simulate_local_sir, LocalSirSample
from scripts.parallel import run_trials, trial_rng
from scripts.specfun import ergodic_log_moment, LOG2E
from scripts.utils import logger

ArrayLike = Union[float, np.ndarray]

CONDITION_LIMIT = 1e12
RHO_CEILING = 1e200
RECEIVERS = ("pzf", "pzf-sic")


class PzfFilters(NamedTuple):
    """単位ノルムのフィルタ q_ℓ（列）と有効利得 ‖h‡_ℓ‖^{-2}"""
    filters: np.ndarray
    gains: np.ndarray


def sample_channel(rng: np.random.Generator, n_r: int, n_tx: int,
                   batch: Optional[int] = None) -> np.ndarray:
    """CN(0,1) 要素のチャネル行列（batch 指定時は先頭に試行軸）"""
    shape = (n_r, n_tx) if batch is None else (batch, n_r, n_tx)
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def _pseudo_inverse(H_sub: np.ndarray) -> np.ndarray:
    """QR 分解による擬似逆行列 H (H^H H)^{-1} = Q R^{-H}"""
    Q, R = np.linalg.qr(H_sub)
    cond = np.linalg.cond(R)
    worst = float(np.max(cond))
    if not np.isfinite(worst) or worst > CONDITION_LIMIT:
        raise RankDeficientChannelError(worst, CONDITION_LIMIT)
    R_inv = np.linalg.inv(R)
    return Q @ np.conj(np.swapaxes(R_inv, -1, -2))


def pzf_filters(H: np.ndarray, L: int) -> PzfFilters:
    """先頭 L 列の擬似逆行列から PZF フィルタを構成（H は (..., n_r, J)）"""
    H = np.asarray(H, dtype=complex)
    n_r = H.shape[-2]
    if not 1 <= L <= min(n_r, H.shape[-1]):
        raise ValidationError("L", L, f"1 <= L <= min(n_r={n_r}, 列数={H.shape[-1]}) である必要があります")
    H_dag = _pseudo_inverse(H[..., :, :L])
    norms_sq = np.sum(np.abs(H_dag) ** 2, axis=-2)
    filters = H_dag / np.sqrt(norms_sq)[..., np.newaxis, :]
    return PzfFilters(filters=filters, gains=1.0 / norms_sq)


def _interference(q: np.ndarray, H: np.ndarray, distances: np.ndarray, L: int, eta: float) -> np.ndarray:
    """Σ_{j>L} r_j^{-η} |q^H h_j|²（q は (..., n_r)）"""
    H_far = H[..., :, L:]
    if H_far.shape[-1] == 0:
        return np.zeros(q.shape[:-1])
    proj = np.einsum("...i,...ij->...j", np.conj(q), H_far)
    return np.abs(proj) ** 2 @ (distances[L:] ** (-eta))


def _check_distances(H: np.ndarray, distances: Sequence[float], L: int) -> np.ndarray:
    r = np.asarray(distances, dtype=float)
    if r.size != H.shape[-1]:
        raise ValidationError("distances", r.size, f"距離の数がチャネルの列数 {H.shape[-1]} と一致しません")
    if r.size < L:
        raise ValidationError("distances", r.size, f"少なくとも L={L} 個の EN が必要です")
    return r


def _ratio(signal: np.ndarray, interference: np.ndarray) -> ArrayLike:
    with np.errstate(divide="ignore"):
        sir = np.where(interference > 0, signal / np.where(interference > 0, interference, 1.0), np.inf)
    return float(sir) if np.ndim(sir) == 0 else sir


def pzf_stream_sir(H: np.ndarray, distances: Sequence[float], ell: int, L: int, eta: float) -> ArrayLike:
    """
    PZF 受信後のストリーム ℓ の SIR

    L より遠い EN がない場合は +inf（常に復号可能）を返す。
    """
    H = np.asarray(H, dtype=complex)
    if not 1 <= ell <= L:
        raise ValidationError("ell", ell, f"1 <= ell <= L={L} である必要があります")
    r = _check_distances(H, distances, L)
    pzf = pzf_filters(H, L)
    q = pzf.filters[..., :, ell - 1]
    signal = r[ell - 1] ** (-eta) * pzf.gains[..., ell - 1]
    return _ratio(signal, _interference(q, H, r, L, eta))


def _check_order(order: Sequence[int], L: int) -> List[int]:
    order = [int(o) for o in order]
    if sorted(order) != list(range(1, L + 1)):
        raise ValidationError("order", order, f"order は 1..{L} の置換である必要があります")
    return order


def sic_stream_sir(H: np.ndarray, distances: Sequence[float], order: Sequence[int],
                   ell: int, L: int, eta: float) -> ArrayLike:
    """
    PZF-SIC の第 ℓ 段の SIR（ジーニー支援：order[0..ℓ-2] のストリームは除去済み）

    対象ストリームは order[ℓ-1]。残り L-ℓ+1 列の擬似逆行列の第 1 列で受信する。
    """
    H = np.asarray(H, dtype=complex)
    order = _check_order(order, L)
    if not 1 <= ell <= L:
        raise ValidationError("ell", ell, f"1 <= ell <= L={L} である必要があります")
    r = _check_distances(H, distances, L)
    remaining = [o - 1 for o in order[ell - 1:]]
    H_dag = _pseudo_inverse(H[..., :, remaining])
    column = H_dag[..., :, 0]
    norm_sq = np.sum(np.abs(column) ** 2, axis=-1)
    q = column / np.sqrt(norm_sq)[..., np.newaxis]
    signal = r[remaining[0]] ** (-eta) / norm_sq
    return _ratio(signal, _interference(q, H, r, L, eta))


def ergodic_rate_mc(geom: NetworkGeometry, ell: int, L: int, n_r: int, fading_trials: int,
                    rng: np.random.Generator, eta: float = 3.75, receiver: str = "pzf") -> StreamRateEstimate:
    """幾何を固定したフェージング平均 E[log₂(1 + SIR)] と標準誤差"""
    if fading_trials < 1:
        raise ValidationError("fading_trials", fading_trials, "フェージング試行は 1 以上である必要があります")
    if receiver not in RECEIVERS:
        raise ValidationError("receiver", receiver, f"receiver は {RECEIVERS} のいずれか")
    H = sample_channel(rng, n_r, geom.count, batch=fading_trials)
    if receiver == "pzf":
        sir = pzf_stream_sir(H, geom.sorted_distances, ell, L, eta)
    else:
        sir = sic_stream_sir(H, geom.sorted_distances, range(1, L + 1), ell, L, eta)
    rates = np.log2(1.0 + np.atleast_1d(sir))
    if np.all(np.isinf(rates)):
        logger.debug("L より遠い EN がないため常に復号可能（レート +inf）")
        return StreamRateEstimate(ell=ell, mean_rate=math.inf, std_error=0.0, trials=fading_trials)
    std_error = float(rates.std(ddof=1) / math.sqrt(fading_trials)) if fading_trials > 1 else math.nan
    return StreamRateEstimate(ell=ell, mean_rate=float(rates.mean()), std_error=std_error, trials=fading_trials)


def _stream_rate_chunk(seed: int, start: int, stop: int, config: SystemConfig,
                       fading_trials: int, receiver: str, min_points: int) -> np.ndarray:
    out = np.empty((stop - start, config.L))
    for row, trial in enumerate(range(start, stop)):
        rng = trial_rng(seed, trial)
        geom = sample_ppp(config, rng)
        while geom.count < min_points:
            geom = sample_ppp(config, rng)
        for ell in range(1, config.L + 1):
            estimate = ergodic_rate_mc(geom, ell, config.L, config.n_r, fading_trials, rng,
                                       eta=config.eta, receiver=receiver)
            out[row, ell - 1] = estimate.mean_rate
    return out


def stream_rate_profile_mc(config: SystemConfig, geometries: int, fading_trials: int,
                           seed: Optional[int] = None, workers: int = 1,
                           receiver: str = "pzf") -> List[StreamRateEstimate]:
    """
    ストリームごとのエルゴードレートの幾何平均（ℓ = 1..L）

    較正用に L+10 点未満の実現は再サンプルする。標準誤差は幾何間のばらつきから求める。
    """
    if receiver not in RECEIVERS:
        raise ValidationError("receiver", receiver, f"receiver は {RECEIVERS} のいずれか")
    seed = config.seed if seed is None else seed
    rates = np.concatenate(run_trials(_stream_rate_chunk, geometries, seed, workers,
                                      args=(config, fading_trials, receiver, config.L + 10)))
    std = rates.std(axis=0, ddof=1) if geometries > 1 else np.full(config.L, math.nan)
    return [
        StreamRateEstimate(ell=ell, mean_rate=float(rates[:, ell - 1].mean()),
                           std_error=float(std[ell - 1] / math.sqrt(geometries)), trials=geometries)
        for ell in range(1, config.L + 1)
    ]


def qlb_rate(rho_tilde: ArrayLike, n_r: int, L: int) -> ArrayLike:
    """PZF の準下界レート 𝓘_{n_r-L+1}(ρ̃)·log₂e"""
    if not 1 <= L <= n_r:
        raise ValidationError("L", L, f"1 <= L <= n_r={n_r} である必要があります")
    return ergodic_log_moment(n_r - L + 1, rho_tilde) * LOG2E


def qlb_rate_sic(rho_tilde: ArrayLike, n_r: int, L: int, ell: int) -> ArrayLike:
    """PZF-SIC 第 ℓ 段の準下界レート（自由度 n_r-L+ℓ）"""
    if not 1 <= L <= n_r:
        raise ValidationError("L", L, f"1 <= L <= n_r={n_r} である必要があります")
    if not 1 <= ell <= L:
        raise ValidationError("ell", ell, f"1 <= ell <= L={L} である必要があります")
    return ergodic_log_moment(n_r - L + ell, rho_tilde) * LOG2E


@lru_cache(maxsize=4096)
def _inverse_qlb_scalar(rate: float, dof: int) -> float:
    if rate <= 0:
        return 0.0

    def gap(rho: float) -> float:
        return ergodic_log_moment(dof, rho) * LOG2E - rate

    hi = 1.0
    while gap(hi) < 0:
        hi *= 4.0
        if hi > RHO_CEILING:
            return math.inf
    lo = hi / 4.0 if hi > 1.0 else 0.0
    return float(optimize.bisect(gap, lo, hi, xtol=1e-10, rtol=1e-13, maxiter=2000))


def inverse_qlb_rate(rate: ArrayLike, dof: int) -> ArrayLike:
    """
    準下界レートの逆関数：𝓘_dof(ρ)·log₂e = rate を満たす ρ

    括弧を 4 倍ずつ広げてから二分法。数値上限を超える rate には inf を返す。
    """
    if dof < 1:
        raise ValidationError("dof", dof, "自由度は 1 以上である必要があります")
    values = np.array([_inverse_qlb_scalar(float(r), int(dof)) for r in np.atleast_1d(rate)])
    return float(values[0]) if np.ndim(rate) == 0 else values.reshape(np.shape(rate))


def _wilson(k: int, n: int):
    ci = stats.binomtest(k, n).proportion_ci(confidence_level=0.95, method="wilson")
    return float(ci.low), float(ci.high)


def outage_from_sample(sample: LocalSirSample, rates: Sequence[float], receiver: str,
                       n_r: int, L: int) -> List[OutageEstimate]:
    """
    ρ̃ サンプルから R 格子のアウテージを評価

    PZF: ρ̃_L <= C^{-1}(R)。PZF-SIC: いずれかの段 ℓ で ρ̃_ℓ <= C_ℓ^{-1}(R)（恒等順序）。
    緩和版（ℓ = L のみ）も併せて返す。
    """
    if receiver not in RECEIVERS:
        raise ValidationError("receiver", receiver, f"receiver は {RECEIVERS} のいずれか")
    rho = sample.rho_tilde
    trials = rho.shape[0]
    results = []
    for rate in rates:
        if receiver == "pzf":
            threshold = inverse_qlb_rate(rate, n_r - L + 1)
            outage = rho[:, L - 1] <= threshold
            relaxed = outage
        else:
            thresholds = np.array([inverse_qlb_rate(rate, n_r - L + ell) for ell in range(1, L + 1)])
            outage = np.any(rho <= thresholds[np.newaxis, :], axis=1)
            relaxed = rho[:, L - 1] <= thresholds[L - 1]
        k = int(np.count_nonzero(outage))
        low, high = _wilson(k, trials)
        results.append(OutageEstimate(
            rate=float(rate), receiver=receiver, probability=k / trials,
            ci_low=low, ci_high=high, trials=trials,
            relaxed_probability=float(np.count_nonzero(relaxed)) / trials,
            resampled=sample.resampled,
        ))
    return results


def outage_curve_mc(config: SystemConfig, rates: Sequence[float], receiver: str,
                    geometry_trials: int, seed: Optional[int] = None,
                    workers: int = 1) -> List[OutageEstimate]:
    """同一の幾何サンプルで R 格子全体の経験的アウテージを評価"""
    sample = simulate_local_sir(config, geometry_trials, seed, workers)
    return outage_from_sample(sample, rates, receiver, config.n_r, config.L)


def outage_mc(config: SystemConfig, R: float, receiver: str, geometry_trials: int,
              seed: Optional[int] = None, workers: int = 1) -> OutageEstimate:
    """経験的アウテージ確率とウィルソン 95% 信頼区間"""
    return outage_curve_mc(config, [R], receiver, geometry_trials, seed, workers)[0]


def per_trial_table(sample: LocalSirSample, n_r: int, L: int, receiver: str = "pzf",
                    metadata: Optional[dict] = None) -> CurveTable:
    """試行ごとの記録（trial, ℓ, r_ℓ, ρ̃_ℓ, 準下界レート）"""
    rows = []
    for trial in range(sample.rho_tilde.shape[0]):
        for ell in range(1, L + 1):
            rho = sample.rho_tilde[trial, ell - 1]
            rate = qlb_rate(rho, n_r, L) if receiver == "pzf" else qlb_rate_sic(rho, n_r, L, ell)
            rows.append((trial * L + ell - 1, trial, ell, sample.distances[trial, ell - 1], rho, rate))
    return CurveTable(["record", "trial", "ell", "r_ell", "rho_tilde", "rate"], rows, dict(metadata or {}))


def _dominance_family(L: int, rng: np.random.Generator) -> np.ndarray:
    """
    支配順序つき非減少関数族の値表 T[i, j] = f_i(x_j)（x_1 >= ... >= x_L）

    f_1 は非減少、f_{i+1} = f_i + 非負かつ非減少な増分。一部の族は定数関数。
    """
    if rng.random() < 0.1:
        return np.full((L, L), rng.random())
    # x 昇順での増分を累積し、降順の x に合わせて反転
    base = np.cumsum(rng.exponential(size=L) * (rng.random(L) < 0.8))[::-1]
    table = np.empty((L, L))
    table[0] = base
    for i in range(1, L):
        increment = np.cumsum(rng.exponential(size=L) * (rng.random(L) < 0.5))[::-1]
        table[i] = table[i - 1] + rng.random() * increment
    return table


def _qlb_family(L: int, rng: np.random.Generator) -> np.ndarray:
    n_r = int(rng.integers(L, L + 9))
    x = np.sort(rng.lognormal(mean=0.0, sigma=2.0, size=L))[::-1]
    return np.vstack([qlb_rate_sic(x, n_r, L, ell) for ell in range(1, L + 1)])


def verify_sic_order_theorem(L: int, trials: int, rng: np.random.Generator,
                             qlb_every: int = 4, tolerance: float = 1e-12) -> SicOrderReport:
    """
    全 L! 通りの順序で min_ℓ f_ℓ(x_{π(ℓ)}) の最大値が恒等順序で達成されるか総当たり検証

    qlb_every 回に 1 回は実際の qlb_rate_sic 族を使う。
    """
    if not 1 <= L <= 6:
        raise ValidationError("L", L, "総当たり検証は 1 <= L <= 6 に限ります")
    perms = np.array(list(permutations(range(L))))
    rows = np.arange(L)
    report = SicOrderReport(L=L, instances=trials)
    for instance in range(trials):
        use_qlb = qlb_every > 0 and instance % qlb_every == 0
        table = _qlb_family(L, rng) if use_qlb else _dominance_family(L, rng)
        mins = table[rows, perms].min(axis=1)
        identity = float(mins[0])
        best = int(np.argmax(mins))
        if mins[best] > identity + tolerance * max(1.0, abs(identity)):
            report.counterexamples.append({
                "instance": instance,
                "family": "qlb_rate_sic" if use_qlb else "random",
                "identity_min": identity,
                "best_min": float(mins[best]),
                "best_order": [int(p) + 1 for p in perms[best]],
            })
    if report.counterexamples:
        logger.warning(f"SIC 復号順序の反例: {len(report.counterexamples)} 件 (L={L})")
    return report
