#!/usr/bin/env python3
"""
マクロダイバーシティ・プランナー
配信遅延・目標アウテージでのレート・L×R の最大化による L* の選択
"""
import math
import sys
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
from scipy import optimize

sys.path.append(str(Path(__file__).parent.parent))

from models.curve_table import CurveTable
from models.planner_result import PlannerRecord, PlannerResult, OBJECTIVES
from models.system_config import SystemConfig, EulerInversionParams
from scripts.analysis import avg_rate_pzf, avg_rate_pzf_sic, outage_analytic, DEFAULT_EULER
from scripts.error_handler import ValidationError, UnreachableTargetError
from scripts.geometry import simulate_local_sir
from scripts.phy_sim import outage_from_sample, qlb_rate, qlb_rate_sic, RECEIVERS
from scripts.utils import logger, performance_monitor

RATE_CEILING = 64.0


def delivery_latency(L: int, R: float, F: float, w: float, K: int, mu: Union[Fraction, float]) -> float:
    """配信遅延 (1/(LR))·(F/w)·K(1-μ)/(1+Kμ) [s]"""
    mu = float(mu)
    for name, value in (("L", L), ("R", R), ("F", F), ("w", w), ("K", K)):
        if not value > 0:
            raise ValidationError(name, value, f"{name} は正である必要があります")
    if not 0 < mu <= 1:
        raise ValidationError("mu", mu, "μ は 0 < μ <= 1 である必要があります")
    return (1.0 / (L * R)) * (F / w) * K * (1.0 - mu) / (1.0 + K * mu)


def avg_rate(L: int, n_r: int, eta: float, receiver: str) -> float:
    """受信機に応じた最小ストリーム平均レート"""
    if receiver not in RECEIVERS:
        raise ValidationError("receiver", receiver, f"receiver は {RECEIVERS} のいずれか")
    return avg_rate_pzf(L, n_r, eta) if receiver == "pzf" else avg_rate_pzf_sic(L, n_r, eta)


def rate_at_outage(L: int, n_r: int, eta: float, target_outage: float, receiver: str = "pzf",
                   params: EulerInversionParams = DEFAULT_EULER) -> float:
    """解析的アウテージが target_outage となる R を二分法で求める"""
    if not 0 < target_outage < 1:
        raise ValidationError("target_outage", target_outage, "目標アウテージは (0,1) の範囲")

    def gap(rate: float) -> float:
        return outage_analytic(rate, L, n_r, eta, params, receiver) - target_outage

    hi = 1.0
    while gap(hi) < 0:
        hi *= 2.0
        if hi > RATE_CEILING:
            raise UnreachableTargetError(
                "target_outage", target_outage,
                f"R <= {RATE_CEILING} bit/s/Hz の範囲で目標アウテージ {target_outage} に到達しません"
            )
    lo = hi / 2.0 if hi > 1.0 else 0.0
    return float(optimize.bisect(gap, lo, hi, xtol=1e-6, maxiter=200))


def optimize_L(n_r: int, eta: float, objective: str = "average-rate", receiver: str = "pzf",
               target_outage: float = 0.1, config: Optional[SystemConfig] = None,
               params: EulerInversionParams = DEFAULT_EULER) -> PlannerResult:
    """
    L = 1..n_r を掃引し L·R を最大化する L* を選ぶ

    同値の場合は小さい L を優先。遅延は config の K, μ, F, w から計算する。
    """
    if n_r < 1:
        raise ValidationError("n_r", n_r, "n_r は 1 以上である必要があります")
    if objective not in OBJECTIVES:
        raise ValidationError("objective", objective, f"objective は {OBJECTIVES} のいずれか")
    config = config or SystemConfig(n_r=n_r, eta=eta, L=1)
    performance_monitor.start_timing("optimize_L")

    records: List[PlannerRecord] = []
    for L in range(1, n_r + 1):
        average = avg_rate(L, n_r, eta, receiver)
        try:
            r_target = rate_at_outage(L, n_r, eta, target_outage, receiver, params)
        except UnreachableTargetError as e:
            if objective == "target-outage":
                raise
            logger.warning(f"L={L}: {e}")
            r_target = None
        rate = average if objective == "average-rate" else r_target
        records.append(PlannerRecord(
            L=L,
            R_at_target_outage=r_target,
            product_LR=L * rate,
            avg_rate=average,
            latency_s=delivery_latency(L, rate, config.file_bits, config.bandwidth_w, config.K, config.mu),
        ))

    best = records[0]
    for record in records[1:]:
        if record.product_LR > best.product_LR * (1.0 + 1e-12):
            best = record

    performance_monitor.end_timing("optimize_L")
    logger.info(f"L* = {best.L}（{receiver}, {objective}, n_r={n_r}, η={eta}, L·R={best.product_LR:.4f}）")
    return PlannerResult(
        records=records, selected_L=best.L, objective=objective, receiver=receiver,
        metadata={
            "n_r": n_r, "eta": eta, "target_outage": target_outage,
            "rule_of_thumb_L": max(1, n_r // 2) if receiver == "pzf" else n_r,
        },
    )


def lr_product_curve(n_r: int, eta: float, metadata: Optional[Dict] = None) -> CurveTable:
    """L × 平均レートの曲線（PZF と PZF-SIC）"""
    Ls = list(range(1, n_r + 1))
    return CurveTable.from_columns(
        "L", Ls,
        {
            "LR_pzf": [L * avg_rate_pzf(L, n_r, eta) for L in Ls],
            "LR_pzf_sic": [L * avg_rate_pzf_sic(L, n_r, eta) for L in Ls],
        },
        metadata,
    )


def outage_vs_lr_curve(L_list: Sequence[int], n_r: int, eta: float, products: Sequence[float],
                       receiver: str = "pzf", params: EulerInversionParams = DEFAULT_EULER,
                       metadata: Optional[Dict] = None) -> CurveTable:
    """L·R を横軸とした解析的アウテージ（L ごとの列）"""
    ys = {}
    for L in L_list:
        rates = np.asarray(products, dtype=float) / L
        ys[f"outage_L{L}"] = list(outage_analytic(rates, L, n_r, eta, params, receiver))
    return CurveTable.from_columns("LR", list(products), ys, metadata)


def verify_selection_mc(result: PlannerResult, config: SystemConfig, trials: int,
                        seed: Optional[int] = None, workers: int = 1) -> Dict[str, object]:
    """
    選択された L* と隣接する L をモンテカルロで再評価

    average-rate は ρ̃_L の準下界レートの標本平均、target-outage は R_at_target での経験的アウテージ。
    """
    n_r = result.metadata.get("n_r", config.n_r)
    eta = result.metadata.get("eta", config.eta)
    candidates = sorted({L for L in (result.selected_L - 1, result.selected_L, result.selected_L + 1)
                         if 1 <= L <= n_r})
    scores: Dict[int, float] = {}
    for L in candidates:
        cfg = config.replace(L=L, n_r=n_r, eta=eta)
        sample = simulate_local_sir(cfg, trials, seed, workers)
        if result.objective == "average-rate":
            rho_last = sample.rho_tilde[:, L - 1]
            rates = qlb_rate(rho_last, n_r, L) if result.receiver == "pzf" else qlb_rate_sic(rho_last, n_r, L, L)
            scores[L] = float(L * np.mean(rates))
        else:
            record = result.record_for(L)
            estimate = outage_from_sample(sample, [record.R_at_target_outage], result.receiver, n_r, L)[0]
            scores[L] = estimate.relaxed_probability if result.receiver == "pzf-sic" else estimate.probability
    if result.objective == "average-rate":
        best = max(candidates, key=lambda L: (scores[L], -L))
        agrees = best == result.selected_L
    else:
        target = result.metadata.get("target_outage", 0.1)
        agrees = all(math.isclose(scores[L], target, abs_tol=0.02) for L in candidates)
    return {"scores": scores, "agrees": agrees, "trials": trials}
