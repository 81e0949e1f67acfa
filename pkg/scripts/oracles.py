#!/usr/bin/env python3
"""
独立オラクル
閉形式の評価器とは別経路（距離 PDF 上の適応積分・モンテカルロ・scipy.stats）で
同じ量を計算し、検証スイートとテストから参照する。
"""
import math
import sys
from pathlib import Path
from typing import Sequence, Tuple

import numpy as np
from scipy import integrate, special, stats

sys.path.append(str(Path(__file__).parent.parent))

from scripts.geometry import distance_pdf, joint_distance_pdf, expected_interference

# 積分を打ち切る πλv² の上限（Gamma(L) の裾は無視できる）
TAIL_MASS = 150.0


def _outer_limit(lam: float) -> float:
    return math.sqrt(TAIL_MASS / (math.pi * lam))


def _inverse_rho(u: float, v: float, lam: float, eta: float) -> float:
    """1/ρ̃ = u^η · E[I | r_L = v]（u = 0 では 0）"""
    if u <= 0:
        return 0.0
    return u ** eta * expected_interference(lam, eta, v)


def _expect_over_distances(func, ell: int, L: int, lam: float) -> float:
    """E[func(ρ̃_ℓ)] を (r_ℓ, r_L) の同時 PDF 上で積分"""
    v_max = _outer_limit(lam)
    if ell == L:
        value, _ = integrate.quad(lambda v: func(v, v) * distance_pdf(L, lam, v),
                                  0.0, v_max, epsabs=1e-13, epsrel=1e-12, limit=400)
        return value
    value, _ = integrate.dblquad(
        lambda u, v: func(u, v) * joint_distance_pdf(ell, L, lam, u, v),
        0.0, v_max, lambda v: 0.0, lambda v: v, epsabs=1e-13, epsrel=1e-11,
    )
    return value


def laplace_quadrature(s: complex, ell: int, L: int, eta: float, lam: float = 1.0) -> complex:
    """𝓛_{1/ρ̃_ℓ}(s) = E[e^{-s/ρ̃_ℓ}] の適応積分"""
    s = complex(s)

    def inv_rho(u: float, v: float) -> float:
        return _inverse_rho(u, v, lam, eta)

    real = _expect_over_distances(lambda u, v: math.exp(-s.real * inv_rho(u, v)) * math.cos(s.imag * inv_rho(u, v)),
                                  ell, L, lam)
    if s.imag == 0:
        return complex(real, 0.0)
    imag = _expect_over_distances(lambda u, v: -math.exp(-s.real * inv_rho(u, v)) * math.sin(s.imag * inv_rho(u, v)),
                                  ell, L, lam)
    return complex(real, imag)


def cdf_sir_quadrature(gamma: float, ell: int, L: int, dof: int, eta: float, lam: float = 1.0) -> float:
    """P(ρ̃_ℓ·𝒳_{2·dof} <= γ) = 1 - E[Q(dof, γ/ρ̃_ℓ)] の適応積分"""
    def survival(u: float, v: float) -> float:
        return special.gammaincc(dof, gamma * _inverse_rho(u, v, lam, eta))

    return 1.0 - _expect_over_distances(survival, ell, L, lam)


def incomplete_gamma_quadrature(a: int, x: float) -> float:
    """∫_x^∞ t^{a-1} e^{-t} dt"""
    value, _ = integrate.quad(lambda t: t ** (a - 1) * math.exp(-t), x, np.inf, epsabs=1e-14, epsrel=1e-13)
    return value


def exp_integral_quadrature(x: float) -> float:
    """∫₁^∞ t^{-1} e^{-xt} dt"""
    value, _ = integrate.quad(lambda t: math.exp(-x * t) / t, 1.0, np.inf, epsabs=1e-15, epsrel=1e-13)
    return value


def log_moment_quadrature(M: int, mu: float) -> float:
    """E[ln(1+μX)], X ~ Gamma(M, 1) の適応積分"""
    value, _ = integrate.quad(lambda x: math.log1p(mu * x) * stats.gamma.pdf(x, M),
                              0.0, np.inf, epsabs=1e-13, epsrel=1e-12, limit=400)
    return value


def log_moment_mc(M: int, mu: float, samples: int, rng: np.random.Generator) -> Tuple[float, float]:
    """E[ln(1+μX)] のモンテカルロ推定（平均, 標準誤差）"""
    values = np.log1p(mu * rng.gamma(M, 1.0, size=samples))
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(samples))


def exponential_law_cdf(gamma: np.ndarray) -> np.ndarray:
    """1/ρ̃ が単位平均指数分布のときの CDF e^{-1/γ}"""
    g = np.asarray(gamma, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(g > 0, np.exp(-1.0 / np.where(g > 0, g, 1.0)), 0.0)


def empirical_cdf(samples: np.ndarray, grid: Sequence[float]) -> np.ndarray:
    """格子上の経験 CDF"""
    ordered = np.sort(np.asarray(samples, dtype=float))
    return np.searchsorted(ordered, np.asarray(grid, dtype=float), side="right") / ordered.size


def max_cdf_deviation(samples: np.ndarray, grid: Sequence[float], cdf_values: Sequence[float]) -> float:
    """経験 CDF と解析 CDF の格子上の最大絶対偏差"""
    return float(np.max(np.abs(empirical_cdf(samples, grid) - np.asarray(cdf_values, dtype=float))))


def ks_two_sample(a: np.ndarray, b: np.ndarray, quantile_range: Tuple[float, float] = (0.0, 1.0)) -> float:
    """2 標本 KS 距離（quantile_range で a の分位点範囲に制限可能）"""
    lo, hi = np.quantile(a, quantile_range)
    grid = np.concatenate([a, b])
    grid = np.sort(grid[(grid >= lo) & (grid <= hi)])
    if quantile_range == (0.0, 1.0):
        return float(stats.ks_2samp(a, b).statistic)
    return float(np.max(np.abs(empirical_cdf(a, grid) - empirical_cdf(b, grid))))


def ks_chi_square(samples: np.ndarray, dof: int) -> float:
    """単位平均指数 dof 個の和（Gamma(dof,1)）に対する KS 距離"""
    return float(stats.kstest(samples, stats.gamma(dof).cdf).statistic)
