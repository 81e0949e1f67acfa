#!/usr/bin/env python3
"""
特殊関数カーネル
ガウス超幾何関数 ₂F₁・整数パラメータ上側不完全ガンマ・指数積分 E₁・
エルゴード対数モーメント 𝓘_M(μ) = E[ln(1 + μ𝒳_{2M})]

内部計算は nats。bit への変換（× log₂e）は呼び出し側の境界で行う。
"""
import sys
import math
from functools import lru_cache
from pathlib import Path
from typing import Union

import mpmath
import numpy as np
from scipy import special

sys.path.append(str(Path(__file__).parent.parent))

from scripts.error_handler import UnsupportedDomainError

LOG2E = 1.0 / math.log(2.0)

# Pfaff 変換後の級数を直接足す上限 |w|
SERIES_RADIUS = 0.8
SERIES_MAX_TERMS = 5000
# 𝓘_M の閉形式を使う 1/μ の上限（これを超えると交代和の桁落ちが大きい）
CLOSED_FORM_MAX_INV_MU = 1.0
LAGUERRE_NODES = 128

ArrayLike = Union[float, np.ndarray]


def _is_nonpositive_integer(c: float) -> bool:
    return c <= 0 and float(c).is_integer()


def _series(a: float, b: float, c: float, w: complex) -> complex:
    """₂F₁ の定義級数（|w| < 1）"""
    total = 1.0 + 0.0j
    term = 1.0 + 0.0j
    for n in range(SERIES_MAX_TERMS):
        term *= (a + n) * (b + n) / ((c + n) * (n + 1.0)) * w
        total += term
        if term == 0 or abs(term) <= 1e-17 * abs(total):
            return total
    raise UnsupportedDomainError("hyp2f1", "₂F₁ 級数が収束しませんでした", a=a, b=b, c=c, w=w)


def hyp2f1(a: float, b: float, c: float, z: complex) -> complex:
    """
    ガウス超幾何関数 ₂F₁(a, b; c; z)

    対応範囲は Re(z) <= 0 の複素数と z < 1 の実数。
    Re(z) < 1/2 では Pfaff 変換 w = z/(z-1) で縮小級数に写す。
    |w| が 1 に近い場合は mpmath で評価する。
    """
    if _is_nonpositive_integer(c):
        raise UnsupportedDomainError("hyp2f1", "c が非正整数です", a=a, b=b, c=c)
    z = complex(z)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise UnsupportedDomainError("hyp2f1", "z が有限値ではありません", z=z)
    if z.imag == 0.0 and z.real >= 1.0:
        raise UnsupportedDomainError("hyp2f1", "実数 z >= 1 は対応範囲外です", z=z)
    if z.imag != 0.0 and z.real > 0.0:
        raise UnsupportedDomainError("hyp2f1", "Re(z) > 0 の複素数 z は対応範囲外です", z=z)
    if z == 0:
        return 1.0 + 0.0j

    if z.real >= 0.5:
        # 0.5 <= z < 1 の実数
        if abs(z) <= SERIES_RADIUS:
            return _series(a, b, c, z)
        return complex(mpmath.hyp2f1(a, b, c, z))

    w = z / (z - 1.0)
    if abs(w) <= SERIES_RADIUS:
        return (1.0 - z) ** (-a) * _series(a, c - b, c, w)
    return complex(mpmath.hyp2f1(a, b, c, z))


def hyp2f1_real(a: float, b: float, c: float, z: float) -> float:
    """実引数の ₂F₁（実部を返す）"""
    return hyp2f1(a, b, c, z).real


def upper_incomplete_gamma(a: int, x: ArrayLike) -> ArrayLike:
    """Γ(a, x) = (a-1)! e^{-x} Σ_{i<a} x^i/i!（整数 a のみ）"""
    if isinstance(a, bool) or not float(a).is_integer() or a < 1:
        raise UnsupportedDomainError("upper_incomplete_gamma", "a は正の整数である必要があります", a=a)
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr < 0):
        raise UnsupportedDomainError("upper_incomplete_gamma", "x は 0 以上である必要があります", x=x)
    value = special.gammaincc(int(a), x_arr) * math.factorial(int(a) - 1)
    return float(value) if np.ndim(value) == 0 else value


def exp_integral_E1(x: ArrayLike) -> ArrayLike:
    """指数積分 E₁(x) = ∫₁^∞ t^{-1} e^{-xt} dt（x > 0）"""
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr <= 0):
        raise UnsupportedDomainError("exp_integral_E1", "x は正である必要があります", x=x)
    value = special.exp1(x_arr)
    return float(value) if np.ndim(value) == 0 else value


@lru_cache(maxsize=128)
def _laguerre_rule(M: int):
    """重み x^{M-1} e^{-x} / Γ(M) の一般化ガウス・ラゲール則"""
    nodes, weights = special.roots_genlaguerre(LAGUERRE_NODES, M - 1)
    weights = weights / weights.sum()
    return nodes, weights


def _log_moment_closed_form(M: int, inv_mu: np.ndarray) -> np.ndarray:
    """
    部分積分による閉形式
    𝓘_M = e^a E₁(a) Σ_{i<M} (-a)^i/i! + Σ_{i=1}^{M-1} Σ_{j=1}^{i} (j-1)!/i! · (-a)^{i-j},  a = 1/μ
    """
    a = inv_mu
    head = np.exp(a) * special.exp1(a)
    poly = np.zeros_like(a)
    tail = np.zeros_like(a)
    for i in range(M):
        poly += (-a) ** i / math.factorial(i)
        for j in range(1, i + 1):
            tail += math.factorial(j - 1) / math.factorial(i) * (-a) ** (i - j)
    return head * poly + tail


def _log_moment_quadrature(M: int, mu: np.ndarray) -> np.ndarray:
    nodes, weights = _laguerre_rule(M)
    return np.log1p(np.multiply.outer(mu, nodes)) @ weights


def ergodic_log_moment(M: int, mu: ArrayLike) -> ArrayLike:
    """
    𝓘_M(μ) = E[ln(1 + μ𝒳_{2M})] [nats]

    𝒳_{2M} は平均 M（単位平均指数分布 M 個の和）。μ = 0 では 0。
    """
    if M < 1:
        raise UnsupportedDomainError("ergodic_log_moment", "M は 1 以上である必要があります", M=M)
    mu_arr = np.atleast_1d(np.asarray(mu, dtype=float))
    if np.any(mu_arr < 0):
        raise UnsupportedDomainError("ergodic_log_moment", "μ は 0 以上である必要があります", mu=mu)

    out = np.zeros_like(mu_arr)
    finite = np.isfinite(mu_arr)
    out[~finite] = np.inf
    positive = finite & (mu_arr > 0)
    closed = positive & ((mu_arr >= 1.0 / CLOSED_FORM_MAX_INV_MU) | (int(M) == 1))
    quad = positive & ~closed
    if np.any(closed):
        out[closed] = _log_moment_closed_form(int(M), 1.0 / mu_arr[closed])
    if np.any(quad):
        out[quad] = _log_moment_quadrature(int(M), mu_arr[quad])

    return float(out[0]) if np.ndim(mu) == 0 else out.reshape(np.shape(mu))
