#!/usr/bin/env python3
"""
解析評価モジュール
1/ρ̃ のラプラス変換・オイラー級数による CDF 逆変換・SIR̃ の CDF・
平均スペクトル効率の下界（PZF / PZF-SIC）・解析的アウテージ確率

α₂ = 2/(η-2)。すべての量は λ に依存しない。
"""
import math
import sys
from dataclasses import dataclass
from math import comb, factorial
from pathlib import Path
from typing import Optional, Union

import numpy as np
from scipy import integrate, special

sys.path.append(str(Path(__file__).parent.parent))

from models.system_config import EulerInversionParams
from scripts.error_handler import ValidationError, NumericalError
from scripts.phy_sim import inverse_qlb_rate, RECEIVERS
from scripts.specfun import hyp2f1, hyp2f1_real, LOG2E
from scripts.utils import logger

ArrayLike = Union[float, np.ndarray]

DEFAULT_EULER = EulerInversionParams()

# レート積分の打ち切り [bit/s/Hz]（2^x - 1 が倍精度で溢れる手前、CCDF は無視できる）
RATE_INTEGRAL_CUTOFF = 1000.0


@dataclass
class InversionDiagnostics:
    """オイラー逆変換の診断情報"""
    evaluations: int = 0
    clamped: int = 0


def _alpha2(eta: float) -> float:
    if not eta > 2:
        raise ValidationError("eta", eta, "eta は 2 より大きい必要があります")
    return 2.0 / (eta - 2.0)


def _check_streams(ell: int, L: int, n_r: Optional[int] = None) -> None:
    if not 1 <= ell <= L:
        raise ValidationError("ell", ell, f"1 <= ell <= L={L} である必要があります")
    if n_r is not None and L > n_r:
        raise ValidationError("L", L, f"L <= n_r={n_r} である必要があります")


def _order_coefficient(ell: int, L: int) -> float:
    """Γ(L) / ((L-ℓ-1)!(ℓ-1)!)"""
    return factorial(L - 1) / (factorial(L - ell - 1) * factorial(ell - 1))


def stream_dof(ell: int, L: int, n_r: int, receiver: str = "pzf") -> int:
    """有効利得の自由度（PZF: n_r-L+1、PZF-SIC 第 ℓ 段: n_r-L+ℓ）"""
    if receiver not in RECEIVERS:
        raise ValidationError("receiver", receiver, f"receiver は {RECEIVERS} のいずれか")
    return n_r - L + 1 if receiver == "pzf" else n_r - L + ell


def laplace_inv_rho(s: complex, ell: int, L: int, eta: float) -> complex:
    """1/ρ̃_ℓ のラプラス変換 𝓛(s)（Re s >= 0）"""
    _check_streams(ell, L)
    alpha2 = _alpha2(eta)
    s = complex(s)
    if s.real < 0:
        raise ValidationError("s", s, "Re(s) >= 0 である必要があります")
    if ell == L:
        return (1.0 + alpha2 * s) ** (-L)
    z = -alpha2 * s
    span = L - ell - 1
    total = 0.0 + 0.0j
    for n in range(span + 1):
        eta_p = 2.0 * (n + ell) / eta
        total += (-1) ** n * comb(span, n) / (n + ell) * hyp2f1(L, eta_p, eta_p + 1.0, z)
    return _order_coefficient(ell, L) * total


def _euler_cdf_scalar(gamma: float, ell: int, L: int, eta: float,
                      params: EulerInversionParams, diagnostics: Optional[InversionDiagnostics]) -> float:
    if gamma <= 0:
        return 0.0
    A, B, G = params.A, params.B, params.G
    terms = np.empty(G + B + 1)
    for g in range(G + B + 1):
        tau = complex(A, 2.0 * math.pi * g) * gamma / 2.0
        terms[g] = (-1) ** g / params.weight(g) * (laplace_inv_rho(tau, ell, L, eta) / tau).real
    partial = np.cumsum(terms)
    euler_sum = sum(comb(B, b) * partial[G + b] for b in range(B + 1))
    value = 1.0 - gamma * math.exp(A / 2.0) / 2.0 ** B * euler_sum
    if diagnostics is not None:
        diagnostics.evaluations += 1
    if not 0.0 <= value <= 1.0:
        if diagnostics is not None:
            diagnostics.clamped += 1
        value = min(max(value, 0.0), 1.0)
    return value


def cdf_rho_approx(gamma: ArrayLike, ell: int, L: int, eta: float,
                   params: EulerInversionParams = DEFAULT_EULER,
                   diagnostics: Optional[InversionDiagnostics] = None) -> ArrayLike:
    """ρ̃_ℓ の CDF（ラプラス変換のオイラー級数逆変換、[0,1] にクランプ）"""
    _check_streams(ell, L)
    values = np.array([_euler_cdf_scalar(float(g), ell, L, eta, params, diagnostics)
                       for g in np.atleast_1d(gamma)])
    return float(values[0]) if np.ndim(gamma) == 0 else values.reshape(np.shape(gamma))


def cdf_rho_exact_last(gamma: ArrayLike, L: int, eta: float) -> ArrayLike:
    """ρ̃_L の厳密 CDF（1/ρ̃_L = α₂·Gamma(L,1) より Q(L, 1/(α₂γ))）"""
    alpha2 = _alpha2(eta)
    g = np.atleast_1d(np.asarray(gamma, dtype=float))
    out = np.zeros_like(g)
    pos = g > 0
    out[pos] = special.gammaincc(L, 1.0 / (alpha2 * g[pos]))
    return float(out[0]) if np.ndim(gamma) == 0 else out.reshape(np.shape(gamma))


def _hyp2f1_near_one(a: float, b: float, w: float, one_minus_w: float) -> float:
    """₂F₁(a, b; b+1; w)。1-w が極小のときはガウスの和公式 Γ(b+1)Γ(1-a)/Γ(b+1-a)"""
    if one_minus_w < 1e-12:
        return math.exp(special.gammaln(b + 1.0) + special.gammaln(1.0 - a) - special.gammaln(b + 1.0 - a))
    return hyp2f1_real(a, b, b + 1.0, w)


def _sir_ccdf_scalar(gamma: float, ell: int, L: int, dof: int, eta: float) -> float:
    """P(ρ̃_ℓ · 𝒳_{2·dof} > γ)"""
    if gamma <= 0:
        return 1.0
    a = _alpha2(eta) * gamma
    if not math.isfinite(a):
        return 0.0
    if ell == L:
        return sum(comb(m + L - 1, m) * math.exp(m * math.log(a) - (m + L) * math.log1p(a))
                   for m in range(dof))
    # a^m ₂F₁(m+L, η'+m; η'+m+1; -a) = w^m (1+a)^{-η'} ₂F₁(η'+1-L, η'+m; η'+m+1; w),  w = a/(1+a)
    w = a / (1.0 + a)
    span = L - ell - 1
    total = 0.0
    for n in range(span + 1):
        eta_p = 2.0 * (n + ell) / eta
        scale = math.exp(-eta_p * math.log1p(a))
        inner = 0.0
        for m in range(dof):
            inner += (comb(m + L - 1, m) * w ** m
                      * _hyp2f1_near_one(eta_p + 1.0 - L, eta_p + m, w, 1.0 / (1.0 + a)) / (eta_p + m))
        total += (-1) ** n * comb(span, n) * scale * inner
    return _order_coefficient(ell, L) * 2.0 / eta * total


def cdf_sir_tilde(gamma: ArrayLike, ell: int, L: int, n_r: int, eta: float,
                  receiver: str = "pzf") -> ArrayLike:
    """SIR̃_ℓ = ρ̃_ℓ·𝒳 の CDF（𝒳 の自由度は受信機で決まる）"""
    _check_streams(ell, L, n_r)
    dof = stream_dof(ell, L, n_r, receiver)
    values = np.array([min(max(1.0 - _sir_ccdf_scalar(float(g), ell, L, dof, eta), 0.0), 1.0)
                       for g in np.atleast_1d(gamma)])
    return float(values[0]) if np.ndim(gamma) == 0 else values.reshape(np.shape(gamma))


def _avg_rate_closed_form(L: int, dof: int, eta: float) -> float:
    z = 1.0 - _alpha2(eta)
    return sum(LOG2E / (m + L) * hyp2f1_real(1.0, L, m + L + 1.0, z) for m in range(dof))


def _avg_rate_quadrature(ell: int, L: int, dof: int, eta: float) -> float:
    """∫₀^∞ (1 - F(2^x - 1)) dx"""
    def integrand(x: float) -> float:
        if x > RATE_INTEGRAL_CUTOFF:
            return 0.0
        return _sir_ccdf_scalar(math.expm1(x * math.log(2.0)), ell, L, dof, eta)

    value, abserr, info, *rest = integrate.quad(integrand, 0.0, np.inf, epsabs=1e-8, epsrel=1e-8,
                                                limit=400, full_output=1)
    if rest and abserr > 1e-6:
        raise NumericalError("avg_rate_quadrature", f"積分が収束しませんでした: {rest[0]}",
                             ell=ell, L=L, dof=dof, eta=eta, abserr=abserr)
    return float(value)


def avg_rate_stream(ell: int, L: int, n_r: int, eta: float, receiver: str = "pzf",
                    method: str = "auto") -> float:
    """
    ストリーム ℓ の平均スペクトル効率の準下界 [bit/s/Hz]

    ℓ = L は ₂F₁ の有限和、ℓ < L は CCDF の数値積分。method="quadrature" で常に積分。
    """
    _check_streams(ell, L, n_r)
    dof = stream_dof(ell, L, n_r, receiver)
    if method not in ("auto", "quadrature"):
        raise ValidationError("method", method, "method は auto か quadrature")
    if ell == L and method == "auto":
        return _avg_rate_closed_form(L, dof, eta)
    return _avg_rate_quadrature(ell, L, dof, eta)


def avg_rate_pzf(L: int, n_r: int, eta: float) -> float:
    """PZF の最小ストリーム平均レートの下界（ℓ = L）"""
    return avg_rate_stream(L, L, n_r, eta)


def avg_rate_pzf_sic(L: int, n_r: int, eta: float) -> float:
    """PZF-SIC の最小ストリーム平均レートの下界（最終段, 自由度 n_r）"""
    if not 1 <= L <= n_r:
        raise ValidationError("L", L, f"1 <= L <= n_r={n_r} である必要があります")
    return _avg_rate_closed_form(L, n_r, eta)


def outage_analytic(R: ArrayLike, L: int, n_r: int, eta: float,
                    params: EulerInversionParams = DEFAULT_EULER, receiver: str = "pzf",
                    diagnostics: Optional[InversionDiagnostics] = None) -> ArrayLike:
    """
    アウテージ確率の準上界 F_{ρ̃_L}(C^{-1}(R))

    PZF は自由度 n_r-L+1、PZF-SIC は最終段のみに緩和した自由度 n_r。
    """
    if not 1 <= L <= n_r:
        raise ValidationError("L", L, f"1 <= L <= n_r={n_r} である必要があります")
    dof = stream_dof(L, L, n_r, receiver)
    values = []
    for rate in np.atleast_1d(R):
        rate = float(rate)
        if rate <= 0:
            values.append(0.0)
            continue
        threshold = inverse_qlb_rate(rate, dof)
        if math.isinf(threshold):
            logger.warning(f"R={rate} は準下界レートの数値上限を超えています（アウテージ 1）")
            values.append(1.0)
            continue
        values.append(cdf_rho_approx(threshold, L, L, eta, params, diagnostics))
    out = np.array(values)
    return float(out[0]) if np.ndim(R) == 0 else out.reshape(np.shape(R))
