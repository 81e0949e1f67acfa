#!/usr/bin/env python3
"""
オラクル検証スイート
閉形式評価器・モンテカルロ・符号化層を独立オラクルと突き合わせ、
ステージごとの結果を JSON レポートとテキスト要約に残す
"""
import math
import sys
import time
from datetime import datetime
from fractions import Fraction
from itertools import combinations, product
from math import comb
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import mpmath
import numpy as np
from jinja2 import Template
from scipy import integrate, stats

sys.path.append(str(Path(__file__).parent.parent))

from models.system_config import SystemConfig, EulerInversionParams
from scripts import oracles
from scripts.analysis import (
    DEFAULT_EULER, InversionDiagnostics, avg_rate_pzf, avg_rate_pzf_sic, avg_rate_stream,
    cdf_rho_approx, cdf_rho_exact_last, cdf_sir_tilde, laplace_inv_rho, outage_analytic,
)
from scripts.error_handler import ValidationError, validate_required_fields
from scripts.coded_caching import (
    build_multicast_codeword, codeword_length_bits, place_caches, random_library, recover_file,
)
from scripts.geometry import (
    conditioned_interference_mc, distance_pdf, joint_distance_pdf, local_avg_sir_approx,
    sample_ppp, simulate_local_sir,
)
from scripts.mds_codec import (
    deserialize_blocks, encode_bytes, mds_decode, serialize_block_set,
)
from scripts.parallel import trial_rng
from scripts.phy_sim import (
    ergodic_rate_mc, outage_from_sample, per_trial_table, pzf_filters, qlb_rate,
    sample_channel, verify_sic_order_theorem,
)
from scripts.planner import lr_product_curve, optimize_L, rate_at_outage
from scripts.specfun import ergodic_log_moment, exp_integral_E1, hyp2f1, upper_incomplete_gamma
from scripts.utils import logger, ensure_output_dir, save_json_safely, CODE_VERSION

TEMPLATE_DIR = Path(__file__).parent.parent / "templates"

StageResult = Dict[str, Any]

# 厳密 ρ と近似 ρ̃ の KS 距離の許容値（L=4, n_r=8 の実測最大は ℓ=4 で約 0.057）
APPROXIMATION_KS_TOLERANCE = 0.07


def _dkw_tolerance(base: float, n: int) -> float:
    """基準許容誤差と DKW 99% 帯の大きい方"""
    return max(base, 1.63 / math.sqrt(n))


class OracleSuite:
    """validate コマンドのステージ実行クラス"""

    def __init__(self, config: Optional[SystemConfig] = None, trials: int = 100_000,
                 workers: int = 1, out_dir: Optional[str] = None,
                 params: EulerInversionParams = DEFAULT_EULER, quick: bool = False):
        """初期化

        Args:
            config: 基準となるシステム設定（λ, η, シード）
            trials: 幾何モンテカルロの試行回数
            workers: 並列ワーカー数
            out_dir: レポート出力先
            params: オイラー逆変換パラメータ
            quick: 縮小規模で実行するか（許容誤差は標本数に応じて広がる）
        """
        self.config = config or SystemConfig()
        self.seed = self.config.seed
        self.trials = trials
        self.workers = workers
        self.params = params
        self.quick = quick
        self.output_dir = ensure_output_dir(out_dir)
        self.execution_id = datetime.now().strftime('%Y%m%d_%H%M%S')

        self.suite_state: Dict[str, Any] = {
            "execution_id": self.execution_id,
            "code_version": CODE_VERSION,
            "seed": self.seed,
            "trials": trials,
            "quick": quick,
            "start_time": None,
            "end_time": None,
            "stages": {},
            "overall_status": "pending",
        }

        self.stages: List[Tuple[str, Callable[[], StageResult]]] = [
            ("specfun", self.check_specfun),
            ("coded_caching", self.check_coded_caching),
            ("mds", self.check_mds),
            ("distance_pdfs", self.check_distance_pdfs),
            ("campbell", self.check_campbell),
            ("laplace_quadrature", self.check_laplace_quadrature),
            ("sir_cdf_quadrature", self.check_sir_cdf_quadrature),
            ("exponential_inversion", self.check_exponential_inversion),
            ("avg_rate", self.check_avg_rate),
            ("rho_cdf_mc", self.check_rho_cdf_mc),
            ("exact_vs_approx", self.check_exact_vs_approx),
            ("chi_square_laws", self.check_chi_square_laws),
            ("outage", self.check_outage),
            ("sic_order", self.check_sic_order),
            ("planner", self.check_planner),
            ("determinism", self.check_determinism),
            ("per_stream_bounds", self.check_per_stream_bounds),
        ]

    # ------------------------------------------------------------------
    # 実行制御
    # ------------------------------------------------------------------

    def _scaled(self, full: int, quick: int) -> int:
        return quick if self.quick else full

    def execute_stage(self, stage_name: str, func: Callable[[], StageResult]) -> bool:
        """ステージ実行"""
        logger.info(f"ステージ開始: {stage_name}")
        stage_start = time.time()
        try:
            result = func()
            validate_required_fields(result, ["passed"])
            passed = bool(result.pop("passed"))
            status = "passed" if passed else "failed"
            self.suite_state["stages"][stage_name] = {
                "status": status,
                "duration": round(time.time() - stage_start, 3),
                "details": result,
            }
            if passed:
                logger.info(f"ステージ完了: {stage_name} ({time.time() - stage_start:.1f}秒)")
            else:
                logger.error(f"ステージ失敗: {stage_name} - {result}")
            return passed
        except Exception as e:
            logger.error(f"ステージ実行エラー: {stage_name} - {e}")
            self.suite_state["stages"][stage_name] = {
                "status": "error",
                "error": f"{type(e).__name__}: {e}",
                "duration": round(time.time() - stage_start, 3),
            }
            return False

    def run_all(self, only: Optional[Sequence[str]] = None) -> bool:
        """全ステージ（または only で指定したステージ）を実行"""
        names = [name for name, _ in self.stages]
        if only:
            unknown = sorted(set(only) - set(names))
            if unknown:
                raise ValidationError("stages", unknown, f"未知のステージ: {', '.join(unknown)}")
        self.suite_state["start_time"] = datetime.now().isoformat()
        logger.info(f"🔬 検証スイート開始: {self.execution_id}")

        all_passed = True
        try:
            for name, func in self.stages:
                if only and name not in only:
                    continue
                all_passed &= self.execute_stage(name, func)
        finally:
            self.suite_state["end_time"] = datetime.now().isoformat()
            self.suite_state["overall_status"] = "passed" if all_passed else "failed"
            self.save_suite_report()

        if all_passed:
            logger.info("🎉 全ステージ合格")
        else:
            logger.error(f"❌ 不合格ステージ: {', '.join(self.failed_stages())}")
        return all_passed

    def failed_stages(self) -> List[str]:
        return [name for name, state in self.suite_state["stages"].items() if state["status"] != "passed"]

    def save_suite_report(self) -> None:
        """スイートレポート保存"""
        report_path = self.output_dir / f"validate_report_{self.execution_id}.json"
        save_json_safely(self.suite_state, str(report_path))
        save_json_safely(self.suite_state, str(self.output_dir / "validate_report_latest.json"))

    def render_summary(self) -> str:
        """テキスト要約（jinja2）"""
        template = Template((TEMPLATE_DIR / "validate_summary.txt.jinja").read_text(encoding="utf-8"))
        return template.render(state=self.suite_state, failed=self.failed_stages())

    # ------------------------------------------------------------------
    # 特殊関数・符号化層
    # ------------------------------------------------------------------

    def check_specfun(self) -> StageResult:
        rng = np.random.default_rng([self.seed, 1])
        mpmath.mp.dps = 30
        reference = complex(mpmath.hyp2f1(4, 0.8, 1.8, mpmath.mpc(-3, 2)))
        mpmath.mp.dps = 15
        pfaff_err = abs(hyp2f1(4, 0.8, 1.8, -3 + 2j) - reference) / abs(reference)
        ln2_err = abs(hyp2f1(1, 1, 2, -1.0).real - math.log(2.0))

        worst_contiguous = 0.0
        for _ in range(50):
            a, b = rng.uniform(1.0, 5.0), rng.uniform(0.2, 3.0)
            c = b + 1.0
            z = complex(-rng.exponential(3.0), rng.normal(0.0, 3.0))
            # (c-a)F(a-1) + (2a-c+(b-a)z)F(a) + a(z-1)F(a+1) = 0
            terms = ((c - a) * hyp2f1(a - 1, b, c, z),
                     (2 * a - c + (b - a) * z) * hyp2f1(a, b, c, z),
                     a * (z - 1) * hyp2f1(a + 1, b, c, z))
            scale = max(max(abs(term) for term in terms), 1e-300)
            worst_contiguous = max(worst_contiguous, abs(sum(terms)) / scale)

        gamma_err = abs(upper_incomplete_gamma(3, 2.5) - oracles.incomplete_gamma_quadrature(3, 2.5))
        e1_err = abs(exp_integral_E1(1.0) - oracles.exp_integral_quadrature(1.0))
        moment_err = abs(ergodic_log_moment(1, 1.0) - oracles.log_moment_quadrature(1, 1.0))

        samples = self._scaled(10_000_000, 1_000_000)
        mc_mean, mc_se = oracles.log_moment_mc(3, 0.7, samples, rng)
        mc_gap = abs(ergodic_log_moment(3, 0.7) - mc_mean)

        return {
            "passed": (pfaff_err <= 1e-10 and ln2_err <= 1e-12 and worst_contiguous <= 1e-8
                       and gamma_err <= 1e-12 and e1_err <= 1e-12 and moment_err <= 1e-10
                       and mc_gap <= 3 * mc_se),
            "pfaff_relative_error": pfaff_err,
            "ln2_error": ln2_err,
            "contiguous_relation_worst": worst_contiguous,
            "incomplete_gamma_error": gamma_err,
            "e1_error": e1_err,
            "log_moment_error": moment_err,
            "log_moment_mc_gap": mc_gap,
            "log_moment_mc_se": mc_se,
        }

    def check_coded_caching(self) -> StageResult:
        rng = np.random.default_rng([self.seed, 2])
        cases = 0
        failures: List[str] = []
        for K in range(1, 6):
            for N in range(1, 4):
                for t in range(1, K + 1):
                    M = Fraction(N * t, K)
                    F = 8 * comb(K, t) * 2
                    library = random_library(N, F, rng)
                    assignment = place_caches(K, N, M, library)
                    if any(assignment.cached_bits(k) != M * F for k in range(K)):
                        failures.append(f"cache size K={K} N={N} t={t}")
                    expected_bits = codeword_length_bits(K, Fraction(t, K), F)
                    for demand in product(range(N), repeat=K):
                        codeword = build_multicast_codeword(demand, assignment, library)
                        cases += 1
                        if codeword.total_bits != expected_bits:
                            failures.append(f"length K={K} N={N} t={t} d={demand}")
                        for k in range(K):
                            if recover_file(k, codeword, assignment, demand) != library.files[demand[k]]:
                                failures.append(f"recover K={K} N={N} t={t} d={demand} k={k}")
        return {"passed": not failures, "demand_vectors": cases, "failures": failures[:20]}

    def check_mds(self) -> StageResult:
        rng = np.random.default_rng([self.seed, 3])
        subsets = 0
        failures: List[str] = []
        for N_E in range(1, 9):
            for L in range(1, N_E + 1):
                n_bytes = 3 * L + 1
                payload = rng.integers(0, 256, n_bytes, dtype=np.uint8).tobytes()
                block_set = encode_bytes(payload, 8 * n_bytes, L, N_E)
                padded = b"".join(block_set.blocks[:L])
                if padded[:n_bytes] != payload or any(padded[n_bytes:]):
                    failures.append(f"systematic L={L} N_E={N_E}")
                _, _, total_bits, frames = deserialize_blocks(serialize_block_set(block_set))
                for chosen in combinations(frames, L):
                    subsets += 1
                    if mds_decode(list(chosen), L, N_E, total_bits) != payload:
                        failures.append(f"decode L={L} N_E={N_E} {[i for i, _ in chosen]}")
        return {"passed": not failures, "subsets": subsets, "failures": failures[:20]}

    # ------------------------------------------------------------------
    # 確率幾何
    # ------------------------------------------------------------------

    def check_distance_pdfs(self) -> StageResult:
        worst_norm = 0.0
        for lam in (1.0, 8.0):
            for n in range(1, 9):
                upper = math.sqrt(200.0 / (math.pi * lam))
                value, _ = integrate.quad(lambda v: distance_pdf(n, lam, v), 0.0, upper,
                                          epsabs=1e-13, epsrel=1e-12, limit=200)
                worst_norm = max(worst_norm, abs(value - 1.0))

        upper = math.sqrt(200.0 / (math.pi * 8.0))
        joint_mass, _ = integrate.dblquad(lambda u, v: joint_distance_pdf(1, 4, 8.0, u, v),
                                          0.0, upper, lambda v: 0.0, lambda v: v,
                                          epsabs=1e-12, epsrel=1e-11)
        marginal, _ = integrate.quad(lambda u: joint_distance_pdf(1, 4, 8.0, u, 0.3), 0.0, 0.3,
                                     epsabs=1e-13, epsrel=1e-12)
        marginal_err = abs(marginal - distance_pdf(4, 8.0, 0.3))

        draws = self._scaled(20_000, 3_000)
        config = self.config.replace(L=1)
        nearest = []
        for trial in range(draws):
            geom = sample_ppp(config, trial_rng(self.seed, trial))
            if not geom.is_empty:
                nearest.append(geom.sorted_distances[0])
        lam = config.lambda_density
        ks = stats.kstest(nearest, lambda v: 1.0 - np.exp(-math.pi * lam * np.asarray(v) ** 2))

        return {
            "passed": (worst_norm <= 1e-8 and abs(joint_mass - 1.0) <= 1e-8
                       and marginal_err <= 1e-8 and ks.pvalue > 1e-3),
            "worst_normalization_error": worst_norm,
            "joint_mass_error": abs(joint_mass - 1.0),
            "marginal_error": marginal_err,
            "nearest_distance_ks": float(ks.statistic),
            "nearest_distance_pvalue": float(ks.pvalue),
        }

    def check_campbell(self) -> StageResult:
        estimate = conditioned_interference_mc(
            self.config.lambda_density, self.config.eta, 0.2, self.trials, self.seed,
            outer_radius_km=self.config.area_radius_km, workers=self.workers,
        )
        truncated_gap = abs(estimate.mean - estimate.campbell_truncated)
        return {
            "passed": estimate.relative_error <= 0.02 and truncated_gap <= 4 * estimate.std_error,
            "mc_mean": estimate.mean,
            "std_error": estimate.std_error,
            "campbell": estimate.campbell,
            "campbell_truncated": estimate.campbell_truncated,
            "relative_error": estimate.relative_error,
        }

    # ------------------------------------------------------------------
    # 閉形式 対 数値積分
    # ------------------------------------------------------------------

    def check_laplace_quadrature(self) -> StageResult:
        grid = [
            (s, ell, L, eta)
            for (ell, L, eta) in ((1, 2, 3.75), (1, 3, 3.75), (2, 3, 3.75), (1, 4, 4.0), (3, 4, 3.5))
            for s in (0.5, 2.0, 3.0 + 2.0j, 1.0 - 4.0j)
        ]
        errors = [abs(laplace_inv_rho(s, ell, L, eta) - oracles.laplace_quadrature(s, ell, L, eta))
                  for s, ell, L, eta in grid]
        return {"passed": max(errors) <= 1e-7, "points": len(grid), "max_error": max(errors)}

    def check_sir_cdf_quadrature(self) -> StageResult:
        grid = [
            (gamma, ell, L, n_r, eta)
            for (ell, L, n_r, eta) in ((1, 2, 2, 3.75), (1, 3, 4, 3.75), (2, 4, 8, 3.75), (3, 4, 6, 4.0),
                                       (4, 4, 8, 3.75))
            for gamma in (0.1, 1.0, 10.0, 100.0)
        ]
        errors = []
        for gamma, ell, L, n_r, eta in grid:
            dof = n_r - L + 1
            analytic = cdf_sir_tilde(gamma, ell, L, n_r, eta)
            errors.append(abs(analytic - oracles.cdf_sir_quadrature(gamma, ell, L, dof, eta)))

        # 自由度 1 では P(ρ̃·𝒳₂ > γ) = 𝓛(γ)
        consistency = max(
            abs(1.0 - cdf_sir_tilde(gamma, ell, L, L, 3.75) - laplace_inv_rho(gamma, ell, L, 3.75).real)
            for ell, L in ((1, 1), (1, 3), (2, 3), (4, 4)) for gamma in (0.3, 2.0, 15.0)
        )
        return {
            "passed": max(errors) <= 1e-6 and consistency <= 1e-10,
            "points": len(grid),
            "max_error": max(errors),
            "laplace_consistency": consistency,
        }

    def check_exponential_inversion(self) -> StageResult:
        gammas = np.logspace(-1, 1, 25)
        diagnostics = InversionDiagnostics()
        approx = cdf_rho_approx(gammas, 1, 1, 4.0, self.params, diagnostics)
        exp_err = float(np.max(np.abs(approx - oracles.exponential_law_cdf(gammas))))

        gammas_last = np.logspace(-2, 2, 25)
        last_err = float(np.max(np.abs(cdf_rho_approx(gammas_last, 4, 4, 3.75, self.params, diagnostics)
                                       - cdf_rho_exact_last(gammas_last, 4, 3.75))))
        return {
            "passed": exp_err <= 1e-3 and last_err <= 1e-3,
            "exponential_max_error": exp_err,
            "last_stream_max_error": last_err,
            "clamped": diagnostics.clamped,
        }

    def check_avg_rate(self) -> StageResult:
        eta = self.config.eta
        pzf_gap = abs(avg_rate_stream(4, 4, 8, eta) - avg_rate_stream(4, 4, 8, eta, method="quadrature"))
        sic_gap = abs(avg_rate_pzf_sic(8, 8, eta)
                      - avg_rate_stream(8, 8, 8, eta, receiver="pzf-sic", method="quadrature"))
        per_stream = [avg_rate_stream(ell, 4, 8, eta) for ell in range(1, 5)]
        decreasing = all(b <= a + 1e-9 for a, b in zip(per_stream, per_stream[1:]))
        sic_dominates = all(avg_rate_pzf_sic(L, 8, eta) >= avg_rate_pzf(L, 8, eta) - 1e-12
                            for L in range(1, 9))
        return {
            "passed": pzf_gap <= 1e-6 and sic_gap <= 1e-5 and decreasing and sic_dominates,
            "pzf_closed_vs_quadrature": pzf_gap,
            "sic_closed_vs_quadrature": sic_gap,
            "per_stream_n8_L4": per_stream,
            "sic_dominates_pzf": sic_dominates,
        }

    # ------------------------------------------------------------------
    # モンテカルロ 対 解析
    # ------------------------------------------------------------------

    def check_rho_cdf_mc(self) -> StageResult:
        gammas = 10.0 ** (np.linspace(-10.0, 40.0, 26) / 10.0)
        tolerance = _dkw_tolerance(0.01, self.trials)
        deviations: Dict[str, float] = {}
        for L in (2, 4):
            sample = simulate_local_sir(self.config.replace(L=L, n_r=max(8, L)), self.trials,
                                        self.seed, self.workers)
            for ell in range(1, L + 1):
                analytic = cdf_rho_approx(gammas, ell, L, self.config.eta, self.params)
                deviations[f"L{L}_ell{ell}"] = oracles.max_cdf_deviation(
                    sample.rho_tilde[:, ell - 1], gammas, analytic)
        return {"passed": max(deviations.values()) <= tolerance, "tolerance": tolerance,
                "max_deviation": deviations}

    def check_exact_vs_approx(self) -> StageResult:
        # ρ̃ は干渉を条件付き期待値で置き換えたモデル近似。許容値はモデル誤差 + 2 標本 KS の揺らぎ
        sample = simulate_local_sir(self.config.replace(L=4, n_r=8), self.trials, self.seed, self.workers)
        tolerance = APPROXIMATION_KS_TOLERANCE + 1.63 * math.sqrt(2.0 / self.trials)
        distances = {
            f"ell{ell}": oracles.ks_two_sample(sample.rho[:, ell - 1], sample.rho_tilde[:, ell - 1],
                                               quantile_range=(0.01, 0.99))
            for ell in range(1, 5)
        }
        return {"passed": max(distances.values()) <= tolerance, "tolerance": tolerance,
                "ks_distance": distances, "resampled": sample.resampled}

    def check_chi_square_laws(self) -> StageResult:
        rng = np.random.default_rng([self.seed, 4])
        draws = self._scaled(100_000, 20_000)
        tolerance = _dkw_tolerance(0.01, draws)
        n_r, L = 8, 4
        H = sample_channel(rng, n_r, L, batch=draws)
        pzf = pzf_filters(H, L)

        leakage = np.abs(np.einsum("bia,bij->baj", np.conj(pzf.filters), H))
        relative = leakage / np.linalg.norm(H, axis=1)[:, np.newaxis, :]
        worst_null = float(np.max(relative[:, ~np.eye(L, dtype=bool)]))

        ks: Dict[str, float] = {f"pzf_ell{ell}": oracles.ks_chi_square(pzf.gains[:, ell - 1], n_r - L + 1)
                                for ell in (1, L)}
        for ell in range(1, L + 1):
            # 第 ℓ 段は残り L-ℓ+1 列に対する ZF の第 1 列
            stage = pzf_filters(H[:, :, ell - 1:], L - ell + 1)
            ks[f"sic_stage{ell}"] = oracles.ks_chi_square(stage.gains[:, 0], n_r - L + ell)
        return {"passed": worst_null <= 1e-10 and max(ks.values()) <= tolerance,
                "tolerance": tolerance, "ks_distance": ks, "worst_null_leakage": worst_null}

    def check_outage(self) -> StageResult:
        results: Dict[str, Any] = {}
        passed = True
        for receiver, L in (("pzf", 4), ("pzf-sic", 8)):
            n_r = 8
            low = rate_at_outage(L, n_r, self.config.eta, 0.02, receiver, self.params)
            high = rate_at_outage(L, n_r, self.config.eta, 0.9, receiver, self.params)
            rates = np.linspace(low, high, 12)
            analytic = outage_analytic(rates, L, n_r, self.config.eta, self.params, receiver)
            sample = simulate_local_sir(self.config.replace(L=L, n_r=n_r), self.trials,
                                        self.seed, self.workers)
            estimates = outage_from_sample(sample, rates, receiver, n_r, L)
            empirical = np.array([e.probability for e in estimates])
            relaxed = np.array([e.relaxed_probability for e in estimates])
            tolerance = max(0.01, 3.0 * math.sqrt(0.25 / self.trials))
            # 解析式は ℓ = L に緩和したアウテージなので、同じ緩和の経験値と比べる
            gap = float(np.max(np.abs(relaxed - analytic)))
            relaxation_gap = float(np.max(empirical - relaxed))
            passed &= gap <= tolerance and relaxation_gap >= 0.0
            results[receiver] = {"L": L, "max_gap": gap, "relaxation_gap": relaxation_gap,
                                 "tolerance": tolerance, "rate_range": [low, high]}
        return {"passed": passed, **results}

    def check_sic_order(self) -> StageResult:
        rng = np.random.default_rng([self.seed, 5])
        instances = self._scaled(10_000, 500)
        reports = {L: verify_sic_order_theorem(L, instances, rng) for L in range(2, 7)}
        return {
            "passed": all(r.passed for r in reports.values()),
            "instances_per_L": instances,
            "counterexamples": {str(L): r.counterexamples[:3] for L, r in reports.items()},
        }

    def check_planner(self) -> StageResult:
        eta = self.config.eta
        selected = {
            "pzf_n8": optimize_L(8, eta).selected_L,
            "pzf_n16": optimize_L(16, eta).selected_L,
            "sic_n8": optimize_L(8, eta, receiver="pzf-sic").selected_L,
            "sic_n16": optimize_L(16, eta, receiver="pzf-sic").selected_L,
        }
        monotone = True
        for n_r in (8, 16):
            products = lr_product_curve(n_r, eta).column("LR_pzf_sic")
            monotone &= all(b >= a - 1e-12 for a, b in zip(products, products[1:]))
        expected = {"pzf_n8": 3, "pzf_n16": 6, "sic_n8": 8, "sic_n16": 16}
        return {"passed": selected == expected and monotone, "selected": selected,
                "expected": expected, "sic_product_monotone": monotone}

    def check_determinism(self) -> StageResult:
        trials = self._scaled(5_000, 1_200)
        config = self.config.replace(L=4, n_r=8)
        bodies = {}
        for workers in (1, 4, 16):
            sample = simulate_local_sir(config, trials, self.seed, workers)
            table = per_trial_table(sample, config.n_r, config.L, metadata={"seed": self.seed})
            bodies[workers] = table.to_csv()
        identical = len(set(bodies.values())) == 1
        return {"passed": identical, "trials": trials, "worker_counts": sorted(bodies)}

    def _geometry_rates(self, L: int, n_r: int, geometries: int, fading: int):
        """幾何ごとのフェージング平均レートと ρ̃ に基づく準下界"""
        lam, eta = self.config.lambda_density, self.config.eta
        config = self.config.replace(L=L, n_r=n_r)
        mc = np.empty((geometries, L))
        se = np.empty((geometries, L))
        qlb = np.empty((geometries, L))
        for g in range(geometries):
            rng = trial_rng(self.seed + 7, g)
            geom = sample_ppp(config, rng)
            while geom.count < L + 10:
                geom = sample_ppp(config, rng)
            r = geom.sorted_distances
            for ell in range(1, L + 1):
                estimate = ergodic_rate_mc(geom, ell, L, n_r, fading, rng, eta=eta)
                mc[g, ell - 1] = estimate.mean_rate
                se[g, ell - 1] = estimate.std_error
                qlb[g, ell - 1] = qlb_rate(local_avg_sir_approx(r[ell - 1], r[L - 1], lam, eta), n_r, L)
        return mc, se, qlb

    def check_per_stream_bounds(self) -> StageResult:
        geometries = self._scaled(400, 100)
        fading = self._scaled(200, 50)
        results: Dict[str, Any] = {}
        passed = True
        for n_r, L in ((8, 4), (16, 8)):
            mc, se, qlb = self._geometry_rates(L, n_r, geometries, fading)
            mc_mean = mc.mean(axis=0)
            mc_err = mc.std(axis=0, ddof=1) / math.sqrt(geometries)
            bounds = np.array([avg_rate_stream(ell, L, n_r, self.config.eta) for ell in range(1, L + 1)])
            below = bool(np.all(bounds <= mc_mean + 3 * mc_err))
            # 幾何平均での Jensen 支配（幾何ごとの比率は参考値）
            diff = mc - qlb
            jensen = bool(np.all(diff.mean(axis=0) >= -3 * diff.std(axis=0, ddof=1) / math.sqrt(geometries)))
            fraction = float(np.mean(mc >= qlb - 3 * se))
            passed &= below and jensen
            results[f"n{n_r}_L{L}"] = {
                "analytic_bounds": bounds.tolist(),
                "mc_average": mc_mean.tolist(),
                "bounds_below_mc": below,
                "jensen_average_dominance": jensen,
                "jensen_per_geometry_fraction": fraction,
            }
        return {"passed": passed, "geometries": geometries, "fading_trials": fading, **results}
