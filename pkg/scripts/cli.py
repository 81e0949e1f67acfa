#!/usr/bin/env python3
"""
spatialcc コマンドラインインターフェース
simulate / analyze / optimize / validate / deliver-demo を実行し、
来歴付きの CSV / JSON / テキストレポートを出力する

使い方: python -m scripts.cli <command> [options]
"""
import argparse
import json
import sys
from datetime import datetime
from itertools import combinations
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from jinja2 import Template

sys.path.append(str(Path(__file__).parent.parent))

from models.curve_table import CurveTable
from models.experiment import RECEIVERS, ExperimentSpec, parse_grid
from models.planner_result import OBJECTIVES
from models.system_config import SystemConfig
from scripts.analysis import (
    InversionDiagnostics, avg_rate_stream, cdf_rho_approx, cdf_rho_exact_last, cdf_sir_tilde,
    outage_analytic,
)
from scripts.coded_caching import (
    build_multicast_codeword, cache_parameter, codeword_from_bytes, codeword_length_bits,
    place_caches, random_library, recover_file, worst_case_demand,
)
from scripts.error_handler import (
    ConfigurationError, OracleFailure, SpatialCCError, error_handler, exit_code_for,
    safe_file_operation, with_error_handling,
)
from scripts.geometry import simulate_local_sir
from scripts.mds_codec import deserialize_blocks, mds_decode, mds_encode, serialize_block_set
from scripts.oracle_suite import OracleSuite
from scripts.phy_sim import outage_from_sample, per_trial_table, stream_rate_profile_mc
from scripts.planner import lr_product_curve, optimize_L, outage_vs_lr_curve, verify_selection_mc
from scripts.utils import (
    CODE_VERSION, config_hash, ensure_output_dir, get_env_int, get_env_var, load_json_safely,
    logger, performance_monitor, save_json_safely,
)

TEMPLATE_DIR = Path(__file__).parent.parent / "templates"

# simulate のストリーム別レートで使う幾何の上限
RATE_PROFILE_GEOMETRIES = 1000

# CLI フラグ → SystemConfig フィールド
SYSTEM_FLAGS = {
    "nr": "n_r",
    "eta": "eta",
    "lambda_density": "lambda_density",
    "seed": "seed",
    "K": "K",
    "N": "N",
    "M": "M",
    "n_edge_nodes": "n_edge_nodes",
    "file_bits": "file_bits",
}


def build_parser() -> argparse.ArgumentParser:
    """引数パーサーを構築"""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON 設定ファイル")
    common.add_argument("--seed", type=int, help="乱数シード（64 ビット）")
    common.add_argument("--out", help="出力ディレクトリ")
    common.add_argument("--workers", type=int, help="並列ワーカー数（結果には影響しない）")
    common.add_argument("--trials", type=int, help="幾何モンテカルロの試行回数")
    common.add_argument("--fading-trials", type=int, help="幾何あたりのフェージング試行回数")
    common.add_argument("--L", help="マクロダイバーシティ次数（カンマ区切りで複数指定可）")
    common.add_argument("--nr", type=int, help="受信アンテナ数 n_r")
    common.add_argument("--eta", type=float, help="パスロス指数")
    common.add_argument("--lambda", dest="lambda_density", type=float, help="EN 密度 [ENs/km²]")
    common.add_argument("--rate-grid", help="レート格子 a:b:n [bit/s/Hz]")
    common.add_argument("--gamma-grid", help="SIR 格子 a:b:n [dB]")
    common.add_argument("--receiver", choices=RECEIVERS, help="受信機")

    parser = argparse.ArgumentParser(description="spatialcc: 空間スケーラブルなコーデッドキャッシング配信ツールキット")
    subparsers = parser.add_subparsers(dest="command", help="利用可能なコマンド")

    simulate = subparsers.add_parser("simulate", parents=[common], help="モンテカルロ CDF / アウテージ表")
    simulate.add_argument("--per-trial", action="store_true", help="試行ごとの記録も出力")

    subparsers.add_parser("analyze", parents=[common], help="解析曲線（CDF・平均レート・アウテージ）")

    optimize = subparsers.add_parser("optimize", parents=[common], help="L* の選択")
    optimize.add_argument("--objective", choices=OBJECTIVES, help="最適化の目的")
    optimize.add_argument("--target-outage", type=float, help="目標アウテージ確率")
    optimize.add_argument("--verify-mc", action="store_true", help="L* をモンテカルロで再評価")

    validate = subparsers.add_parser("validate", parents=[common], help="オラクル検証スイート")
    validate.add_argument("--quick", action="store_true", help="縮小規模で実行")

    demo = subparsers.add_parser("deliver-demo", parents=[common], help="符号化キャッシング＋MDS の往復デモ")
    demo.add_argument("--K", type=int, help="ユーザ数")
    demo.add_argument("--N", type=int, help="ファイル数")
    demo.add_argument("--M", type=int, help="キャッシュ容量（ファイル単位）")
    demo.add_argument("--ne", dest="n_edge_nodes", type=int, help="EN 数 N_E")
    demo.add_argument("--file-bits", type=int, help="ファイル長 F [bits]")
    return parser


def _parse_L(text: str) -> List[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigurationError("L", f"--L は整数のカンマ区切りで指定してください: {text!r}")
    if not values:
        raise ConfigurationError("L", "--L が空です")
    return values


def load_experiment(args: argparse.Namespace) -> ExperimentSpec:
    """
    実効設定を組み立てる

    優先順位: 既定値 < 環境変数 < JSON 設定ファイル < CLI フラグ
    """
    data: Dict[str, Any] = {"command": args.command, "system": {}}

    # 環境変数
    env_seed = get_env_var("SPATIALCC_SEED", required=False)
    if env_seed:
        data["system"]["seed"] = get_env_int("SPATIALCC_SEED", 0)
    env_workers = get_env_var("SPATIALCC_WORKERS", required=False)
    if env_workers:
        data["workers"] = get_env_int("SPATIALCC_WORKERS", 1)
    env_out = get_env_var("SPATIALCC_OUTPUT_DIR", required=False)
    if env_out:
        data["out_dir"] = env_out

    # 設定ファイル
    if getattr(args, "config", None):
        if not Path(args.config).exists():
            raise ConfigurationError(args.config, f"設定ファイルが見つかりません: {args.config}")
        try:
            file_data = load_json_safely(args.config)
        except json.JSONDecodeError as e:
            raise ConfigurationError(args.config, f"設定ファイルの JSON 解析に失敗しました: {e}")
        if not isinstance(file_data, dict):
            raise ConfigurationError(args.config, "設定ファイルのトップレベルはオブジェクトである必要があります")
        file_data = dict(file_data)
        file_data.pop("command", None)
        data["system"].update(file_data.pop("system", None) or {})
        data.update(file_data)

    # CLI フラグ
    for flag, name in SYSTEM_FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            data["system"][name] = value
    if getattr(args, "L", None):
        Ls = _parse_L(args.L)
        data["L_list"] = Ls if len(Ls) > 1 else None
        data["system"]["L"] = Ls[0]
    for flag in ("workers", "trials", "fading_trials", "receiver", "objective", "target_outage"):
        value = getattr(args, flag, None)
        if value is not None:
            data[flag] = value
    if getattr(args, "out", None):
        data["out_dir"] = args.out
    if getattr(args, "rate_grid", None):
        data["rate_grid"] = parse_grid(args.rate_grid)
    if getattr(args, "gamma_grid", None):
        data["gamma_grid"] = parse_grid(args.gamma_grid)
    for flag in ("verify_mc", "per_trial", "quick"):
        if getattr(args, flag, False):
            data[flag] = True

    # n_r だけ小さくした場合は既定の L を n_r に合わせる
    system = data["system"]
    n_r = system.get("n_r", SystemConfig.n_r)
    if "L" not in system and SystemConfig.L > n_r:
        system["L"] = n_r

    spec = ExperimentSpec.from_dict(data)
    logger.info(f"実効設定:\n{spec.to_json()}")
    return spec


def _grid(bounds: Sequence[float]) -> np.ndarray:
    a, b, n = bounds
    return np.linspace(a, b, int(n))


class ExperimentRunner:
    """1 つの ExperimentSpec を実行して成果物を書き出す"""

    def __init__(self, spec: ExperimentSpec):
        self.spec = spec
        self.system = spec.system
        self.output_dir = ensure_output_dir(spec.out_dir)
        self.timestamp = datetime.now()
        self.artifacts: List[Path] = []
        self.provenance = {
            "config_hash": config_hash(spec.provenance_payload()),
            "seed": spec.seed,
            "code_version": CODE_VERSION,
            "command": spec.command,
        }

    def _metadata(self, monte_carlo: bool, **extra: Any) -> Dict[str, Any]:
        trials = self.spec.trials if monte_carlo else "analytic"
        return dict(self.provenance, trials=trials, eta=self.system.eta, n_r=self.system.n_r,
                    lambda_density=self.system.lambda_density, **extra)

    @with_error_handling(max_retries=2, retry_delay=0.5)
    def _write_table(self, name: str, table: CurveTable) -> Path:
        path = table.save_csv(self.output_dir / f"{name}.csv", self.timestamp)
        self.artifacts.append(path)
        logger.info(f"CSV 出力: {path}")
        return path

    @with_error_handling(max_retries=2, retry_delay=0.5)
    def _write_json(self, name: str, payload: Dict[str, Any]) -> Path:
        path = self.output_dir / f"{name}.json"
        save_json_safely(dict(payload, provenance=self.provenance), str(path))
        self.artifacts.append(path)
        return path

    @with_error_handling(max_retries=2, retry_delay=0.5)
    def _write_text(self, name: str, text: str) -> Path:
        path = self.output_dir / name
        safe_file_operation("write", str(path), path.write_text, text, encoding="utf-8")
        self.artifacts.append(path)
        return path

    def run(self) -> List[Path]:
        """コマンドを実行"""
        handlers = {
            "simulate": self.simulate,
            "analyze": self.analyze,
            "optimize": self.optimize,
            "validate": self.validate,
            "deliver-demo": self.deliver_demo,
        }
        performance_monitor.start_timing(self.spec.command)
        handlers[self.spec.command]()
        performance_monitor.end_timing(self.spec.command)
        return self.artifacts

    # ------------------------------------------------------------------

    def simulate(self) -> None:
        spec = self.spec
        gammas_db = _grid(spec.gamma_grid)
        gammas = 10.0 ** (gammas_db / 10.0)
        rates = _grid(spec.rate_grid)
        for L in spec.Ls:
            config = self.system.replace(L=L)
            sample = simulate_local_sir(config, spec.trials, spec.seed, spec.workers)
            metadata = self._metadata(True, L=L, resampled=sample.resampled)

            ys: Dict[str, List[float]] = {}
            for ell in range(1, L + 1):
                ys[f"rho_ell{ell}"] = _empirical(sample.rho[:, ell - 1], gammas)
                ys[f"rho_tilde_ell{ell}"] = _empirical(sample.rho_tilde[:, ell - 1], gammas)
            self._write_table(f"rho_cdf_mc_L{L}", CurveTable.from_columns("gamma_db", gammas_db, ys, metadata))

            estimates = outage_from_sample(sample, rates, spec.receiver, config.n_r, L)
            self._write_table(f"outage_mc_{spec.receiver}_L{L}", CurveTable.from_columns(
                "rate", rates,
                {
                    "outage": [e.probability for e in estimates],
                    "ci_low": [e.ci_low for e in estimates],
                    "ci_high": [e.ci_high for e in estimates],
                    "outage_relaxed": [e.relaxed_probability for e in estimates],
                },
                dict(metadata, receiver=spec.receiver),
            ))

            geometries = min(spec.trials, RATE_PROFILE_GEOMETRIES)
            profile = stream_rate_profile_mc(config, geometries, spec.fading_trials, spec.seed,
                                             spec.workers, spec.receiver)
            self._write_table(f"stream_rates_mc_{spec.receiver}_L{L}", CurveTable.from_columns(
                "ell", [p.ell for p in profile],
                {"mean_rate": [p.mean_rate for p in profile], "std_error": [p.std_error for p in profile]},
                dict(metadata, receiver=spec.receiver, geometries=geometries,
                     fading_trials=spec.fading_trials),
            ))

            if spec.per_trial:
                self._write_table(f"trials_{spec.receiver}_L{L}",
                                  per_trial_table(sample, config.n_r, L, spec.receiver, metadata))

    def analyze(self) -> None:
        spec = self.spec
        n_r, eta = self.system.n_r, self.system.eta
        gammas_db = _grid(spec.gamma_grid)
        gammas = 10.0 ** (gammas_db / 10.0)
        rates = _grid(spec.rate_grid)
        diagnostics = InversionDiagnostics()
        for L in spec.Ls:
            rho = {f"rho_tilde_ell{ell}": list(cdf_rho_approx(gammas, ell, L, eta, spec.euler, diagnostics))
                   for ell in range(1, L + 1)}
            rho[f"rho_tilde_ell{L}_exact"] = list(cdf_rho_exact_last(gammas, L, eta))
            self._write_table(f"rho_cdf_analytic_L{L}", CurveTable.from_columns(
                "gamma_db", gammas_db, rho, self._metadata(False, L=L, euler=spec.euler.to_dict())))

            sir = {f"sir_tilde_ell{ell}": list(cdf_sir_tilde(gammas, ell, L, n_r, eta, spec.receiver))
                   for ell in range(1, L + 1)}
            self._write_table(f"sir_cdf_analytic_{spec.receiver}_L{L}", CurveTable.from_columns(
                "gamma_db", gammas_db, sir, self._metadata(False, L=L, receiver=spec.receiver)))

            ells = list(range(1, L + 1))
            self._write_table(f"stream_rates_analytic_L{L}", CurveTable.from_columns(
                "ell", ells,
                {
                    "avg_rate_pzf": [avg_rate_stream(ell, L, n_r, eta) for ell in ells],
                    "avg_rate_pzf_sic": [avg_rate_stream(ell, L, n_r, eta, receiver="pzf-sic") for ell in ells],
                },
                self._metadata(False, L=L),
            ))

            outage = outage_analytic(rates, L, n_r, eta, spec.euler, spec.receiver, diagnostics)
            self._write_table(f"outage_analytic_{spec.receiver}_L{L}", CurveTable.from_columns(
                "rate", rates, {"outage": list(outage)},
                self._metadata(False, L=L, receiver=spec.receiver)))

        self._write_table(f"lr_product_nr{n_r}", lr_product_curve(n_r, eta, self._metadata(False)))
        a, b, n = spec.rate_grid
        products = np.linspace(a, b * max(spec.Ls), int(n))
        self._write_table(f"outage_vs_lr_{spec.receiver}", outage_vs_lr_curve(
            spec.Ls, n_r, eta, products, spec.receiver, spec.euler,
            self._metadata(False, receiver=spec.receiver)))
        if diagnostics.clamped:
            logger.info(f"オイラー逆変換のクランプ: {diagnostics.clamped}/{diagnostics.evaluations} 回")

    def optimize(self) -> None:
        spec = self.spec
        result = optimize_L(self.system.n_r, self.system.eta, spec.objective, spec.receiver,
                            spec.target_outage, self.system, spec.euler)
        result.metadata.update(self._metadata(False))
        payload = result.to_dict()
        if spec.verify_mc:
            check = verify_selection_mc(result, self.system, spec.trials, spec.seed, spec.workers)
            payload["mc_verification"] = {
                "scores": {str(L): score for L, score in check["scores"].items()},
                "agrees": check["agrees"],
                "trials": check["trials"],
            }
        name = f"planner_{spec.receiver}_{spec.objective}"
        self._write_json(name, payload)
        self._write_table(name, result.to_table())
        print(f"L* = {result.selected_L}（{spec.receiver}, {spec.objective}, n_r={self.system.n_r}）")

    def validate(self) -> None:
        spec = self.spec
        suite = OracleSuite(self.system, spec.trials, spec.workers, str(self.output_dir),
                            spec.euler, quick=spec.quick)
        passed = suite.run_all()
        summary = suite.render_summary()
        self._write_text("validate_summary.txt", summary)
        print(summary)
        if not passed:
            raise OracleFailure(suite.failed_stages())

    def deliver_demo(self) -> None:
        """トイライブラリでの配置→配信→MDS 符号化→直列化→復号→復元の往復"""
        system = self.system
        K, N, M, L, N_E = system.K, system.N, system.M, system.L, system.n_edge_nodes
        rng = np.random.default_rng(self.spec.seed)

        library = random_library(N, system.file_bits, rng)
        assignment = place_caches(K, N, M, library)
        t = cache_parameter(K, N, M)
        demand = worst_case_demand(K, N)
        codeword = build_multicast_codeword(demand, assignment, library)
        expected_bits = codeword_length_bits(K, system.mu, system.file_bits)
        block_set = mds_encode(codeword, L, N_E)
        wire = serialize_block_set(block_set)
        _, _, total_bits, frames = deserialize_blocks(wire)

        users = []
        for k in range(K):
            chosen = sorted(int(i) for i in rng.choice(N_E, size=L, replace=False))
            decoded = mds_decode([frames[i] for i in chosen], L, N_E, total_bits)
            received = codeword_from_bytes(decoded, K, t, total_bits)
            ok = recover_file(k, received, assignment, demand) == library.files[demand[k]]
            users.append({"k": k, "file": demand[k], "ok": ok, "blocks": chosen})

        reference = codeword.to_bytes()
        subset_results = [mds_decode(list(subset), L, N_E, total_bits) == reference
                          for subset in combinations(frames, L)]
        recovered = sum(user["ok"] for user in users)

        context = {
            "K": K, "N": N, "M": M, "t": t, "mu": str(system.mu), "file_bits": system.file_bits,
            "n_total": N_E, "L": L, "demand": demand,
            "config_hash": self.provenance["config_hash"], "seed": self.spec.seed,
            "code_version": CODE_VERSION,
            "n_blocks": len(codeword.blocks),
            "subsets": ["{" + ",".join(str(k) for k in S) + "}" for S in codeword.ordered_subsets()],
            "total_bits": codeword.total_bits, "expected_bits": expected_bits,
            "block_bytes": block_set.block_bytes, "wire_bytes": len(wire),
            "users": users, "subsets_ok": sum(subset_results), "subsets_total": len(subset_results),
            "recovered": recovered,
        }
        template = Template((TEMPLATE_DIR / "deliver_report.txt.jinja").read_text(encoding="utf-8"))
        report = template.render(**context)
        self._write_text("deliver_report.txt", report)
        self._write_json("deliver_demo", {key: value for key, value in context.items()
                                          if key not in ("code_version", "config_hash", "seed")})
        print(report)

        failed = []
        if recovered != K:
            failed.append("user_recovery")
        if not all(subset_results):
            failed.append("mds_subsets")
        if codeword.total_bits != expected_bits:
            failed.append("codeword_length")
        if failed:
            raise OracleFailure(failed)


def _empirical(samples: np.ndarray, grid: np.ndarray) -> List[float]:
    ordered = np.sort(samples)
    return list(np.searchsorted(ordered, grid, side="right") / ordered.size)


def run(spec: ExperimentSpec) -> int:
    """ExperimentSpec を実行し終了コードを返す"""
    try:
        artifacts = ExperimentRunner(spec).run()
        logger.info(f"✅ {spec.command} 完了: {len(artifacts)} ファイル出力")
        return 0
    except SpatialCCError as e:
        error_handler.handle_error(e, {"command": spec.command})
        return exit_code_for(e)
    except OSError as e:
        error_handler.handle_error(e, {"command": spec.command})
        return exit_code_for(e)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """メイン関数"""
    parser = build_parser()
    args = parser.parse_args(argv)

    if not args.command:
        parser.print_help()
        return 2
    try:
        spec = load_experiment(args)
    except SpatialCCError as e:
        error_handler.handle_error(e, {"command": args.command}, save_report=False)
        print(f"❌ 設定エラー: {e}")
        return exit_code_for(e)

    try:
        return run(spec)
    except KeyboardInterrupt:
        print("\n⏹️  処理が中断されました")
        return 1


if __name__ == "__main__":
    sys.exit(main())
