#!/usr/bin/env python3
"""
CLI 統合テスト
"""
import json
import os
import sys
import tempfile
from pathlib import Path

import pytest

sys.path.append(str(Path(__file__).parent.parent))

from models.curve_table import CurveTable
from scripts.cli import build_parser, load_experiment, main
from scripts import error_handler as error_handler_module
from scripts.error_handler import ConfigurationError


class TestConfigLoading:
    """実効設定の組み立てテスト"""

    def setup_method(self):
        """テスト準備"""
        self.temp_dir = tempfile.mkdtemp()
        self.original_cwd = os.getcwd()
        os.chdir(self.temp_dir)

    def teardown_method(self):
        """テスト後処理"""
        os.chdir(self.original_cwd)

    def _load(self, argv):
        return load_experiment(build_parser().parse_args(argv))

    def test_cli_overrides_file(self, monkeypatch):
        """既定値 < 環境変数 < 設定ファイル < CLI"""
        monkeypatch.setenv("SPATIALCC_SEED", "11")
        monkeypatch.setenv("SPATIALCC_WORKERS", "3")
        Path("cfg.json").write_text(json.dumps({"system": {"seed": 22, "eta": 4.0}, "trials": 50}),
                                    encoding="utf-8")
        spec = self._load(["simulate", "--config", "cfg.json", "--eta", "3.5"])
        assert spec.seed == 22
        assert spec.workers == 3
        assert spec.trials == 50
        assert spec.system.eta == 3.5

    def test_env_only(self, monkeypatch):
        """環境変数のみ"""
        monkeypatch.setenv("SPATIALCC_SEED", "11")
        monkeypatch.setenv("SPATIALCC_OUTPUT_DIR", "envout")
        spec = self._load(["analyze"])
        assert spec.seed == 11
        assert spec.out_dir == "envout"

    def test_L_list(self):
        """カンマ区切りの L"""
        spec = self._load(["analyze", "--L", "2,4,6"])
        assert spec.Ls == [2, 4, 6]

    def test_small_array_clamps_default_L(self):
        """n_r を既定の L 未満にすると L = n_r"""
        spec = self._load(["analyze", "--nr", "2"])
        assert spec.system.L == 2

    def test_bad_L(self):
        """整数でない L は設定エラー"""
        with pytest.raises(ConfigurationError):
            self._load(["analyze", "--L", "two"])

    def test_missing_config(self):
        """存在しない設定ファイル"""
        with pytest.raises(ConfigurationError):
            self._load(["analyze", "--config", "missing.json"])

    def test_invalid_json(self):
        """壊れた設定ファイル"""
        Path("bad.json").write_text("{", encoding="utf-8")
        with pytest.raises(ConfigurationError):
            self._load(["analyze", "--config", "bad.json"])


class TestCommands:
    """サブコマンド実行テスト"""

    def setup_method(self):
        """テスト準備"""
        self.temp_dir = tempfile.mkdtemp()
        self.original_cwd = os.getcwd()
        os.chdir(self.temp_dir)
        self.out = Path(self.temp_dir) / "out"

    def teardown_method(self):
        """テスト後処理"""
        os.chdir(self.original_cwd)

    def test_no_command(self, capsys):
        """コマンドなしはヘルプと終了コード 2"""
        assert main([]) == 2

    def test_config_error_exit_code(self):
        """設定エラーは終了コード 2"""
        assert main(["analyze", "--config", "missing.json"]) == 2
        assert main(["analyze", "--L", "12"]) == 2

    def test_deliver_demo(self, capsys):
        """K=3, N=3, M=1, N_E=5, L=2 の往復"""
        code = main(["deliver-demo", "--K", "3", "--N", "3", "--M", "1", "--ne", "5", "--L", "2",
                     "--file-bits", "240", "--out", str(self.out)])
        assert code == 0
        report = (self.out / "deliver_report.txt").read_text(encoding="utf-8")
        assert "3/3" in report
        assert "10/10" in report
        data = json.loads((self.out / "deliver_demo.json").read_text(encoding="utf-8"))
        assert data["recovered"] == 3
        assert data["subsets_ok"] == data["subsets_total"] == 10
        assert data["provenance"]["command"] == "deliver-demo"

    def test_deliver_demo_bad_memory(self):
        """t が整数でなければ終了コード 2"""
        code = main(["deliver-demo", "--K", "3", "--N", "2", "--M", "1", "--out", str(self.out)])
        assert code == 2

    def test_analyze(self):
        """解析コマンドの成果物"""
        code = main(["analyze", "--nr", "4", "--L", "2", "--gamma-grid=-10:20:4",
                     "--rate-grid", "0.5:2:3", "--out", str(self.out)])
        assert code == 0
        for name in ("rho_cdf_analytic_L2", "sir_cdf_analytic_pzf_L2", "stream_rates_analytic_L2",
                     "outage_analytic_pzf_L2", "lr_product_nr4", "outage_vs_lr_pzf"):
            assert (self.out / f"{name}.csv").exists(), name
        text = (self.out / "rho_cdf_analytic_L2.csv").read_text(encoding="utf-8")
        assert "# trials: analytic" in text
        assert "# config_hash:" in text

    def test_simulate_deterministic_across_workers(self):
        """ワーカー数によらず同じ CSV 本文"""
        bodies = []
        for workers in ("1", "2"):
            out = self.out / workers
            code = main(["simulate", "--nr", "4", "--L", "2", "--trials", "600", "--fading-trials", "5",
                         "--gamma-grid=-10:20:4", "--rate-grid", "0.5:2:3", "--seed", "7",
                         "--workers", workers, "--out", str(out)])
            assert code == 0
            bodies.append(CurveTable.csv_body((out / "rho_cdf_mc_L2.csv").read_text(encoding="utf-8")))
        assert bodies[0] == bodies[1]

    def test_simulate_per_trial(self):
        """試行ごとの記録"""
        code = main(["simulate", "--nr", "4", "--L", "2", "--trials", "20", "--fading-trials", "3",
                     "--per-trial", "--out", str(self.out)])
        assert code == 0
        assert (self.out / "trials_pzf_L2.csv").exists()

    def test_optimize(self, capsys):
        """L* を出力"""
        code = main(["optimize", "--nr", "8", "--out", str(self.out)])
        assert code == 0
        assert "L* = 3" in capsys.readouterr().out
        payload = json.loads((self.out / "planner_pzf_average-rate.json").read_text(encoding="utf-8"))
        assert payload["selected_L"] == 3

    def test_validate_failure_exit_code(self, mocker):
        """検証失敗は終了コード 3"""
        suite = mocker.patch("scripts.cli.OracleSuite")
        suite.return_value.run_all.return_value = False
        suite.return_value.render_summary.return_value = "FAILED"
        suite.return_value.failed_stages.return_value = ["mds"]
        assert main(["validate", "--quick", "--out", str(self.out)]) == 3

    def test_write_failure_exit_code(self, mocker):
        """出力失敗は終了コード 4"""
        mocker.patch("scripts.error_handler.time.sleep")
        mocker.patch.object(CurveTable, "save_csv", side_effect=PermissionError("read-only"))
        handle = mocker.spy(error_handler_module.error_handler, "handle_error")
        code = main(["analyze", "--nr", "2", "--L", "1", "--gamma-grid", "0:10:2",
                     "--rate-grid", "0.5:1:2", "--out", str(self.out)])
        assert code == 4
        assert handle.call_count == 1
        assert len(list(Path("logs/errors").rglob("error_*.json"))) == 1
