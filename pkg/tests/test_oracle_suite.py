#!/usr/bin/env python3
"""
オラクル検証スイートのテスト
"""
import json
import shutil
import sys
import tempfile
from pathlib import Path

import pytest

sys.path.append(str(Path(__file__).parent.parent))

from scripts.error_handler import ValidationError
from scripts.oracle_suite import OracleSuite


class TestOracleSuite:
    """検証スイートの実行テスト"""

    def setup_method(self):
        """テスト準備"""
        self.temp_dir = tempfile.mkdtemp()
        self.suite = OracleSuite(trials=2000, out_dir=self.temp_dir, quick=True)

    def teardown_method(self):
        """テスト後処理"""
        shutil.rmtree(self.temp_dir, ignore_errors=True)

    def test_content_layer_stages(self):
        """符号化層のステージが合格"""
        assert self.suite.run_all(only=["coded_caching", "mds"])
        stages = self.suite.suite_state["stages"]
        assert stages["coded_caching"]["status"] == "passed"
        assert stages["mds"]["details"]["failures"] == []

    def test_analytic_stages(self):
        """解析ステージが合格"""
        assert self.suite.run_all(only=["exponential_inversion", "avg_rate", "sic_order"])

    def test_local_sir_stages(self):
        """近似 SIR とアウテージのステージが合格（緩和アウテージ同士を比較）"""
        assert self.suite.run_all(only=["exact_vs_approx", "outage"])
        outage = self.suite.suite_state["stages"]["outage"]["details"]
        assert outage["pzf"]["relaxation_gap"] == 0.0
        assert outage["pzf-sic"]["relaxation_gap"] >= 0.0
        assert outage["pzf-sic"]["max_gap"] <= outage["pzf-sic"]["tolerance"]

    def test_rate_stages(self):
        """平均レートとストリーム別下界のステージが合格"""
        assert self.suite.run_all(only=["avg_rate", "per_stream_bounds"])

    def test_report_written(self):
        """JSON レポートと最新版を保存"""
        self.suite.run_all(only=["mds"])
        latest = json.loads((Path(self.temp_dir) / "validate_report_latest.json").read_text(encoding="utf-8"))
        assert latest["overall_status"] == "passed"
        assert latest["quick"] is True
        assert list(Path(self.temp_dir).glob("validate_report_2*.json"))

    def test_summary(self):
        """テキスト要約"""
        self.suite.run_all(only=["mds"])
        summary = self.suite.render_summary()
        assert "mds" in summary
        assert "総合判定: 合格" in summary

    def test_stage_error_recorded(self, mocker):
        """ステージ内の例外は error として記録"""
        mocker.patch.object(self.suite, "stages", [("mds", mocker.Mock(side_effect=RuntimeError("boom")))])
        assert not self.suite.run_all()
        assert self.suite.suite_state["stages"]["mds"]["status"] == "error"
        assert self.suite.failed_stages() == ["mds"]
        assert "不合格ステージ: mds" in self.suite.render_summary()

    def test_failed_stage(self):
        """passed=False のステージは failed"""
        assert not self.suite.execute_stage("custom", lambda: {"passed": False, "value": 1})
        assert self.suite.suite_state["stages"]["custom"]["status"] == "failed"

    def test_stage_without_verdict(self):
        """passed キーのない結果は error"""
        assert not self.suite.execute_stage("custom", lambda: {"value": 1})
        assert self.suite.suite_state["stages"]["custom"]["status"] == "error"
        assert "ValidationError" in self.suite.suite_state["stages"]["custom"]["error"]

    def test_unknown_stage(self):
        """未知のステージ名はエラー"""
        with pytest.raises(ValidationError):
            self.suite.run_all(only=["nonexistent"])
