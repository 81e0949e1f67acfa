#!/usr/bin/env python3
"""
データモデルのテスト
"""
import json
import sys
import unittest
from datetime import datetime
from fractions import Fraction
from pathlib import Path
import tempfile

import numpy as np

sys.path.append(str(Path(__file__).parent.parent))

from models import (
    CurvePoint, CurveTable, EulerInversionParams, ExperimentSpec, Library, NetworkGeometry,
    PlannerRecord, PlannerResult, SicOrderReport, SystemConfig,
)
from models.experiment import parse_grid
from scripts.error_handler import ConfigurationError, ValidationError


class TestSystemConfig(unittest.TestCase):
    """システム設定のテスト"""

    def test_defaults(self):
        """既定値"""
        config = SystemConfig()
        self.assertEqual((config.lambda_density, config.eta, config.n_r), (8.0, 3.75, 8))
        self.assertEqual(config.mu, Fraction(1, 4))

    def test_invalid_eta(self):
        """η <= 2 は拒否"""
        with self.assertRaises(ValidationError):
            SystemConfig(eta=2.0)

    def test_L_above_antennas(self):
        """L > n_r は拒否"""
        with self.assertRaises(ValidationError):
            SystemConfig(n_r=2, L=3)

    def test_unknown_key(self):
        """未知のキーは設定エラー"""
        with self.assertRaises(ConfigurationError):
            SystemConfig.from_dict({"antennas": 4})

    def test_bad_json(self):
        """壊れた JSON は設定エラー"""
        with self.assertRaises(ConfigurationError):
            SystemConfig.from_json("{not json")

    def test_replace_ignores_none(self):
        """None の上書きは無視"""
        config = SystemConfig().replace(L=2, eta=None)
        self.assertEqual(config.L, 2)
        self.assertEqual(config.eta, 3.75)

    def test_file_roundtrip(self):
        """ファイル保存と読み込み"""
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "sub" / "system.json"
            SystemConfig(seed=5, n_r=16).save_to_file(path)
            self.assertEqual(SystemConfig.load_from_file(path), SystemConfig(seed=5, n_r=16))

    def test_euler_weights(self):
        """D_0 = 2, D_g = 1"""
        params = EulerInversionParams()
        self.assertEqual((params.A, params.B, params.G), (9.21, 5, 8))
        self.assertEqual(params.weight(0), 2.0)
        self.assertEqual(params.weight(3), 1.0)


class TestGeometryModel(unittest.TestCase):
    """ネットワーク幾何のテスト"""

    def test_sorted(self):
        """原点からの距離順に並ぶ"""
        geom = NetworkGeometry(points=np.array([[0.0, 3.0], [1.0, 0.0], [0.0, -2.0]]))
        np.testing.assert_allclose(geom.sorted_distances, [1.0, 2.0, 3.0])
        self.assertTrue(geom.has_interferers(2))
        self.assertFalse(geom.has_interferers(3))

    def test_empty(self):
        """空の実現"""
        self.assertTrue(NetworkGeometry(points=np.zeros((0, 2))).is_empty)

    def test_json(self):
        """JSON から復元"""
        geom = NetworkGeometry.from_distances([0.5, 0.2])
        restored = NetworkGeometry.from_json(geom.to_json())
        np.testing.assert_allclose(restored.sorted_distances, [0.2, 0.5])


class TestContentModels(unittest.TestCase):
    """コンテンツ層モデルのテスト"""

    def test_library_lengths(self):
        """全ファイル同じ長さ"""
        with self.assertRaises(ValidationError):
            Library((b"ab", b"abc"))
        self.assertEqual(Library((b"ab", b"cd")).file_bits, 16)


class TestCurveTable(unittest.TestCase):
    """曲線テーブルのテスト"""

    def setUp(self):
        """テスト準備"""
        self.table = CurveTable.from_columns("x", [1.0, 2.0], {"y": [0.1, 1 / 3]},
                                             {"seed": 7, "config_hash": "abc"})

    def test_csv_header(self):
        """コメントヘッダと12有効桁"""
        text = self.table.to_csv(datetime(2026, 1, 2, 3, 4, 5))
        lines = text.splitlines()
        self.assertEqual(lines[0], "# config_hash: abc")
        self.assertIn("# generated_at: 2026-01-02T03:04:05", lines)
        self.assertIn("2,0.333333333333", lines)

    def test_csv_body_stable(self):
        """本文は時刻に依存しない"""
        a = CurveTable.csv_body(self.table.to_csv(datetime(2026, 1, 1)))
        b = CurveTable.csv_body(self.table.to_csv(datetime(2027, 1, 1)))
        self.assertEqual(a, b)

    def test_monotone_x(self):
        """x は狭義単調増加"""
        with self.assertRaises(ValidationError):
            CurveTable(["x", "y"], [(2.0, 0.0), (1.0, 0.0)])

    def test_points(self):
        """CurvePoint 列"""
        self.assertEqual(self.table.points()[0], CurvePoint(1.0, 0.1))

    def test_save(self):
        """ファイル保存"""
        with tempfile.TemporaryDirectory() as tmp:
            path = self.table.save_csv(Path(tmp) / "curve.csv")
            self.assertTrue(path.read_text(encoding="utf-8").startswith("# config_hash"))


class TestResults(unittest.TestCase):
    """結果モデルのテスト"""

    def test_planner_result_validation(self):
        """記録にない L* は拒否"""
        record = PlannerRecord(L=1, R_at_target_outage=None, product_LR=1.0, avg_rate=1.0, latency_s=1.0)
        with self.assertRaises(ValidationError):
            PlannerResult([record], selected_L=2, objective="average-rate", receiver="pzf")

    def test_planner_result_json(self):
        """JSON 出力"""
        record = PlannerRecord(L=1, R_at_target_outage=0.5, product_LR=0.5, avg_rate=1.0, latency_s=2.0)
        data = json.loads(PlannerResult([record], 1, "target-outage", "pzf").to_json())
        self.assertEqual(data["selected_L"], 1)

    def test_sic_report(self):
        """反例がなければ合格"""
        report = SicOrderReport(L=3, instances=10)
        self.assertTrue(report.passed)
        report.counterexamples.append({"instance": 0})
        self.assertFalse(report.to_dict()["passed"])


class TestExperimentSpec(unittest.TestCase):
    """実験仕様のテスト"""

    def test_parse_grid(self):
        """a:b:n 形式"""
        self.assertEqual(parse_grid("0.1:3:30"), (0.1, 3.0, 30))
        with self.assertRaises(ValidationError):
            parse_grid("3:1:5")

    def test_from_dict(self):
        """辞書から生成"""
        spec = ExperimentSpec.from_dict({"command": "analyze", "system": {"n_r": 16},
                                         "rate_grid": "0:2:5", "L_list": [2, 4]})
        self.assertEqual(spec.system.n_r, 16)
        self.assertEqual(spec.Ls, [2, 4])

    def test_missing_command(self):
        """command は必須"""
        with self.assertRaises(ConfigurationError):
            ExperimentSpec.from_dict({"trials": 10})

    def test_unknown_key(self):
        """未知のキーは設定エラー"""
        with self.assertRaises(ConfigurationError):
            ExperimentSpec.from_dict({"command": "simulate", "speed": 3})

    def test_L_list_range(self):
        """L は 1..n_r"""
        with self.assertRaises(ValidationError):
            ExperimentSpec(command="analyze", L_list=[2, 9])

    def test_provenance_excludes_workers(self):
        """来歴にワーカー数と出力先は含めない"""
        a = ExperimentSpec(command="simulate", workers=1, out_dir="a").provenance_payload()
        b = ExperimentSpec(command="simulate", workers=8, out_dir="b").provenance_payload()
        self.assertEqual(a, b)


if __name__ == '__main__':
    unittest.main()
