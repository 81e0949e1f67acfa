#!/usr/bin/env python3
"""
マクロダイバーシティ・プランナーのテスト
"""
import sys
from fractions import Fraction
from pathlib import Path

import pytest

sys.path.append(str(Path(__file__).parent.parent))

from models.system_config import SystemConfig
from scripts.analysis import outage_analytic
from scripts.error_handler import UnreachableTargetError, ValidationError
from scripts.planner import (
    delivery_latency, lr_product_curve, optimize_L, outage_vs_lr_curve, rate_at_outage,
    verify_selection_mc,
)


class TestLatency:
    """配信遅延のテスト"""

    def test_reference(self):
        """F/w=1, μ=1/2, K=2, L=2, R=1 で 0.25 s"""
        assert delivery_latency(2, 1.0, 1.0, 1.0, 2, Fraction(1, 2)) == pytest.approx(0.25)

    def test_full_cache(self):
        """μ = 1 では遅延 0"""
        assert delivery_latency(2, 1.0, 1e6, 1e6, 4, 1.0) == 0.0

    def test_invalid_rate(self):
        """R <= 0 はエラー"""
        with pytest.raises(ValidationError):
            delivery_latency(2, 0.0, 1.0, 1.0, 2, 0.5)


class TestRateAtOutage:
    """目標アウテージでのレートのテスト"""

    def test_hits_target(self):
        """解析的アウテージが目標値になる"""
        rate = rate_at_outage(3, 8, 3.75, 0.1)
        assert outage_analytic(rate, 3, 8, 3.75) == pytest.approx(0.1, abs=1e-4)

    def test_sic_higher(self):
        """PZF-SIC の方が高いレート"""
        assert rate_at_outage(4, 8, 3.75, 0.1, "pzf-sic") > rate_at_outage(4, 8, 3.75, 0.1)

    def test_invalid_target(self):
        """目標は (0,1)"""
        with pytest.raises(ValidationError):
            rate_at_outage(2, 4, 3.75, 1.5)

    def test_unreachable(self, mocker):
        """上限レートでも目標未達なら UnreachableTargetError"""
        mocker.patch("scripts.planner.outage_analytic", return_value=0.0)
        with pytest.raises(UnreachableTargetError):
            rate_at_outage(2, 4, 3.75, 0.5)


class TestOptimizeL:
    """L* 選択のテスト"""

    @pytest.mark.parametrize("n_r,expected", [(8, 3), (16, 6)])
    def test_pzf_average_rate(self, n_r, expected):
        """PZF の L* は n_r=8 で 3、n_r=16 で 6"""
        result = optimize_L(n_r, 3.75)
        assert result.selected_L == expected
        assert len(result.records) == n_r

    @pytest.mark.parametrize("n_r", [8, 16])
    def test_sic_uses_all_antennas(self, n_r):
        """PZF-SIC は L×R が単調増加し L* = n_r"""
        result = optimize_L(n_r, 3.75, receiver="pzf-sic")
        products = [r.product_LR for r in result.records]
        assert all(b > a for a, b in zip(products, products[1:]))
        assert result.selected_L == n_r

    def test_target_outage_objective(self):
        """target-outage でも L* が 1..n_r に入る"""
        result = optimize_L(4, 3.75, objective="target-outage", target_outage=0.2)
        assert 1 <= result.selected_L <= 4
        assert all(r.R_at_target_outage is not None for r in result.records)

    def test_latency_uses_config(self):
        """遅延は設定の K, μ, F, w から計算"""
        config = SystemConfig(n_r=4, L=1, K=2, N=2, M=1, file_bits=1000, bandwidth_w=1000.0)
        result = optimize_L(4, 3.75, config=config)
        record = result.record_for(2)
        assert record.latency_s == pytest.approx(delivery_latency(2, record.avg_rate, 1000, 1000.0, 2, 0.5))

    def test_unknown_objective(self):
        """未知の目的はエラー"""
        with pytest.raises(ValidationError):
            optimize_L(4, 3.75, objective="latency")

    def test_to_table(self):
        """CSV 用の表"""
        table = optimize_L(4, 3.75).to_table()
        assert table.column("L") == [1.0, 2.0, 3.0, 4.0]
        assert table.metadata["objective"] == "average-rate"


class TestCurves:
    """曲線出力のテスト"""

    def test_lr_product_curve(self):
        """L×平均レート曲線"""
        table = lr_product_curve(4, 3.75, {"n_r": 4})
        assert table.columns == ["L", "LR_pzf", "LR_pzf_sic"]
        assert all(sic >= pzf for pzf, sic in zip(table.column("LR_pzf"), table.column("LR_pzf_sic")))

    def test_outage_vs_lr(self):
        """L ごとの列"""
        table = outage_vs_lr_curve([1, 2], 4, 3.75, [0.5, 1.0, 2.0])
        assert table.columns == ["LR", "outage_L1", "outage_L2"]
        assert len(table.rows) == 3

    def test_verify_selection(self):
        """モンテカルロ再評価の結果"""
        result = optimize_L(4, 3.75)
        check = verify_selection_mc(result, SystemConfig(n_r=4, L=1), trials=300)
        assert set(check["scores"]) <= {1, 2, 3, 4}
        assert result.selected_L in check["scores"]
        assert check["trials"] == 300
