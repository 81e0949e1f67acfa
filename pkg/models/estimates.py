#!/usr/bin/env python3
"""
モンテカルロ推定結果のデータモデル
"""
from dataclasses import dataclass, field, asdict
from typing import Any, Dict, List


@dataclass
class StreamRateEstimate:
    """ストリーム ℓ のエルゴードレート推定値 [bit/s/Hz]"""
    ell: int
    mean_rate: float
    std_error: float
    trials: int

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class OutageEstimate:
    """経験的アウテージ確率とウィルソン信頼区間"""
    rate: float
    receiver: str
    probability: float
    ci_low: float
    ci_high: float
    trials: int
    relaxed_probability: float
    resampled: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class SicOrderReport:
    """SIC 復号順序の総当たり検証結果"""
    L: int
    instances: int
    counterexamples: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.counterexamples

    def to_dict(self) -> Dict[str, Any]:
        return {
            "L": self.L,
            "instances": self.instances,
            "passed": self.passed,
            "counterexamples": self.counterexamples[:20],
        }
