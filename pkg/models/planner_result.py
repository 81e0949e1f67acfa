#!/usr/bin/env python3
"""
プランナー結果データモデル
"""
from dataclasses import dataclass, field, asdict
from typing import Any, Dict, List, Optional
import json
import math

from models.curve_table import CurveTable
from scripts.error_handler import ValidationError

OBJECTIVES = ("average-rate", "target-outage")


@dataclass
class PlannerRecord:
    """L ごとの評価値"""
    L: int
    R_at_target_outage: Optional[float]
    product_LR: float
    avg_rate: float
    latency_s: float


@dataclass
class PlannerResult:
    """L の掃引結果と選択された L*"""
    records: List[PlannerRecord]
    selected_L: int
    objective: str
    receiver: str
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.objective not in OBJECTIVES:
            raise ValidationError("objective", self.objective, f"objective は {OBJECTIVES} のいずれか")
        if self.records and self.selected_L not in {r.L for r in self.records}:
            raise ValidationError("selected_L", self.selected_L, "selected_L が記録に存在しません")

    def record_for(self, L: int) -> PlannerRecord:
        return next(r for r in self.records if r.L == L)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "objective": self.objective,
            "receiver": self.receiver,
            "selected_L": self.selected_L,
            "records": [asdict(r) for r in self.records],
            "metadata": self.metadata,
        }

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=indent, sort_keys=True)

    def to_table(self) -> CurveTable:
        """L ごとの記録を CSV 用の表に変換（未到達の R は nan）"""
        rows = [(r.L, math.nan if r.R_at_target_outage is None else r.R_at_target_outage,
                 r.product_LR, r.avg_rate, r.latency_s) for r in self.records]
        metadata = dict(self.metadata, selected_L=self.selected_L, objective=self.objective,
                        receiver=self.receiver)
        return CurveTable(["L", "R_at_target_outage", "product_LR", "avg_rate", "latency_s"], rows, metadata)
