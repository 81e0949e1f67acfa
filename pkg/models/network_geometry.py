#!/usr/bin/env python3
"""
ネットワーク幾何データモデル
PPP の1実現：EN座標と原点（典型ユーザ）からの昇順距離
"""
from dataclasses import dataclass, field
from typing import Any, Dict
import json

import numpy as np

from scripts.error_handler import ValidationError


@dataclass
class NetworkGeometry:
    """PPP実現（点は原点からの距離順に並ぶ）"""
    points: np.ndarray
    sorted_distances: np.ndarray = field(init=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 2)
        dist = np.hypot(pts[:, 0], pts[:, 1])
        if np.any(dist <= 0):
            raise ValidationError("points", "origin", "原点上のENは許可されません")
        order = np.argsort(dist, kind="stable")
        self.points = pts[order]
        self.sorted_distances = dist[order]

    @property
    def count(self) -> int:
        return int(self.sorted_distances.size)

    @property
    def is_empty(self) -> bool:
        """点が0個（呼び出し側で再サンプル判定）"""
        return self.count == 0

    def has_interferers(self, L: int) -> bool:
        """L 個より多くの点があるか"""
        return self.count > L

    def to_dict(self) -> Dict[str, Any]:
        return {"points": self.points.tolist()}

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'NetworkGeometry':
        return cls(points=np.asarray(data.get("points", []), dtype=float))

    @classmethod
    def from_json(cls, json_str: str) -> 'NetworkGeometry':
        return cls.from_dict(json.loads(json_str))

    @classmethod
    def from_distances(cls, distances) -> 'NetworkGeometry':
        """距離だけから幾何を構成（角度 0 上に配置、テスト用）"""
        d = np.asarray(distances, dtype=float)
        return cls(points=np.column_stack([d, np.zeros_like(d)]))

    def __str__(self) -> str:
        return f"NetworkGeometry(points={self.count})"
