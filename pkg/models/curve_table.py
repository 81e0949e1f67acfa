#!/usr/bin/env python3
"""
曲線テーブルデータモデル
CDF・レート曲線・アウテージ曲線を来歴付き CSV / JSON として出力
"""
from dataclasses import dataclass, field
from datetime import datetime
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple
import json
from pathlib import Path

from scripts.error_handler import ValidationError, safe_file_operation
from scripts.utils import format_number


@dataclass(frozen=True)
class CurvePoint:
    """曲線上の1点"""
    x: float
    y: float


@dataclass
class CurveTable:
    """x 列と 1 つ以上の y 列を持つ表"""
    columns: List[str]
    rows: List[Tuple[float, ...]]
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.columns) < 2:
            raise ValidationError("columns", self.columns, "x 列と少なくとも 1 つの y 列が必要です")
        self.rows = [tuple(float(v) for v in row) for row in self.rows]
        for row in self.rows:
            if len(row) != len(self.columns):
                raise ValidationError("rows", row, "行の列数がヘッダと一致しません")
        xs = [row[0] for row in self.rows]
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ValidationError("x", xs[:5], "x は狭義単調増加である必要があります")

    @classmethod
    def from_points(cls, x_label: str, y_label: str, points: Iterable[CurvePoint],
                    metadata: Optional[Dict[str, Any]] = None) -> 'CurveTable':
        """CurvePoint 列から生成"""
        return cls([x_label, y_label], [(p.x, p.y) for p in points], dict(metadata or {}))

    @classmethod
    def from_columns(cls, x_label: str, x: Sequence[float], ys: Dict[str, Sequence[float]],
                     metadata: Optional[Dict[str, Any]] = None) -> 'CurveTable':
        """列ベクトルから生成"""
        names = list(ys)
        rows = [tuple([x[i]] + [ys[n][i] for n in names]) for i in range(len(x))]
        return cls([x_label] + names, rows, dict(metadata or {}))

    @property
    def x_label(self) -> str:
        return self.columns[0]

    def column(self, name: str) -> List[float]:
        """列の値を取得"""
        idx = self.columns.index(name)
        return [row[idx] for row in self.rows]

    def points(self, y_label: Optional[str] = None) -> List[CurvePoint]:
        idx = self.columns.index(y_label) if y_label else 1
        return [CurvePoint(row[0], row[idx]) for row in self.rows]

    def to_csv(self, timestamp: Optional[datetime] = None) -> str:
        """# コメントヘッダ付き CSV（本文は12有効桁固定）"""
        lines = [f"# {key}: {self.metadata[key]}" for key in sorted(self.metadata)]
        if timestamp is not None:
            lines.append(f"# generated_at: {timestamp.isoformat(timespec='seconds')}")
        lines.append(",".join(self.columns))
        lines.extend(",".join(format_number(v) for v in row) for row in self.rows)
        return "\n".join(lines) + "\n"

    def to_dict(self) -> Dict[str, Any]:
        return {"metadata": self.metadata, "columns": self.columns,
                "rows": [list(row) for row in self.rows]}

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=indent, sort_keys=True)

    def save_csv(self, filepath: Path, timestamp: Optional[datetime] = None) -> Path:
        """CSV ファイルに保存"""
        text = self.to_csv(timestamp if timestamp is not None else datetime.now())

        def write():
            filepath.parent.mkdir(parents=True, exist_ok=True)
            filepath.write_text(text, encoding='utf-8')
        safe_file_operation("write", str(filepath), write)
        return filepath

    @staticmethod
    def csv_body(text: str) -> str:
        """コメント行を除いた CSV 本文"""
        return "\n".join(line for line in text.splitlines() if not line.startswith("#"))
