#!/usr/bin/env python3
"""
実験仕様データモデル
コマンド・システム設定・掃引軸・試行回数・出力先
"""
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple
import json

from models.planner_result import OBJECTIVES
from models.system_config import SystemConfig, EulerInversionParams
from scripts.error_handler import ValidationError, ConfigurationError

COMMANDS = ("simulate", "analyze", "optimize", "validate", "deliver-demo")
RECEIVERS = ("pzf", "pzf-sic")


def parse_grid(text: str) -> Tuple[float, float, int]:
    """'a:b:n' 形式の格子指定を解析"""
    parts = text.split(":")
    if len(parts) != 3:
        raise ValidationError("rate_grid", text, "格子は a:b:n 形式で指定してください")
    try:
        a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ValidationError("rate_grid", text, "格子の値が数値ではありません")
    if n < 1 or (n > 1 and not b > a):
        raise ValidationError("rate_grid", text, "格子は a < b かつ n >= 1 である必要があります")
    return a, b, n


@dataclass
class ExperimentSpec:
    """1 回の CLI 実行を完全に記述する仕様"""
    command: str
    system: SystemConfig = field(default_factory=SystemConfig)
    L_list: Optional[List[int]] = None
    rate_grid: Tuple[float, float, int] = (0.1, 3.0, 30)
    gamma_grid: Tuple[float, float, int] = (-20.0, 30.0, 51)   # dB
    trials: int = 20000
    fading_trials: int = 200
    workers: int = 1
    receiver: str = "pzf"
    objective: str = "average-rate"
    target_outage: float = 0.1
    euler: EulerInversionParams = field(default_factory=EulerInversionParams)
    out_dir: str = "output"
    verify_mc: bool = False
    per_trial: bool = False
    quick: bool = False

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ValidationError("command", self.command, f"command は {COMMANDS} のいずれか")
        if self.receiver not in RECEIVERS:
            raise ValidationError("receiver", self.receiver, f"receiver は {RECEIVERS} のいずれか")
        if self.objective not in OBJECTIVES:
            raise ValidationError("objective", self.objective, f"objective は {OBJECTIVES} のいずれか")
        if self.trials < 1 or self.fading_trials < 1:
            raise ValidationError("trials", self.trials, "試行回数は 1 以上である必要があります")
        if self.workers < 1:
            raise ValidationError("workers", self.workers, "ワーカー数は 1 以上である必要があります")
        if not 0 < self.target_outage < 1:
            raise ValidationError("target_outage", self.target_outage, "目標アウテージは (0,1) の範囲")
        if self.L_list is not None:
            bad = [L for L in self.L_list if not 1 <= L <= self.system.n_r]
            if bad:
                raise ValidationError("L_list", bad, f"L は 1..n_r={self.system.n_r} の範囲")

    @property
    def seed(self) -> int:
        return self.system.seed

    @property
    def Ls(self) -> List[int]:
        return list(self.L_list) if self.L_list else [self.system.L]

    def provenance_payload(self) -> Dict[str, Any]:
        """来歴ハッシュの対象（ワーカー数と出力先は含めない）"""
        data = self.to_dict()
        data.pop("workers")
        data.pop("out_dir")
        return data

    def to_dict(self) -> Dict[str, Any]:
        return {
            "command": self.command,
            "system": self.system.to_dict(),
            "L_list": self.L_list,
            "rate_grid": list(self.rate_grid),
            "gamma_grid": list(self.gamma_grid),
            "trials": self.trials,
            "fading_trials": self.fading_trials,
            "workers": self.workers,
            "receiver": self.receiver,
            "objective": self.objective,
            "target_outage": self.target_outage,
            "euler": self.euler.to_dict(),
            "out_dir": self.out_dir,
            "verify_mc": self.verify_mc,
            "per_trial": self.per_trial,
            "quick": self.quick,
        }

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=indent, sort_keys=True)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ExperimentSpec':
        """辞書から生成（設定ファイルのスキーマ検証を含む）"""
        data = dict(data)
        known = {"command", "system", "L_list", "rate_grid", "gamma_grid", "trials",
                 "fading_trials", "workers", "receiver", "objective", "target_outage",
                 "euler", "out_dir", "verify_mc", "per_trial", "quick"}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigurationError("experiment", f"未知の設定キー: {', '.join(unknown)}")
        if "command" not in data:
            raise ConfigurationError("experiment", "command が指定されていません")
        if "system" in data:
            data["system"] = SystemConfig.from_dict(data["system"] or {})
        if "euler" in data:
            data["euler"] = EulerInversionParams.from_dict(data["euler"])
        for key in ("rate_grid", "gamma_grid"):
            if key in data and isinstance(data[key], str):
                data[key] = parse_grid(data[key])
            elif key in data:
                a, b, n = data[key]
                data[key] = (float(a), float(b), int(n))
        return cls(**data)
