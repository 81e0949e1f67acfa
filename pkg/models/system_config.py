#!/usr/bin/env python3
"""
システム設定データモデル
ネットワーク・伝搬・コンテンツ層のスカラーパラメータ
"""
from dataclasses import dataclass, asdict, fields
from fractions import Fraction
from typing import Any, Dict, Optional
import json
from pathlib import Path

from scripts.error_handler import ValidationError, ConfigurationError, safe_file_operation


@dataclass
class SystemConfig:
    """システム全体のパラメータ（干渉制限モード）"""
    lambda_density: float = 8.0      # EN密度 [ENs/km²]
    eta: float = 3.75                # パスロス指数
    n_r: int = 8                     # 受信アンテナ数
    L: int = 4                       # マクロダイバーシティ次数
    area_radius_km: float = 3.0
    beta_intercept: float = 1.0      # 干渉制限モードでは未使用
    tx_power: float = 1.0            # 同上
    noise_power: float = 0.0         # 同上
    bandwidth_w: float = 1.0e6       # [Hz] 遅延計算のみ
    seed: int = 20180101
    K: int = 4                       # ユーザ数
    N: int = 4                       # ライブラリのファイル数
    M: int = 1                       # キャッシュ容量（ファイル単位）
    file_bits: int = 3840            # F（8·C(K,t) の倍数）
    n_edge_nodes: int = 6            # N_E

    def __post_init__(self):
        """初期化後の検証"""
        if not self.eta > 2:
            raise ValidationError("eta", self.eta, "パスロス指数 eta は 2 より大きい必要があります")
        if self.n_r < 1:
            raise ValidationError("n_r", self.n_r, "受信アンテナ数 n_r は 1 以上である必要があります")
        if not 1 <= self.L <= self.n_r:
            raise ValidationError("L", self.L, f"L は 1 以上 n_r={self.n_r} 以下である必要があります")
        if not self.lambda_density > 0:
            raise ValidationError("lambda_density", self.lambda_density, "EN密度は正である必要があります")
        if not self.area_radius_km > 0:
            raise ValidationError("area_radius_km", self.area_radius_km, "領域半径は正である必要があります")
        if not self.bandwidth_w > 0:
            raise ValidationError("bandwidth_w", self.bandwidth_w, "帯域幅は正である必要があります")
        if not 0 <= self.seed < 2 ** 64:
            raise ValidationError("seed", self.seed, "シードは 64 ビット符号なし整数である必要があります")
        if self.K < 1 or self.N < 1:
            raise ValidationError("K/N", (self.K, self.N), "K と N は 1 以上である必要があります")
        if not 0 < self.M <= self.N:
            raise ValidationError("M", self.M, "キャッシュ容量 M は 0 < M <= N である必要があります")
        if self.file_bits <= 0:
            raise ValidationError("file_bits", self.file_bits, "ファイル長は正である必要があります")
        if not 1 <= self.n_edge_nodes <= 255:
            raise ValidationError("n_edge_nodes", self.n_edge_nodes, "N_E は 1..255 の範囲である必要があります")

    @property
    def mu(self) -> Fraction:
        """正規化キャッシュサイズ μ = M/N"""
        return Fraction(self.M, self.N)

    def to_dict(self) -> Dict[str, Any]:
        """辞書形式に変換"""
        return asdict(self)

    def to_json(self, indent: int = 2) -> str:
        """JSON形式に変換"""
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=indent, sort_keys=True)

    def replace(self, **overrides: Any) -> 'SystemConfig':
        """None 以外の上書き値を適用した新しい設定を生成"""
        data = self.to_dict()
        data.update({k: v for k, v in overrides.items() if v is not None})
        return SystemConfig.from_dict(data)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'SystemConfig':
        """辞書から生成（未知のキーは設定エラー）"""
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigurationError("system", f"未知の設定キー: {', '.join(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, json_str: str) -> 'SystemConfig':
        """JSONから生成"""
        try:
            data = json.loads(json_str)
        except json.JSONDecodeError as e:
            raise ConfigurationError("system", f"設定JSONの解析に失敗しました: {e}")
        return cls.from_dict(data)

    def save_to_file(self, filepath: Path) -> None:
        """ファイルに保存"""
        def write():
            filepath.parent.mkdir(parents=True, exist_ok=True)
            filepath.write_text(self.to_json(), encoding='utf-8')
        safe_file_operation("write", str(filepath), write)

    @classmethod
    def load_from_file(cls, filepath: Path) -> 'SystemConfig':
        """ファイルから読み込み"""
        text = safe_file_operation("read", str(filepath), Path(filepath).read_text, encoding='utf-8')
        return cls.from_json(text)


@dataclass(frozen=True)
class EulerInversionParams:
    """オイラー級数によるラプラス逆変換のパラメータ"""
    A: float = 9.21
    B: int = 5
    G: int = 8

    def __post_init__(self):
        if not self.A > 0:
            raise ValidationError("A", self.A, "A は正である必要があります")
        if self.B < 0:
            raise ValidationError("B", self.B, "B は 0 以上である必要があります")
        if self.G < 1:
            raise ValidationError("G", self.G, "G は 1 以上である必要があります")

    def weight(self, g: int) -> float:
        """D_g（g=0 のとき 2、それ以外 1）"""
        return 2.0 if g == 0 else 1.0

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]]) -> 'EulerInversionParams':
        return cls(**(data or {}))
