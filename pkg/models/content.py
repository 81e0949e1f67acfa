#!/usr/bin/env python3
"""
コンテンツ層データモデル
ライブラリ・キャッシュ割当・マルチキャスト符号語・MDSブロック集合
"""
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Tuple

from scripts.error_handler import ValidationError

Subset = Tuple[int, ...]
SegmentKey = Tuple[int, Subset]


@dataclass(frozen=True)
class Library:
    """N 個の同一長ファイル（各 F ビット）"""
    files: Tuple[bytes, ...]

    def __post_init__(self):
        if len(self.files) < 1:
            raise ValidationError("files", 0, "ライブラリには 1 つ以上のファイルが必要です")
        lengths = {len(f) for f in self.files}
        if len(lengths) != 1:
            raise ValidationError("files", sorted(lengths), "全ファイルは同じ長さである必要があります")

    @property
    def N(self) -> int:
        return len(self.files)

    @property
    def file_bits(self) -> int:
        return 8 * len(self.files[0])


@dataclass
class CacheAssignment:
    """集中型配置：(ファイル i, 部分集合 T) → セグメント W_i^T"""
    K: int
    t: int
    segments: Dict[SegmentKey, bytes]
    per_user: List[FrozenSet[SegmentKey]] = field(default_factory=list)

    def cached_bits(self, k: int) -> int:
        """ユーザ k のキャッシュ総ビット数"""
        return sum(8 * len(self.segments[key]) for key in self.per_user[k])

    def user_cache(self, k: int) -> Dict[SegmentKey, bytes]:
        """ユーザ k が保持するセグメント"""
        return {key: self.segments[key] for key in self.per_user[k]}


@dataclass
class MulticastCodeword:
    """(t+1) 部分集合ごとの XOR ブロック（辞書順）"""
    blocks: Dict[Subset, bytes]
    total_bits: int

    def ordered_subsets(self) -> List[Subset]:
        return sorted(self.blocks)

    def to_bytes(self) -> bytes:
        """辞書順に連結した符号語"""
        return b"".join(self.blocks[s] for s in self.ordered_subsets())


@dataclass
class MdsBlockSet:
    """N_E 個の MDS 符号化ブロック（先頭 L 個は組織的）"""
    n_total: int
    k_data: int
    blocks: List[bytes]
    total_bits: int
    field_spec: str = "GF(2^8), primitive polynomial 0x11d, normalized Cauchy parity"

    @property
    def block_bytes(self) -> int:
        return len(self.blocks[0]) if self.blocks else 0
