#!/usr/bin/env python3
"""
集中型コーデッドキャッシング
キャッシュ配置・XOR マルチキャスト符号語の生成・ユーザ側復元・伝送長の計算

ユーザ番号とファイル番号は 0 始まり。部分集合はソート済みタプルで表し、
符号語ブロックは部分集合の辞書順に並ぶ。
"""
import sys
from fractions import Fraction
from itertools import combinations
from pathlib import Path
from typing import Dict, List, Sequence, Union

import numpy as np

sys.path.append(str(Path(__file__).parent.parent))

from models.content import Library, CacheAssignment, MulticastCodeword, Subset, SegmentKey
from scripts.error_handler import ValidationError, CacheIntegrityError
from scripts.utils import logger

Rational = Union[Fraction, int, str, float]


def _xor(chunks: Sequence[bytes]) -> bytes:
    arrays = [np.frombuffer(c, dtype=np.uint8) for c in chunks]
    return np.bitwise_xor.reduce(arrays).tobytes()


def cache_parameter(K: int, N: int, M: Rational) -> int:
    """t = MK/N（整数でなければエラー）。M は有理数でもよい"""
    t = Fraction(M) * K / N
    if t.denominator != 1:
        raise ValidationError(
            "t", t,
            f"t = MK/N = {t} が整数ではありません（メモリ共有は非対応）"
        )
    t_int = int(t)
    if not 1 <= t_int <= K:
        raise ValidationError("t", t_int, f"t は 1 以上 K={K} 以下である必要があります")
    return t_int


def segment_subsets(K: int, t: int) -> List[Subset]:
    """|T| = t の部分集合（辞書順）"""
    return list(combinations(range(K), t))


def random_library(N: int, file_bits: int, rng: np.random.Generator) -> Library:
    """一様乱数バイトからなるライブラリ"""
    if file_bits % 8:
        raise ValidationError("file_bits", file_bits, "ファイル長はバイト単位である必要があります")
    return Library(tuple(rng.integers(0, 256, file_bits // 8, dtype=np.uint8).tobytes()
                         for _ in range(N)))


def place_caches(K: int, N: int, M: Rational, library: Library) -> CacheAssignment:
    """
    集中型配置：各ファイルを C(K,t) 個のセグメント W_i^T に分割し、
    ユーザ k は k ∈ T なる全セグメントを保持する
    """
    if library.N != N:
        raise ValidationError("N", N, f"ライブラリのファイル数 {library.N} と N が一致しません")
    t = cache_parameter(K, N, M)
    subsets = segment_subsets(K, t)
    n_segments = len(subsets)
    F = library.file_bits
    if F % (8 * n_segments):
        raise ValidationError(
            "file_bits", F,
            f"F={F} は 8·C(K,t)={8 * n_segments} で割り切れる必要があります"
        )
    seg_bytes = F // 8 // n_segments

    segments: Dict[SegmentKey, bytes] = {}
    for i, data in enumerate(library.files):
        for j, T in enumerate(subsets):
            segments[(i, T)] = data[j * seg_bytes:(j + 1) * seg_bytes]

    per_user = [frozenset((i, T) for i in range(N) for T in subsets if k in T) for k in range(K)]
    assignment = CacheAssignment(K=K, t=t, segments=segments, per_user=per_user)
    logger.debug(f"キャッシュ配置完了: K={K}, N={N}, M={M}, t={t}, セグメント長={8 * seg_bytes} bits")
    return assignment


def build_multicast_codeword(demand: Sequence[int], assignment: CacheAssignment,
                             library: Library) -> MulticastCodeword:
    """各 (t+1) 部分集合 S について X_S = ⊕_{k∈S} W_{d_k}^{S∖{k}}"""
    K, t = assignment.K, assignment.t
    if len(demand) != K:
        raise ValidationError("demand", list(demand), f"要求ベクトルの長さは K={K} である必要があります")
    bad = [d for d in demand if not 0 <= d < library.N]
    if bad:
        raise ValidationError("demand", bad, f"要求ファイル番号は 0..{library.N - 1} の範囲")

    blocks: Dict[Subset, bytes] = {}
    for S in combinations(range(K), t + 1):
        parts = [assignment.segments[(demand[k], tuple(j for j in S if j != k))] for k in S]
        blocks[S] = _xor(parts)

    total_bits = sum(8 * len(b) for b in blocks.values())
    return MulticastCodeword(blocks=blocks, total_bits=total_bits)


def codeword_length_bits(K: int, mu: Rational, F: int) -> int:
    """伝送長 F·K(1-μ)/(1+Kμ)（厳密な有理数演算）"""
    mu_q = Fraction(mu).limit_denominator(10 ** 9) if isinstance(mu, float) else Fraction(mu)
    if not 0 < mu_q <= 1:
        raise ValidationError("mu", mu_q, "μ は 0 < μ <= 1 である必要があります")
    if (K * mu_q).denominator != 1:
        raise ValidationError("mu", mu_q, f"Kμ = {K * mu_q} が整数ではありません")
    length = Fraction(F) * K * (1 - mu_q) / (1 + K * mu_q)
    if length.denominator != 1:
        raise ValidationError("F", F, f"伝送長 {length} が整数になりません（パラメータ不整合）")
    return int(length)


def recover_file(k: int, codeword: MulticastCodeword, assignment: CacheAssignment,
                 demand: Sequence[int]) -> bytes:
    """ユーザ k が符号語と自身のキャッシュから W_{d_k} を復元"""
    if not 0 <= k < assignment.K:
        raise ValidationError("k", k, f"ユーザ番号は 0..{assignment.K - 1} の範囲")
    cache = assignment.user_cache(k)
    d = demand[k]

    def cached(key: SegmentKey) -> bytes:
        if key not in cache:
            raise CacheIntegrityError(k, f"ユーザ {k} のキャッシュにセグメント {key} がありません")
        return cache[key]

    pieces: List[bytes] = []
    for T in segment_subsets(assignment.K, assignment.t):
        if k in T:
            pieces.append(cached((d, T)))
            continue
        S = tuple(sorted(T + (k,)))
        if S not in codeword.blocks:
            raise CacheIntegrityError(k, f"符号語にブロック {S} がありません")
        others = [cached((demand[j], tuple(x for x in S if x != j))) for j in S if j != k]
        pieces.append(_xor([codeword.blocks[S]] + others))
    return b"".join(pieces)


def worst_case_demand(K: int, N: int) -> List[int]:
    """異なる要求数が最大となる要求ベクトル"""
    return [k % N for k in range(K)]


def codeword_from_bytes(data: bytes, K: int, t: int, total_bits: int) -> MulticastCodeword:
    """MDS 復号後のバイト列を辞書順の (t+1) 部分集合ブロックに分割"""
    subsets = list(combinations(range(K), t + 1))
    if not subsets:
        return MulticastCodeword(blocks={}, total_bits=0)
    if total_bits % (8 * len(subsets)) or len(data) * 8 < total_bits:
        raise ValidationError("total_bits", total_bits,
                              f"符号語長が {len(subsets)} ブロックに等分できません")
    size = total_bits // 8 // len(subsets)
    blocks = {S: data[i * size:(i + 1) * size] for i, S in enumerate(subsets)}
    return MulticastCodeword(blocks=blocks, total_bits=total_bits)
