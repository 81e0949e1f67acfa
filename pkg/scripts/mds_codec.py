#!/usr/bin/env python3
"""
MDS ブロック層
マルチキャスト符号語を GF(2^8) 上の組織的 MDS 符号で N_E ブロックに符号化し、
任意の L ブロックから復号する。

生成行列は [I_L ; C]。C は正規化 Cauchy 行列（先頭行・先頭列がすべて 1）で、
N_E = L+1 では XOR パリティ、L = 1 では繰り返し符号に一致する。

ワイヤ形式:
    ヘッダ   n_total(1B) | k_data(1B) | total_bits(8B, big-endian)
    フレーム index(1B) | length(4B, big-endian) | payload
"""
import struct
import sys
from functools import lru_cache
from pathlib import Path
from typing import List, Sequence, Tuple

import numpy as np

sys.path.append(str(Path(__file__).parent.parent))

from models.content import MulticastCodeword, MdsBlockSet
from scripts.error_handler import MdsDecodeError, ValidationError
from scripts.utils import logger

PRIMITIVE_POLY = 0x11d
FIELD_MAX_LENGTH = 255

HEADER = struct.Struct(">BBQ")
FRAME = struct.Struct(">BI")


def _build_tables() -> Tuple[np.ndarray, np.ndarray]:
    exp = np.zeros(512, dtype=np.int64)
    log = np.zeros(256, dtype=np.int64)
    x = 1
    for i in range(255):
        exp[i] = x
        log[x] = i
        x <<= 1
        if x & 0x100:
            x ^= PRIMITIVE_POLY
    exp[255:510] = exp[0:255]
    return exp, log


GF_EXP, GF_LOG = _build_tables()


def gf_mul(a: int, b: int) -> int:
    if a == 0 or b == 0:
        return 0
    return int(GF_EXP[GF_LOG[a] + GF_LOG[b]])


def gf_inv(a: int) -> int:
    if a == 0:
        raise ZeroDivisionError("GF(256) で 0 の逆元は存在しません")
    return int(GF_EXP[255 - GF_LOG[a]])


def gf_scale(coef: int, data: np.ndarray) -> np.ndarray:
    """バイト列 data の各シンボルに coef を掛ける"""
    if coef == 0:
        return np.zeros_like(data)
    if coef == 1:
        return data.copy()
    out = GF_EXP[GF_LOG[data] + GF_LOG[coef]].astype(np.uint8)
    out[data == 0] = 0
    return out


def gf_mat_inv(matrix: List[List[int]]) -> List[List[int]]:
    """ガウス・ジョルダン法による GF(256) 上の逆行列"""
    n = len(matrix)
    A = [row[:] for row in matrix]
    inv = [[1 if i == j else 0 for j in range(n)] for i in range(n)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if A[r][col] != 0), None)
        if pivot is None:
            raise MdsDecodeError("選択されたブロックの生成行列が特異です")
        A[col], A[pivot] = A[pivot], A[col]
        inv[col], inv[pivot] = inv[pivot], inv[col]
        p = gf_inv(A[col][col])
        A[col] = [gf_mul(v, p) for v in A[col]]
        inv[col] = [gf_mul(v, p) for v in inv[col]]
        for r in range(n):
            f = A[r][col]
            if r == col or f == 0:
                continue
            A[r] = [a ^ gf_mul(f, b) for a, b in zip(A[r], A[col])]
            inv[r] = [a ^ gf_mul(f, b) for a, b in zip(inv[r], inv[col])]
    return inv


@lru_cache(maxsize=64)
def parity_matrix(L: int, N_E: int) -> Tuple[Tuple[int, ...], ...]:
    """(N_E - L) × L の正規化 Cauchy 行列"""
    rows = N_E - L
    cauchy = [[gf_inv((L + r) ^ j) for j in range(L)] for r in range(rows)]
    if rows:
        col_scale = [gf_inv(cauchy[0][j]) for j in range(L)]
        cauchy = [[gf_mul(v, col_scale[j]) for j, v in enumerate(row)] for row in cauchy]
        row_scale = [gf_inv(row[0]) for row in cauchy]
        cauchy = [[gf_mul(v, row_scale[r]) for v in row] for r, row in enumerate(cauchy)]
    return tuple(tuple(row) for row in cauchy)


def generator_row(index: int, L: int, N_E: int) -> List[int]:
    """ブロック index（0 始まり）の生成行"""
    if index < L:
        return [1 if j == index else 0 for j in range(L)]
    return list(parity_matrix(L, N_E)[index - L])


def _check_code(L: int, N_E: int) -> None:
    if not 1 <= L <= N_E:
        raise ValidationError("L", L, f"1 <= L <= N_E={N_E} である必要があります")
    if N_E > FIELD_MAX_LENGTH:
        raise MdsDecodeError(f"N_E={N_E} が GF(256) の最大符号長 {FIELD_MAX_LENGTH} を超えています",
                             n_total=N_E)


def block_bytes(total_bits: int, L: int) -> int:
    """1 ブロックのバイト数 ⌈total_bits / 8L⌉"""
    return -(-total_bits // (8 * L))


def encode_bytes(payload: bytes, total_bits: int, L: int, N_E: int) -> MdsBlockSet:
    """バイト列を L 分割し N_E - L 個のパリティを付加"""
    _check_code(L, N_E)
    size = block_bytes(total_bits, L)
    padded = np.zeros(L * size, dtype=np.uint8)
    raw = np.frombuffer(payload, dtype=np.uint8)[:L * size]
    padded[:raw.size] = raw
    data = padded.reshape(L, size)

    blocks = [data[i].tobytes() for i in range(L)]
    for row in parity_matrix(L, N_E):
        acc = np.zeros(size, dtype=np.uint8)
        for j, coef in enumerate(row):
            acc ^= gf_scale(coef, data[j])
        blocks.append(acc.tobytes())
    return MdsBlockSet(n_total=N_E, k_data=L, blocks=blocks, total_bits=total_bits)


def mds_encode(codeword: MulticastCodeword, L: int, N_E: int) -> MdsBlockSet:
    """符号語を組織的 MDS 符号で N_E ブロックに符号化"""
    block_set = encode_bytes(codeword.to_bytes(), codeword.total_bits, L, N_E)
    logger.debug(f"MDS符号化: L={L}, N_E={N_E}, ブロック長={block_set.block_bytes} bytes")
    return block_set


def mds_decode(blocks: Sequence[Tuple[int, bytes]], L: int, N_E: int, total_bits: int) -> bytes:
    """
    任意の L ブロック (index, payload) から符号語を復元

    index は 0 始まり。ちょうど L 個の相異なるブロックを渡す。
    """
    _check_code(L, N_E)
    indices = [idx for idx, _ in blocks]
    if len(set(indices)) != len(indices):
        raise MdsDecodeError("ブロック番号が重複しています", indices=indices)
    bad = [idx for idx in indices if not 0 <= idx < N_E]
    if bad:
        raise MdsDecodeError(f"ブロック番号が範囲 0..{N_E - 1} 外です", indices=bad)
    if len(blocks) != L:
        raise MdsDecodeError(f"復号にはちょうど {L} ブロック必要です（{len(blocks)} ブロック）",
                             supplied=len(blocks))

    chosen = list(blocks)
    size = block_bytes(total_bits, L)
    if any(len(payload) != size for _, payload in chosen):
        raise MdsDecodeError(f"ブロック長が {size} bytes と一致しません")

    inv = gf_mat_inv([generator_row(idx, L, N_E) for idx, _ in chosen])
    received = [np.frombuffer(payload, dtype=np.uint8) for _, payload in chosen]
    data = []
    for r in range(L):
        acc = np.zeros(size, dtype=np.uint8)
        for c, coef in enumerate(inv[r]):
            acc ^= gf_scale(coef, received[c])
        data.append(acc.tobytes())

    n_bytes = -(-total_bits // 8)
    out = bytearray(b"".join(data)[:n_bytes])
    if total_bits % 8 and out:
        out[-1] &= (0xFF << (8 - total_bits % 8)) & 0xFF
    return bytes(out)


def serialize_blocks(n_total: int, k_data: int, total_bits: int,
                     blocks: Sequence[Tuple[int, bytes]]) -> bytes:
    """ヘッダ＋ブロックごとのフレームに直列化"""
    parts = [HEADER.pack(n_total, k_data, total_bits)]
    for idx, payload in blocks:
        parts.append(FRAME.pack(idx, len(payload)))
        parts.append(payload)
    return b"".join(parts)


def serialize_block_set(block_set: MdsBlockSet) -> bytes:
    return serialize_blocks(block_set.n_total, block_set.k_data, block_set.total_bits,
                            list(enumerate(block_set.blocks)))


def deserialize_blocks(data: bytes) -> Tuple[int, int, int, List[Tuple[int, bytes]]]:
    """直列化データから (n_total, k_data, total_bits, [(index, payload)]) を復元"""
    if len(data) < HEADER.size:
        raise MdsDecodeError("ヘッダが短すぎます", length=len(data))
    n_total, k_data, total_bits = HEADER.unpack_from(data, 0)
    offset = HEADER.size
    frames: List[Tuple[int, bytes]] = []
    while offset < len(data):
        if offset + FRAME.size > len(data):
            raise MdsDecodeError("フレームヘッダが途中で切れています", offset=offset)
        idx, length = FRAME.unpack_from(data, offset)
        offset += FRAME.size
        payload = data[offset:offset + length]
        if len(payload) != length:
            raise MdsDecodeError("フレームのペイロードが途中で切れています", index=idx)
        frames.append((idx, payload))
        offset += length
    return n_total, k_data, total_bits, frames
