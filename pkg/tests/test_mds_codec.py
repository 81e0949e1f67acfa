#!/usr/bin/env python3
"""
MDS ブロック層のテスト
"""
import struct
import sys
from itertools import combinations
from pathlib import Path

import numpy as np
import pytest

sys.path.append(str(Path(__file__).parent.parent))

from models.content import MulticastCodeword
from scripts.error_handler import MdsDecodeError, ValidationError
from scripts.mds_codec import (
    deserialize_blocks, encode_bytes, gf_inv, gf_mul, mds_decode, mds_encode, parity_matrix,
    serialize_block_set,
)


@pytest.fixture
def payload():
    return np.random.default_rng(3).integers(0, 256, 60, dtype=np.uint8).tobytes()


class TestGaloisField:
    """GF(256) 演算のテスト"""

    def test_inverse(self):
        """a·a⁻¹ = 1"""
        for a in range(1, 256):
            assert gf_mul(a, gf_inv(a)) == 1

    def test_zero(self):
        """0 との積は 0、0 の逆元はない"""
        assert gf_mul(0, 77) == 0
        with pytest.raises(ZeroDivisionError):
            gf_inv(0)

    def test_normalized_parity(self):
        """パリティ行列の先頭行・先頭列は 1"""
        P = parity_matrix(4, 8)
        assert all(v == 1 for v in P[0])
        assert all(row[0] == 1 for row in P)


class TestEncodeDecode:
    """符号化・復号のテスト"""

    def test_systematic(self, payload):
        """先頭 L ブロックは元データ"""
        block_set = encode_bytes(payload, 480, 3, 6)
        assert b"".join(block_set.blocks[:3]) == payload

    def test_every_subset_decodes(self, payload):
        """任意の L ブロックから復号"""
        block_set = encode_bytes(payload, 480, 3, 6)
        indexed = list(enumerate(block_set.blocks))
        for subset in combinations(indexed, 3):
            assert mds_decode(list(subset), 3, 6, 480) == payload

    def test_xor_parity(self, payload):
        """N_E = L+1 では XOR パリティ"""
        block_set = encode_bytes(payload, 480, 3, 4)
        data = [np.frombuffer(b, dtype=np.uint8) for b in block_set.blocks[:3]]
        assert block_set.blocks[3] == np.bitwise_xor.reduce(data).tobytes()

    def test_repetition(self, payload):
        """L = 1 では繰り返し符号"""
        block_set = encode_bytes(payload, 480, 1, 4)
        assert all(block == payload for block in block_set.blocks)

    def test_padding(self):
        """L で割り切れない長さは末尾ゼロ詰め"""
        codeword = MulticastCodeword(blocks={(0, 1): b"\x01\x02\x03\x04\x05"}, total_bits=40)
        block_set = mds_encode(codeword, 2, 3)
        assert block_set.block_bytes == 3
        assert mds_decode([(2, block_set.blocks[2]), (0, block_set.blocks[0])], 2, 3, 40) == \
            b"\x01\x02\x03\x04\x05"

    def test_duplicate_indices(self, payload):
        """重複したブロック番号はエラー"""
        block_set = encode_bytes(payload, 480, 2, 4)
        with pytest.raises(MdsDecodeError):
            mds_decode([(1, block_set.blocks[1]), (1, block_set.blocks[1])], 2, 4, 480)

    def test_too_few_blocks(self, payload):
        """L 未満のブロックはエラー"""
        block_set = encode_bytes(payload, 480, 3, 5)
        with pytest.raises(MdsDecodeError):
            mds_decode([(0, block_set.blocks[0]), (4, block_set.blocks[4])], 3, 5, 480)

    def test_too_many_blocks(self, payload):
        """L を超えるブロックもエラー"""
        block_set = encode_bytes(payload, 480, 2, 4)
        with pytest.raises(MdsDecodeError):
            mds_decode([(i, block_set.blocks[i]) for i in (0, 1, 3)], 2, 4, 480)

    def test_out_of_range_index(self, payload):
        """範囲外のブロック番号はエラー"""
        block_set = encode_bytes(payload, 480, 2, 4)
        with pytest.raises(MdsDecodeError):
            mds_decode([(0, block_set.blocks[0]), (9, block_set.blocks[1])], 2, 4, 480)

    def test_code_too_long(self):
        """N_E > 255 は GF(256) では構成できない"""
        with pytest.raises(MdsDecodeError):
            encode_bytes(b"\x00" * 8, 64, 2, 256)

    def test_invalid_L(self):
        """L > N_E はエラー"""
        with pytest.raises(ValidationError):
            encode_bytes(b"\x00" * 8, 64, 5, 4)


class TestWireFormat:
    """直列化形式のテスト"""

    def test_header_layout(self, payload):
        """ヘッダは n_total, k_data, total_bits（ビッグエンディアン）"""
        wire = serialize_block_set(encode_bytes(payload, 480, 3, 5))
        assert struct.unpack(">BBQ", wire[:10]) == (5, 3, 480)
        assert struct.unpack(">BI", wire[10:15]) == (0, 20)

    def test_deserialize(self, payload):
        """直列化データを読み戻す"""
        block_set = encode_bytes(payload, 480, 3, 5)
        n_total, k_data, total_bits, frames = deserialize_blocks(serialize_block_set(block_set))
        assert (n_total, k_data, total_bits) == (5, 3, 480)
        assert [payload for _, payload in frames] == block_set.blocks
        assert mds_decode(frames[2:], k_data, n_total, total_bits) == payload

    def test_truncated_frame(self, payload):
        """途中で切れたフレームはエラー"""
        wire = serialize_block_set(encode_bytes(payload, 480, 3, 5))
        with pytest.raises(MdsDecodeError):
            deserialize_blocks(wire[:-3])

    def test_short_header(self):
        """ヘッダ長未満はエラー"""
        with pytest.raises(MdsDecodeError):
            deserialize_blocks(b"\x05\x03")
