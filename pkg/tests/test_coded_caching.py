#!/usr/bin/env python3
"""
集中型コーデッドキャッシングのテスト
"""
import sys
import unittest
from fractions import Fraction
from itertools import product
from pathlib import Path

import numpy as np

sys.path.append(str(Path(__file__).parent.parent))

from models.content import Library
from scripts.coded_caching import (
    build_multicast_codeword, cache_parameter, codeword_from_bytes, codeword_length_bits,
    place_caches, random_library, recover_file, segment_subsets, worst_case_demand,
)
from scripts.error_handler import CacheIntegrityError, ValidationError


class TestCacheParameter(unittest.TestCase):
    """t = MK/N のテスト"""

    def test_integer(self):
        """整数の t"""
        self.assertEqual(cache_parameter(4, 4, 1), 1)
        self.assertEqual(cache_parameter(4, 2, 1), 2)

    def test_rational_memory(self):
        """有理数の M"""
        self.assertEqual(cache_parameter(2, 3, Fraction(3, 2)), 1)

    def test_non_integer(self):
        """t が整数でなければエラー"""
        with self.assertRaises(ValidationError):
            cache_parameter(3, 2, 1)

    def test_subsets_lexicographic(self):
        """部分集合は辞書順"""
        self.assertEqual(segment_subsets(3, 2), [(0, 1), (0, 2), (1, 2)])


class TestDelivery(unittest.TestCase):
    """配置・配信・復元のテスト"""

    def setUp(self):
        """テスト準備"""
        self.rng = np.random.default_rng(11)
        self.library = random_library(3, 240, self.rng)
        self.assignment = place_caches(3, 3, 1, self.library)

    def test_cache_size(self):
        """各ユーザのキャッシュは M·F ビット"""
        for k in range(3):
            self.assertEqual(self.assignment.cached_bits(k), 240)

    def test_codeword_length(self):
        """伝送長 F·K(1-μ)/(1+Kμ)"""
        codeword = build_multicast_codeword([0, 1, 2], self.assignment, self.library)
        self.assertEqual(codeword.total_bits, codeword_length_bits(3, Fraction(1, 3), 240))
        self.assertEqual(codeword.total_bits, 240)
        self.assertEqual(codeword.ordered_subsets(), [(0, 1), (0, 2), (1, 2)])

    def test_all_demands_recover(self):
        """すべての要求ベクトルで全ユーザが復元"""
        for demand in product(range(3), repeat=3):
            codeword = build_multicast_codeword(list(demand), self.assignment, self.library)
            for k in range(3):
                self.assertEqual(recover_file(k, codeword, self.assignment, demand),
                                 self.library.files[demand[k]])

    def test_missing_segment(self):
        """キャッシュにないセグメントは CacheIntegrityError"""
        demand = [0, 1, 2]
        codeword = build_multicast_codeword(demand, self.assignment, self.library)
        self.assignment.per_user[0] = frozenset(list(self.assignment.per_user[0])[1:])
        with self.assertRaises(CacheIntegrityError):
            recover_file(0, codeword, self.assignment, demand)

    def test_missing_block(self):
        """符号語ブロックの欠落は CacheIntegrityError"""
        demand = [0, 1, 2]
        codeword = build_multicast_codeword(demand, self.assignment, self.library)
        del codeword.blocks[(1, 2)]
        with self.assertRaises(CacheIntegrityError):
            recover_file(1, codeword, self.assignment, demand)

    def test_codeword_from_bytes(self):
        """連結バイト列から符号語を再構成"""
        codeword = build_multicast_codeword([2, 0, 1], self.assignment, self.library)
        rebuilt = codeword_from_bytes(codeword.to_bytes(), 3, 1, codeword.total_bits)
        self.assertEqual(rebuilt.blocks, codeword.blocks)

    def test_codeword_from_bytes_bad_length(self):
        """ブロックに等分できない長さはエラー"""
        with self.assertRaises(ValidationError):
            codeword_from_bytes(b"\x00" * 10, 3, 1, 80)

    def test_invalid_demand(self):
        """範囲外の要求はエラー"""
        with self.assertRaises(ValidationError):
            build_multicast_codeword([0, 1, 5], self.assignment, self.library)

    def test_indivisible_file(self):
        """F が 8·C(K,t) で割り切れなければエラー"""
        library = Library(tuple(bytes(7) for _ in range(3)))
        with self.assertRaises(ValidationError):
            place_caches(3, 3, 1, library)

    def test_full_memory(self):
        """M = N では伝送長 0"""
        self.assertEqual(codeword_length_bits(3, 1, 240), 0)

    def test_worst_case_demand(self):
        """最悪要求は異なるファイル数が最大"""
        self.assertEqual(worst_case_demand(4, 2), [0, 1, 0, 1])
        self.assertEqual(len(set(worst_case_demand(3, 3))), 3)


if __name__ == '__main__':
    unittest.main()
