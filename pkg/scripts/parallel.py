#!/usr/bin/env python3
"""
試行並列実行ユーティリティ
試行ごとの乱数ストリームを (seed, 試行番号) から導出し、
固定長チャンクをワーカープールで処理して試行順に結合する。
結果はワーカー数に依存しない。
"""
import sys
from multiprocessing import Pool
from pathlib import Path
from typing import Any, Callable, List, Sequence, Tuple

import numpy as np

sys.path.append(str(Path(__file__).parent.parent))

from scripts.utils import logger

DEFAULT_CHUNK = 512

ChunkWorker = Callable[..., Any]


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """試行 trial 専用の乱数生成器"""
    return np.random.default_rng([int(seed), int(trial)])


def chunk_ranges(n_trials: int, chunk_size: int = DEFAULT_CHUNK) -> List[Tuple[int, int]]:
    """[start, stop) の固定長チャンク列"""
    return [(start, min(start + chunk_size, n_trials)) for start in range(0, n_trials, chunk_size)]


def _run_chunk(task: Tuple[ChunkWorker, int, int, int, Sequence[Any]]) -> Any:
    worker, seed, start, stop, args = task
    return worker(seed, start, stop, *args)


def run_trials(worker: ChunkWorker, n_trials: int, seed: int, workers: int = 1,
               args: Sequence[Any] = (), chunk_size: int = DEFAULT_CHUNK) -> List[Any]:
    """
    worker(seed, start, stop, *args) を各チャンクに適用し、チャンク順の結果リストを返す

    worker はモジュールトップレベルの関数であること（pickle 可能）。
    """
    tasks = [(worker, seed, start, stop, tuple(args)) for start, stop in chunk_ranges(n_trials, chunk_size)]
    if workers > 1 and len(tasks) > 1:
        processes = min(workers, len(tasks))
        logger.debug(f"並列実行: {len(tasks)} チャンク, {processes} プロセス")
        with Pool(processes=processes) as pool:
            return pool.map(_run_chunk, tasks)
    return [_run_chunk(task) for task in tasks]
