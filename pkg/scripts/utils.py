"""
ユーティリティモジュール
共通ロガー・JSON入出力・環境変数・来歴(provenance)ハッシュを提供
"""
import os
import json
import hashlib
import logging
from datetime import datetime
from typing import Dict, Any, Optional
from pathlib import Path

from dotenv import load_dotenv

# .env があれば読み込む（既存の環境変数は上書きしない）
load_dotenv(override=False)

# ログ設定
logging.basicConfig(
    level=getattr(logging, os.getenv("LOG_LEVEL", "INFO").upper(), logging.INFO),
    format='%(asctime)s - %(levelname)s - %(message)s',
    datefmt='%Y-%m-%d %H:%M:%S'
)
logger = logging.getLogger("spatialcc")

CODE_VERSION = "spatialcc 1.0.0"


def ensure_output_dir(path: Optional[str] = None) -> Path:
    """出力ディレクトリの存在を確認・作成"""
    output_dir = Path(path or os.getenv("SPATIALCC_OUTPUT_DIR", "output"))
    output_dir.mkdir(parents=True, exist_ok=True)
    return output_dir


def save_json_safely(data: Dict[str, Any], filepath: str) -> bool:
    """JSONファイルを安全に保存"""
    from scripts.error_handler import safe_file_operation

    output_path = Path(filepath)

    def write_operation():
        output_path.parent.mkdir(parents=True, exist_ok=True)
        with open(output_path, 'w', encoding='utf-8') as f:
            json.dump(data, f, ensure_ascii=False, indent=2, sort_keys=True)

    safe_file_operation("write", str(output_path), write_operation)
    logger.info(f"JSONファイル保存成功: {filepath}")
    return True


def load_json_safely(filepath: str) -> Optional[Dict[str, Any]]:
    """JSONファイルを安全に読み込み（存在しなければ None）"""
    try:
        with open(filepath, 'r', encoding='utf-8') as f:
            data = json.load(f)
        logger.info(f"JSONファイル読み込み成功: {filepath}")
        return data
    except FileNotFoundError:
        logger.warning(f"JSONファイルが見つかりません: {filepath}")
        return None


def get_env_var(key: str, required: bool = True, default: Optional[str] = None) -> Optional[str]:
    """環境変数を安全に取得"""
    value = os.getenv(key, default)
    if required and not value:
        logger.error(f"必須環境変数が設定されていません: {key}")
        raise ValueError(f"環境変数 {key} が設定されていません")
    return value


def get_env_int(key: str, default: int) -> int:
    """整数の環境変数を取得"""
    raw = get_env_var(key, required=False, default=None)
    if raw is None or raw == "":
        return default
    try:
        return int(raw)
    except ValueError:
        from scripts.error_handler import ConfigurationError
        raise ConfigurationError(key, f"環境変数 {key} は整数である必要があります: {raw!r}")


def config_hash(payload: Dict[str, Any]) -> str:
    """正規化JSONのSHA-256（先頭16桁）"""
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def format_number(value: float) -> str:
    """CSV用の12有効桁表記"""
    return f"{float(value):.12g}"


class PerformanceMonitor:
    """パフォーマンス監視機能"""

    def __init__(self):
        self.metrics: Dict[str, Dict[str, Any]] = {}

    def start_timing(self, operation: str):
        """タイミング開始"""
        self.metrics[operation] = {"start": datetime.now()}

    def end_timing(self, operation: str) -> Optional[float]:
        """タイミング終了"""
        entry = self.metrics.get(operation)
        if not entry or "start" not in entry:
            return None
        end_time = datetime.now()
        duration = (end_time - entry["start"]).total_seconds()
        entry.update({"end": end_time, "duration_seconds": duration})
        logger.info(f"Performance: {operation} took {duration:.2f} seconds")
        return duration

    def get_metrics(self) -> Dict[str, Any]:
        """メトリクス取得"""
        return self.metrics


performance_monitor = PerformanceMonitor()
