#!/usr/bin/env python3
"""
基本テストスイート
プロジェクト構造・依存関係・テンプレート・モジュールの構文確認
"""
import sys
from pathlib import Path
import unittest

# プロジェクトルートをパスに追加
sys.path.append(str(Path(__file__).parent.parent))


class TestProjectStructure(unittest.TestCase):
    """プロジェクト構造テスト"""

    def setUp(self):
        """テスト準備"""
        self.project_root = Path(__file__).parent.parent

    def test_project_structure(self):
        """プロジェクト構造の確認"""
        for dir_name in ["scripts", "models", "templates", "tests"]:
            dir_path = self.project_root / dir_name
            self.assertTrue(dir_path.exists(), f"Required directory missing: {dir_name}")

    def test_required_files(self):
        """必須ファイルの存在確認"""
        required_files = [
            "README.md",
            "DESIGN.md",
            "requirements.txt",
            ".env.example",
            "scripts/utils.py",
            "scripts/error_handler.py",
            "scripts/cli.py",
            "templates/deliver_report.txt.jinja",
            "templates/validate_summary.txt.jinja",
        ]
        for file_name in required_files:
            file_path = self.project_root / file_name
            self.assertTrue(file_path.exists(), f"Required file missing: {file_name}")

    def test_environment_variables_template(self):
        """環境変数テンプレートの確認"""
        content = (self.project_root / ".env.example").read_text(encoding='utf-8')
        for var in ["SPATIALCC_SEED", "SPATIALCC_WORKERS", "SPATIALCC_OUTPUT_DIR", "LOG_LEVEL", "DEBUG"]:
            self.assertIn(var, content, f"Required environment variable {var} not found in .env.example")


class TestConfiguration(unittest.TestCase):
    """設定ファイルテスト"""

    def setUp(self):
        """テスト準備"""
        self.project_root = Path(__file__).parent.parent

    def test_requirements_txt_format(self):
        """requirements.txtの形式確認"""
        content = (self.project_root / "requirements.txt").read_text(encoding='utf-8')
        for dep in ["numpy", "scipy", "mpmath", "jinja2", "python-dotenv", "pytest"]:
            self.assertIn(dep, content, f"Core dependency {dep} not found in requirements.txt")

    def test_readme_content(self):
        """README.mdの内容確認"""
        content = (self.project_root / "README.md").read_text(encoding='utf-8')
        for section in ["spatialcc", "## 🚀 概要", "## 🔧 インストール", "## 🏗️ アーキテクチャ",
                        "## 🚨 トラブルシューティング"]:
            self.assertIn(section, content, f"Required README section {section} not found")


class TestScripts(unittest.TestCase):
    """スクリプト基本テスト"""

    def setUp(self):
        """テスト準備"""
        self.project_root = Path(__file__).parent.parent

    def test_utils_import(self):
        """utils.pyのインポート確認"""
        from scripts import utils
        self.assertTrue(hasattr(utils, 'logger'), "logger not found in utils")
        self.assertTrue(utils.CODE_VERSION.startswith("spatialcc"))

    def test_scripts_syntax(self):
        """スクリプトファイルの構文確認"""
        for script_path in sorted((self.project_root / "scripts").glob("*.py")):
            content = script_path.read_text(encoding='utf-8')
            try:
                compile(content, str(script_path), 'exec')
            except SyntaxError as e:
                self.fail(f"Syntax error in {script_path.name}: {e}")


if __name__ == '__main__':
    unittest.main()
