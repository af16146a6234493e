#!/usr/bin/env python3
"""
测试运行脚本

不带参数时发现并运行 tests/ 下的全部测试；给出模块名（如 bsde、ergodic）时
只运行对应的 tests/test_<模块名>.py。蒙特卡洛测试较慢，可用 --failfast 提前停止。
"""

import argparse
import sys
import unittest
from pathlib import Path

# 添加项目根目录到 Python 路径
repo_root = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(repo_root))
test_dir = repo_root / "tests"


def _parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(description="运行 twoscale-lab 的单元测试")
    parser.add_argument("modules", nargs="*", help="模块名，例如 bsde ergodic；缺省运行全部")
    parser.add_argument("-q", "--quiet", action="store_true", help="只输出汇总")
    parser.add_argument("--failfast", action="store_true", help="遇到第一个失败即停止")
    return parser.parse_args(argv)


def build_suite(modules: list[str]) -> unittest.TestSuite | None:
    """按模块名组装测试集；任一模块不存在时返回 None。"""
    loader = unittest.TestLoader()
    if not modules:
        return loader.discover(start_dir=str(test_dir), pattern="test_*.py")

    suite = unittest.TestSuite()
    for name in modules:
        test_file = test_dir / f"test_{name}.py"
        if not test_file.exists():
            print(f"测试文件不存在: {test_file}")
            return None
        suite.addTests(loader.loadTestsFromName(f"tests.test_{name}"))
    return suite


def main(argv: list[str] | None = None) -> int:
    args = _parse_args(argv)
    if not test_dir.exists():
        print("测试目录不存在: tests/")
        return 1

    print("开始运行测试...")
    print("=" * 50)
    print(f"运行测试: {', '.join(args.modules)}" if args.modules else "运行所有测试...")

    suite = build_suite(args.modules)
    if suite is None:
        return 1
    runner = unittest.TextTestRunner(verbosity=1 if args.quiet else 2, failfast=args.failfast)
    result = runner.run(suite)

    print("=" * 50)
    if result.wasSuccessful():
        print("所有测试通过")
        return 0
    print(f"部分测试失败：失败 {len(result.failures)}，错误 {len(result.errors)}")
    return 1


if __name__ == "__main__":
    sys.exit(main())
