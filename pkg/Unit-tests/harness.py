"""
Shared setup for the test scripts: puts Main/ on the import path and runs
a script's test_* functions with an [OK]/[FAIL] report.

Each script is runnable on its own (python3 Unit-tests/test_x.py) and is
also collected by pytest.
"""

import os
import sys
import traceback

MAIN_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "Main")
if MAIN_DIR not in sys.path:
    sys.path.insert(0, MAIN_DIR)

from utils.logger import set_quiet  # noqa: E402

set_quiet(True)


def run_tests(namespace: dict, title: str) -> int:
    """Run every test_* callable in namespace; returns the exit code"""
    tests = [(name, fn) for name, fn in namespace.items() if name.startswith("test_") and callable(fn)]
    print(f"\n=== {title} ===")
    failures = []
    for name, fn in tests:
        try:
            fn()
            print(f"[OK] {name}")
        except Exception as e:
            failures.append(name)
            print(f"[FAIL] {name}: {type(e).__name__}: {e}")
            traceback.print_exc()

    print("\n" + "=" * 50)
    print(f"{len(tests) - len(failures)}/{len(tests)} passed")
    for name in failures:
        print(f"  failed: {name}")
    return 1 if failures else 0
