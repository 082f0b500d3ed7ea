"""Run every bundled harness scenario and diff it against its expected-outcome file.

    python3 scripts/run_scenarios.py [--show]
"""

import argparse
import difflib
import sys
import time

from tbids.harness import scenario


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--show", action="store_true", help="print each report")
    args = ap.parse_args()
    failed = 0
    for name in scenario.bundled_names():
        start = time.perf_counter()
        got = scenario.scenario_run(name)
        expected = scenario.expected_lines(name)
        status = "ok" if got == expected else "MISMATCH"
        print(f"{name}: {status} ({time.perf_counter() - start:.2f}s)")
        if args.show:
            print("\n".join("  " + line for line in got))
        if got != expected:
            failed += 1
            sys.stdout.writelines(line + "\n" for line in difflib.unified_diff(expected, got, "expected", "got", lineterm=""))
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
