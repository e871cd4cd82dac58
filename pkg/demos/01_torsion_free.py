#!/usr/bin/env python3
"""Check that the Bryant-Salamon 4-form is closed and self-dual.

Samples random points in both charts, builds the 4-form and its metric, and
prints the worst residual of each structure check for a few values of the
zero-section size ``c``.  Run with ``python demos/01_torsion_free.py``.
"""

from bscayley.suites import run_suites


def main() -> None:
    for chart in ("so3", "sp1"):
        for c in (0.0, 1.0, 2.5):
            print(f"chart={chart} c={c:g}")
            for res in run_suites(chart, c, n_points=50, seed=1):
                flag = "ok  " if res.passed else "FAIL"
                print(f"  {flag} {res.suite:<16} {res.max_residual:.2e}  (tolerance {res.tolerance:.0e})")


if __name__ == "__main__":
    main()
