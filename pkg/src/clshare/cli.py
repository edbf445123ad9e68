"""``clshare`` command line: run scenarios, benchmark costs, run acceptance.

Exit codes: 0 pass, 1 assertion failure, 2 usage or parse error.
"""
from __future__ import annotations

import argparse
import sys
from typing import Optional

from .errors import ParseError

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _write(path: Optional[str], text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def cmd_run(path: str, seed: Optional[int], out: Optional[str]) -> int:
    from .report import CostReport
    from .scenario import load, run_scenario

    try:
        sc = load(path)
    except (OSError, UnicodeDecodeError) as exc:
        print(f"error: cannot read {path}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ParseError as exc:
        print(f"error: {path}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    result = run_scenario(sc, seed)
    report = CostReport.from_run(result)
    body = ("# transcript\n" + result.transcript + "\n# report\n" + report.render()
            + "\n# assertions\n" + result.assertions_text())
    _write(out, body)
    if out not in (None, "-"):
        sys.stdout.write(result.assertions_text())
    return EXIT_OK if result.ok else EXIT_FAIL


def cmd_bench(protocol: str, n: int, trials: int, out: Optional[str]) -> int:
    from .report import bench

    if protocol == "segds" and n < 2:
        print("error: segds needs --n >= 2", file=sys.stderr)
        return EXIT_USAGE
    if trials < 1:
        print("error: --trials must be positive", file=sys.stderr)
        return EXIT_USAGE
    res = bench(protocol, n, trials)
    _write(out, res.render())
    return EXIT_OK if res.ok else EXIT_FAIL


def cmd_accept() -> int:
    from .acceptance import SUITE_BUDGET_S, run_all

    outcomes, elapsed = run_all(lambda line: print(line, flush=True))
    return EXIT_OK if all(o.ok for o in outcomes) and elapsed < SUITE_BUDGET_S else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="clshare", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="execute a scenario file")
    run.add_argument("file")
    run.add_argument("--seed", type=int, default=None, help="override the scenario's seed")
    run.add_argument("--out", default=None, help="write transcript and report here (default stdout)")
    b = sub.add_parser("bench", help="measure honest-run costs against the reference formulas")
    b.add_argument("--protocol", choices=("sedds", "segds"), required=True)
    b.add_argument("--n", type=int, default=5)
    b.add_argument("--trials", type=int, default=10)
    b.add_argument("--out", default=None)
    sub.add_parser("accept", help="run the acceptance suite")
    return ap


def main(argv: Optional[list[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if args.command == "run":
        if args.seed is not None and args.seed < 0:
            print("error: --seed must be non-negative", file=sys.stderr)
            return EXIT_USAGE
        return cmd_run(args.file, args.seed, args.out)
    if args.command == "bench":
        return cmd_bench(args.protocol, args.n, args.trials, args.out)
    return cmd_accept()


if __name__ == "__main__":
    sys.exit(main())
