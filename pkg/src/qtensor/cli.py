"""Command-line interface: qtensor run | compare | export."""

from __future__ import annotations

import argparse
import os
import sys


def _apply_thread_cap():
    cap = os.environ.get("QTENSOR_THREADS")
    if not cap:
        return
    # cap kernel worker threads before the numerical stack loads; outputs
    # are deterministic regardless of the setting
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                "NUMEXPR_NUM_THREADS"):
        os.environ.setdefault(var, cap)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="qtensor",
        description="Landau-de Gennes Q-tensor minimization laboratory",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute an experiment config")
    p_run.add_argument("config", help="path to the INI config file")
    p_run.add_argument("--out", default=None, help="override the output directory")

    p_cmp = sub.add_parser("compare", help="diff two run directories")
    p_cmp.add_argument("dir_a")
    p_cmp.add_argument("dir_b")
    p_cmp.add_argument("--tol", type=float, default=0.0,
                       help="relative tolerance before exit code 1")

    p_exp = sub.add_parser("export", help="convert a field dump")
    p_exp.add_argument("dump", help="qfield or csv dump path")
    p_exp.add_argument("--format", required=True, choices=["csv", "qfield"])
    p_exp.add_argument("-o", "--out", default=None)
    return parser


def main(argv=None):
    _apply_thread_cap()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses exit code 2 for usage errors already
        return int(exc.code or 0)

    from . import runner

    if args.command == "run":
        return runner.run(args.config, out_dir=args.out)
    if args.command == "compare":
        code, _ = runner.compare(args.dir_a, args.dir_b, tol=args.tol)
        return code
    if args.command == "export":
        return runner.export(args.dump, args.format, out_path=args.out)
    return 2


if __name__ == "__main__":
    sys.exit(main())
