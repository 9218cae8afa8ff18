"""Command-line entry point: ``pncdf dump`` and ``pncdf bench``."""
from __future__ import annotations

import argparse
import sys

from .bench import PartitionPattern, bench_flash, bench_partition
from .dump import dump
from .errors import NCError


def _shape(text: str) -> tuple:
    try:
        dims = tuple(int(p) for p in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"shape must look like 8x8x8, got {text!r}") from None
    if len(dims) != 3:
        raise argparse.ArgumentTypeError("shape needs exactly three dimensions")
    return dims


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pncdf", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("dump", help="print a CDL-style listing of a classic file")
    d.add_argument("path")
    d.add_argument("--header-only", action="store_true")
    d.add_argument("--var", metavar="NAME", help="dump data for one variable only")

    b = sub.add_parser("bench", help="run an access-pattern benchmark")
    bsub = b.add_subparsers(dest="bench", required=True)

    bp = bsub.add_parser("partition", help="3-D array partitioned along Z/Y/X combinations")
    bp.add_argument("--shape", type=_shape, default=(8, 8, 8), metavar="ZxYxX")
    bp.add_argument("--type", default="double",
                    choices=["byte", "char", "short", "int", "float", "double"])
    bp.add_argument("--pattern", default="Z", type=str.upper,
                    choices=[p.value for p in PartitionPattern])
    bp.add_argument("--n", type=int, default=1)
    bp.add_argument("--mode", choices=["write", "read"], default="write")
    bp.add_argument("--out", required=True, metavar="PATH")
    bp.add_argument("--aggregators", type=int, metavar="A")
    bp.add_argument("--independent", action="store_true",
                    help="use independent instead of collective access")

    bf = bsub.add_parser("flash", help="FLASH-style (Block,*,*,*) checkpoint write")
    bf.add_argument("--nxb", type=int, default=8)
    bf.add_argument("--nyb", type=int, default=8)
    bf.add_argument("--nzb", type=int, default=8)
    bf.add_argument("--nblocks", type=int, default=80)
    bf.add_argument("--nvar", type=int, default=24)
    bf.add_argument("--nguard", type=int, default=0)
    bf.add_argument("--n", type=int, default=1)
    bf.add_argument("--out", required=True, metavar="PATH")
    bf.add_argument("--aggregators", type=int, metavar="A")
    return p


def _summary(report) -> str:
    bw = ", ".join(
        f"{phase}={report.bandwidth(phase):.1f}MB/s"
        for phase in ("write", "read") if phase in report.seconds
    )
    return (f"digest={report.digest} file_bytes={report.file_bytes} "
            f"data_bytes={report.data_bytes} mismatches={report.mismatches} {bw}").rstrip()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "dump":
            sys.stdout.write(dump(args.path, header_only=args.header_only, var=args.var))
            return 0
        if args.bench == "partition":
            report = bench_partition(
                args.shape, args.type, args.pattern, args.n, args.mode, args.out,
                aggregators=args.aggregators, collective=not args.independent,
            )
        else:
            report = bench_flash(
                args.nxb, args.nyb, args.nzb, args.nblocks, args.nvar, args.n, args.out,
                nguard=args.nguard, aggregators=args.aggregators,
            )
    except (NCError, OSError, ValueError, KeyError) as e:
        print(f"pncdf: error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    sys.stdout.write(report.to_csv())
    print(_summary(report), file=sys.stderr)
    if report.mismatches:
        print(f"pncdf: error: {report.mismatches} elements failed verification", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
