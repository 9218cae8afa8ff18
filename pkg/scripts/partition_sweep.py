#!/usr/bin/env python3
"""Sweep every partition pattern and rank count over tt(Z,Y,X).

For each (pattern, n) the array is written collectively and independently,
read back collectively, and compared by digest with the single-writer file.
One CSV row per phase goes to --csv (default stdout); a summary table with
op counts goes to stderr. Bandwidth figures are informational only.
"""
from __future__ import annotations

import argparse
import csv
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

from pncdf.bench import CSV_COLUMNS, PATTERNS_3D, bench_partition


@dataclass
class SweepConfig:
    shape: tuple = (8, 8, 8)
    etype: str = "double"
    patterns: list = field(default_factory=lambda: [p.value for p in PATTERNS_3D])
    ranks: list = field(default_factory=lambda: [1, 2, 4, 8])
    aggregators: int | None = None
    workdir: Path | None = None


def run(cfg: SweepConfig, out) -> int:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_COLUMNS + ("access",))
    failures = 0
    with tempfile.TemporaryDirectory(dir=cfg.workdir) as tmp:
        tmp = Path(tmp)
        ref = bench_partition(cfg.shape, cfg.etype, "Z", 1, "write", tmp / "ref.nc").digest
        print(f"{'pattern':>7} {'n':>3} {'coll ops':>8} {'ind ops':>8} {'digest':>7}",
              file=sys.stderr)
        for pattern in cfg.patterns:
            for n in cfg.ranks:
                path = tmp / f"{pattern}_{n}.nc"
                coll = bench_partition(cfg.shape, cfg.etype, pattern, n, "write", path,
                                       aggregators=cfg.aggregators)
                ind = bench_partition(cfg.shape, cfg.etype, pattern, n, "write",
                                      tmp / "ind.nc", collective=False)
                read = bench_partition(cfg.shape, cfg.etype, pattern, n, "read", path,
                                       aggregators=cfg.aggregators)
                ok = coll.digest == ref and ind.digest == ref and read.mismatches == 0
                failures += not ok
                for rep, access in ((coll, "collective"), (ind, "independent"),
                                    (read, "collective")):
                    for row in rep.rows():
                        writer.writerow(row + (access,))
                print(f"{pattern:>7} {n:>3} {coll.ops['write']:>8} {ind.ops['write']:>8} "
                      f"{'ok' if ok else 'DIFF':>7}", file=sys.stderr)
    return failures


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--shape", default="8x8x8")
    p.add_argument("--type", default="double")
    p.add_argument("--patterns", default=",".join(p.value for p in PATTERNS_3D))
    p.add_argument("--ranks", default="1,2,4,8")
    p.add_argument("--aggregators", type=int)
    p.add_argument("--csv", type=argparse.FileType("w"), default=sys.stdout)
    a = p.parse_args(argv)
    cfg = SweepConfig(
        shape=tuple(int(x) for x in a.shape.split("x")), etype=a.type,
        patterns=a.patterns.upper().split(","), ranks=[int(x) for x in a.ranks.split(",")],
        aggregators=a.aggregators,
    )
    failures = run(cfg, a.csv)
    if failures:
        print(f"{failures} configurations differ from the single-writer file", file=sys.stderr)
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
