#!/usr/bin/env python3
"""FLASH-style checkpoint write at several rank counts.

Each run writes nvar DOUBLE variables of shape (nblocks*n, nzb, nyb, nxb),
rank r owning a contiguous range of blocks, and checks the file against a
single writer producing the same global array. Reports the data-section
size, write-phase op count and (informational) bandwidth per run.
"""
from __future__ import annotations

import argparse
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

from pncdf.bench import bench_flash


@dataclass
class FlashConfig:
    nxb: int = 8
    nyb: int = 8
    nzb: int = 8
    nblocks: int = 80
    nvar: int = 24
    nguard: int = 0
    ranks: list = field(default_factory=lambda: [1, 2, 4])
    aggregators: int | None = None


def run(cfg: FlashConfig) -> int:
    failures = 0
    print("n,data_bytes,expected_bytes,write_ops,write_seconds,MB_per_s,digest_ok")
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        for n in cfg.ranks:
            rep = bench_flash(cfg.nxb, cfg.nyb, cfg.nzb, cfg.nblocks, cfg.nvar, n,
                              tmp / "par.nc", nguard=cfg.nguard, aggregators=cfg.aggregators)
            ref = bench_flash(cfg.nxb, cfg.nyb, cfg.nzb, cfg.nblocks, cfg.nvar, n,
                              tmp / "ser.nc", serial=True)
            expected = cfg.nblocks * n * cfg.nvar * cfg.nxb * cfg.nyb * cfg.nzb * 8
            ok = rep.digest == ref.digest and rep.data_bytes == expected
            failures += not ok
            print(f"{n},{rep.data_bytes},{expected},{rep.ops['write']},"
                  f"{rep.seconds['write']:.4f},{rep.bandwidth('write'):.1f},{ok}")
    return failures


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    for name, default in (("nxb", 8), ("nyb", 8), ("nzb", 8), ("nblocks", 80), ("nvar", 24),
                          ("nguard", 0)):
        p.add_argument(f"--{name}", type=int, default=default)
    p.add_argument("--ranks", default="1,2,4")
    p.add_argument("--aggregators", type=int)
    a = p.parse_args(argv)
    cfg = FlashConfig(a.nxb, a.nyb, a.nzb, a.nblocks, a.nvar, a.nguard,
                      [int(x) for x in a.ranks.split(",")], a.aggregators)
    return 1 if run(cfg) else 0


if __name__ == "__main__":
    sys.exit(main())
