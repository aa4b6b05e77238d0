"""Arch load-position sweep through the CLI, then a per-position f1 table."""

import argparse
import csv
from pathlib import Path

from masonry_modal.cli import main as cli_main

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--model", default=ROOT / "models" / "arch.json", type=Path)
    ap.add_argument("--out", default=Path("out/arch_sweep"), type=Path)
    ap.add_argument("--modes", type=int, default=4)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    code = cli_main(["sweep", "--model", str(args.model), "--out", str(args.out),
                     "--modes", str(args.modes), "--threads", str(args.threads)])
    with open(args.out / "sweep.csv") as fh:
        rows = list(csv.DictReader(fh))
    f_lin = float(rows[0]["f1_hz"])
    print(f"linear f1 = {f_lin:.4f} Hz, base f1 = {float(rows[1]['f1_hz']):.4f} Hz")
    table = {}
    for r in rows[2:]:
        if r["converged"] == "1":
            table.setdefault((r["position"], float(r["x"])), []).append((float(r["load_n"]), float(r["f1_hz"])))
    mags = sorted({P for v in table.values() for P, _ in v})
    print(f"{'pos':>5s} {'x':>7s} " + " ".join(f"{P / 1e3:>7.1f}kN" for P in mags))
    for (label, x), vals in sorted(table.items(), key=lambda kv: kv[0][1]):
        f = dict(vals)
        print(f"{label:>5s} {x:7.3f} " + " ".join(f"{f[P] / f_lin:9.4f}" if P in f else " " * 9 for P in mags))
    return code


if __name__ == "__main__":
    raise SystemExit(main())
