"""Evaluate a trained checkpoint on one graph per size for 9 to 16 nodes."""

import argparse
import json
from pathlib import Path

from diffqaoa.cli import main


def parse_args():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--checkpoint", type=Path, default=Path("runs/table1/model/model.ckpt.json"))
    ap.add_argument("--out", type=Path, default=Path("runs/extrapolation"))
    ap.add_argument("--sizes", default="9,10,11,12,13,14,15,16")
    ap.add_argument("--seed", type=int, default=2)
    return ap.parse_args()


if __name__ == "__main__":
    a = parse_args()
    code = main(["eval", "--suite", "large", "--checkpoint", str(a.checkpoint), "--large-sizes", a.sizes,
                 "--seed", str(a.seed), "--out", str(a.out)])
    if code:
        raise SystemExit(code)
    report = json.loads((a.out / "report.json").read_text())
    print(f"\n{'n':>3}  {'ground':>7}  {'ddpm':>9}  {'random':>9}  {'ratio':>7}")
    for r in report["instances"]:
        ratio = r["ratio"] if r["ratio"] == "undefined" else f"{r['ratio']:.3f}"
        print(f"{r['n']:>3}  {r['ground_energy']:>7}  {r['best_energy_ddpm']:>9.4f}  "
              f"{r['best_energy_random']:>9.4f}  {ratio:>7}")
    print(f"mean ratio {report['mean_ratio']:.3f}")
