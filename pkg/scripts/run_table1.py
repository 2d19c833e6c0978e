"""Mine a corpus, train the diffusion model and compare initializations on fresh graphs.

Prints the per-size mean ratio table. Defaults are the desk-scale settings
(500 graphs); pass ``--count 3500`` for the full-size corpus.
"""

import argparse
import json
from pathlib import Path

from diffqaoa.cli import main


def parse_args():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("runs/table1"))
    ap.add_argument("--count", type=int, default=500, help="training graphs")
    ap.add_argument("--test-count", type=int, default=50)
    ap.add_argument("--seed", type=int, default=1, help="corpus and training seed")
    ap.add_argument("--eval-seed", type=int, default=2)
    ap.add_argument("--workers", type=int, default=1)
    return ap.parse_args()


def run(*argv):
    code = main([str(a) for a in argv])
    if code:
        raise SystemExit(code)


def main_script():
    a = parse_args()
    data, model, ev = a.out / "data", a.out / "model", a.out / "eval"
    # gen-data resumes, so an interrupted run can simply be restarted
    run("gen-data", "--count", a.count, "--seed", a.seed, "--workers", a.workers, "--out", data)
    if not (model / "model.ckpt.json").exists():
        run("train", "--corpus", data / "corpus.jsonl", "--seed", a.seed, "--out", model)
    run("eval", "--checkpoint", model / "model.ckpt.json", "--count", a.test_count,
        "--seed", a.eval_seed, "--out", ev)

    report = json.loads((ev / "report.json").read_text())
    print(f"\n{'n':>3}  {'graphs':>6}  {'mean ratio':>10}")
    counts = {}
    for r in report["instances"]:
        if r["ratio"] != "undefined":
            counts[r["n"]] = counts.get(r["n"], 0) + 1
    for n, v in report["mean_ratio_by_size"].items():
        print(f"{n:>3}  {counts.get(int(n), 0):>6}  {v:>10.3f}")
    print(f"all  {sum(counts.values()):>6}  {report['mean_ratio']:>10.3f}")


if __name__ == "__main__":
    main_script()
