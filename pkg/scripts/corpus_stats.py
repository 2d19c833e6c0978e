"""Summarize how close the mined angles get to the exact ground energy, per node count."""

import argparse
from collections import defaultdict

import numpy as np

from diffqaoa.dataset import load_corpus


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("corpus")
    ap.add_argument("--within", type=float, default=0.05, help="relative gap to count as close")
    a = ap.parse_args()

    corpus = load_corpus(a.corpus)
    fractions = defaultdict(list)
    for r in corpus.records:
        fractions[r.graph.n].append(r.best_energy / r.ground_energy)
    print(f"{'n':>3}  {'graphs':>6}  {'mean E/E0':>9}  {'close':>6}")
    every = []
    for n, f in sorted(fractions.items()):
        f = np.array(f)
        every.append(f)
        print(f"{n:>3}  {f.size:>6}  {f.mean():>9.3f}  {np.mean(f >= 1 - a.within):>6.2f}")
    f = np.concatenate(every)
    print(f"all  {f.size:>6}  {f.mean():>9.3f}  {np.mean(f >= 1 - a.within):>6.2f}")


if __name__ == "__main__":
    main()
