"""Locate where the deterministic-protocol fidelity F2 fails to be monotone.

For each side-leakage value the script reports the coupling at which F2
peaks, and for each coupling whether F2 decreases with side leakage.
"""
import argparse

import numpy as np

from csumsim.analysis import Axis, SweepGrid, sweep


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--g", default="0.5:3.0:251")
    parser.add_argument("--kappa-s", default="0.0:0.1:11")
    args = parser.parse_args()
    glo, ghi, gn = args.g.split(":")
    klo, khi, kn = args.kappa_s.split(":")
    grid = SweepGrid((Axis("g", float(glo), float(ghi), int(gn)),
                      Axis("kappa_s", float(klo), float(khi), int(kn))))
    f2 = sweep("F2", grid).values["F2"]
    g, ks = grid.axes[0].values, grid.axes[1].values
    print(f"{'kappa_s':>8} {'argmax g':>9} {'max F2':>11} {'F2(g max)':>11} monotone in g")
    for j, k in enumerate(ks):
        col = f2[:, j]
        mono = bool(np.all(np.diff(col) >= -1e-12))
        print(f"{k:8.3f} {g[np.argmax(col)]:9.3f} {col.max():11.8f} {col[-1]:11.8f} {mono}")
    rising = [f"{gv:.2f}" for i, gv in enumerate(g) if np.any(np.diff(f2[i]) > 1e-12)]
    print(f"couplings where F2 increases with kappa_s somewhere: {len(rising)} of {len(g)}"
          + (f" (from g = {rising[0]} to {rising[-1]})" if rising else ""))


if __name__ == "__main__":
    main()
