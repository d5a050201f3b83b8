"""Print the headline numbers of the three protocols.

Linear optics: success probability and process-matrix error.  Cavity
protocols: fidelity and efficiency at the reference coupling and with side
leakage.  Imperfect linear optics: minimum per-basis fidelity.
"""
import argparse

import numpy as np

from csumsim.analysis import FIG5_PARAMS, cavity_metrics, protocol1_min_fidelity
from csumsim.cavity import CavityParams
from csumsim.circuits import build_protocol1, build_protocol2, csum_permutation, run


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--g", type=float, nargs="+", default=[2.4, 1.2])
    parser.add_argument("--kappa-s", type=float, nargs="+", default=[0.0, 0.05])
    args = parser.parse_args()

    rep = run(build_protocol1())
    err = np.max(np.abs(rep.process_matrix - csum_permutation() / 3))
    print(f"protocol 1: success probability {rep.efficiency:.12f} (1/9 = {1 / 9:.12f}), "
          f"max |U - CSUM/3| = {err:.1e}")
    e = FIG5_PARAMS
    print(f"protocol 1 with p={e.p}, phi={e.phi}, delta={e.delta:.5f}, xi={e.xi}: "
          f"min per-basis fidelity {float(protocol1_min_fidelity(e.p, e.phi, e.delta, e.xi)):.7f}")

    print(f"{'g':>5} {'kappa_s':>8} {'F2':>10} {'F3':>10} {'eta2':>9} {'eta3':>9} "
          f"{'eta2_amp':>9} {'eta3_amp':>9} {'min F2(basis)':>14}")
    for g in args.g:
        for ks in args.kappa_s:
            params = CavityParams(g=g, kappa_s=ks)
            m = cavity_metrics(params)
            fmin = run(build_protocol2(params)).min_fidelity
            print(f"{g:5.2f} {ks:8.3f} {m['F2']:10.7f} {m['F3']:10.7f} {m['eta2']:9.5f} "
                  f"{m['eta3']:9.5f} {m['eta2_amp']:9.5f} {m['eta3_amp']:9.5f} {fmin:14.8f}")


if __name__ == "__main__":
    main()
