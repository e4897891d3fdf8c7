"""Discretisation study for a single hat at p = 1 + theta.

For each number of cells per hat side and each starting multiple m, sweeps
eps over one octave of grid multiples (m..2m cells) and reports the error
of the eps -> 0 intercept against the quadrature value 2*c1. This is the
study behind the hat-array resolution choice (h = l_K / 128, m = 16).

    python scripts/hat_convergence.py --theta 1.5 --out results/hat_convergence.csv
"""

import argparse

from sepergy import gallery, quadrature
from sepergy.energy import energy_sweep
from sepergy.experiments import _octave
from sepergy.grid import EnergyParams, ProductDomain, atomic_write


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--theta", type=float, default=1.5)
    ap.add_argument("--cells", type=int, nargs="+", default=[64, 128, 256])
    ap.add_argument("--m", type=int, nargs="+", default=[4, 8, 12, 16])
    ap.add_argument("--out", default="results/hat_convergence.csv")
    args = ap.parse_args()
    t = args.theta / 2
    target = quadrature.hat_energy(t, t)
    rows = ["cells_per_side,m,eps_max_over_l,extrapolated,rel_error"]
    for cells in args.cells:
        entry = gallery.hat(1.0, 1.0, (0.0, 0.0), t, t, domain=ProductDomain.square(-0.6, 1.6))
        u = entry.render(int(round(2.2 * cells)))
        h = float(u.spacing[0])
        for m in args.m:
            eps = _octave(h, m)
            if eps[0] > 0.3:
                continue
            rep = energy_sweep(u, EnergyParams(t, t, 1 + args.theta), eps)
            err = None if rep.extrapolated is None else rep.extrapolated / target - 1
            rows.append(f"{cells},{m},{eps[0]!r},{rep.extrapolated!r},{err!r}")
            print(rows[-1], flush=True)
    atomic_write(args.out, "\n".join(rows) + "\n")


if __name__ == "__main__":
    main()
