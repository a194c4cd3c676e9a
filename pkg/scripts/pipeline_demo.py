"""Generate, solve, round and compare one seeded treewidth-r instance.

    python3 scripts/pipeline_demo.py --n 14 --r 2 --seed 3
"""
import argparse
from fractions import Fraction

from twsc import instances as I
from twsc import rounding, salp


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=14)
    p.add_argument("--r", type=int, default=2)
    p.add_argument("--seed", type=int, default=3)
    p.add_argument("--demands", type=int, default=6)
    p.add_argument("--c", type=Fraction, default=Fraction(1, 100))
    args = p.parse_args()

    inst, td = I.gen_partial_ktree(args.n, args.r, 1.0, seed=args.seed, num_demands=args.demands)
    sol = salp.solve_relaxation(inst, td)
    salp.check_integrity(inst, sol)
    cut = rounding.derandomize(inst, td, sol, c=args.c).cut
    opt = I.brute_force_sparsest_cut(inst).sparsity if inst.n <= I.oracle_guard() else None

    print(f"n={inst.n}  width={td.width}  variables={len(sol.values)}")
    print(f"alpha      {sol.objective}")
    print(f"derandom   {cut.sparsity}")
    print(f"optimum    {opt}")
    print()
    print("pair      lp_distance  separation  ratio")
    for (i, j), d, q, x in rounding.pair_report(inst, td, sol):
        print(f"{i:>3}-{j:<3}  {float(d):>11.4f}  {float(q):>10.4f}  {'-' if x is None else f'{float(x):.4f}'}")


if __name__ == "__main__":
    main()
