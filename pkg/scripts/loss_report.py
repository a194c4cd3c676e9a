"""Rounding loss on the lower-bound chains, exact and against the stated closed form.

    python3 scripts/loss_report.py --r 2 3
"""
import argparse
from fractions import Fraction

from twsc import lowerbound as LB
from twsc import markov as M


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--r", type=int, nargs="+", default=[2])
    args = p.parse_args()

    header = ("r", "k", "N", "|F|", "y_sep", "separation", "sep/y_sep", "stated 1/2+A(t1)", "|F|/(1/2+A(t1))")
    print("  ".join(header))
    for r in args.r:
        row = LB.rounding_loss_report(r)
        params = LB.HkParams(row.k, row.N, row.eps)
        a_t1 = M.potentials(LB.gen_Hk(params)).A[-1][M.T1]
        loss = row.flow_value / (Fraction(1, 2) + a_t1)
        print(f"{row.r}  {row.k}  {row.N}  {float(row.flow_value):.4f}  {float(row.y_sep):.4f}  "
              f"{row.separation}  {float(row.ratio):.4f}  {float(row.claim_ratio):.4f}  "
              f"{float(loss):.4f} (target {0.9 * (row.k - 1):.1f})")


if __name__ == "__main__":
    main()
