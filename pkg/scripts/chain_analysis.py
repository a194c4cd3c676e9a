"""Flow against endpoint probability and cut costs on random layered chains.

    python3 scripts/chain_analysis.py --count 200 --width 4
"""
import argparse
import random
from collections import Counter

from twsc import markov as M


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--count", type=int, default=200)
    p.add_argument("--width", type=int, default=4)
    p.add_argument("--max-layers", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    rng = random.Random(args.seed)
    routes = Counter()
    worst_flow = worst_cost = 0.0
    for _ in range(args.count):
        chain = M.random_chain(random.Random(rng.randrange(10 ** 9)), rng.randint(1, args.max_layers),
                               args.width, stickiness=rng.choice([0, 20, 400]))
        prof = M.potentials(chain)
        value = M.max_flow(chain)[0]
        p_end = M.p_s0_t1(chain)
        if p_end:
            worst_flow = max(worst_flow, float(value / p_end))
        cc = M.cut_and_cluster(chain, prof)
        routes[cc.route] += 1
        if cc.relative_cost is not None:
            worst_cost = max(worst_cost, float(cc.relative_cost))
    print(f"chains            {args.count} (width <= {args.width})")
    print(f"max flow / p      {worst_flow:.4f}")
    print(f"max relative cost {worst_cost:.4f}  (configured C = {float(M.configured_C(args.width)):.4g})")
    print(f"routes            {dict(routes)}")


if __name__ == "__main__":
    main()
