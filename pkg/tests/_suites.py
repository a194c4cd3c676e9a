"""Seeded instance suites shared by the unit and acceptance tests."""
import itertools
import random
from fractions import Fraction
from functools import lru_cache

from twsc import instances as I
from twsc import markov as M
from twsc import salp


def _ktree(seed, n, r, demands):
    inst, td = I.gen_partial_ktree(n, r, 1.0, seed=seed, num_demands=demands)
    return inst, td, salp.solve_relaxation(inst, td)


def random_graph(seed, n_lo=3, n_hi=7, max_edges=None):
    rng = random.Random(seed)
    n = rng.randint(n_lo, n_hi)
    pairs = list(itertools.combinations(range(n), 2))
    rng.shuffle(pairs)
    hi = len(pairs) if max_edges is None else min(max_edges, len(pairs))
    return n, pairs[:rng.randint(1, hi)]


@lru_cache(maxsize=None)
def edge_suite():
    """50 partial k-trees with r in {1, 2, 3} and n <= 20."""
    out = []
    for s in range(50):
        rng = random.Random(5000 + s)
        r = (1, 2, 3)[s % 3]
        n = rng.randint(6, {1: 20, 2: 18, 3: 14}[r])
        out.append(_ktree(5000 + s, n, r, rng.randint(2, 8)))
    return tuple(out)


@lru_cache(maxsize=None)
def r2_suite():
    """30 treewidth-2 instances: 20 partial 2-trees and 10 max-cut reductions.

    All have n <= 20 and at most 10 demand pairs. The reductions are the
    instances with non-integral per-pair separation ratios.
    """
    out = []
    for s in range(20):
        rng = random.Random(1000 + s)
        out.append(_ktree(1000 + s, rng.randint(8, 20), 2, rng.randint(3, 10)))
    for s in range(10):
        n, edges = random_graph(2000 + s, 4, 7, max_edges=9)
        inst, td = I.maxcut_reduction(n, edges)
        out.append((inst, td, salp.solve_relaxation(inst, td)))
    return tuple(out)


@lru_cache(maxsize=None)
def r2_chains():
    from twsc.rounding import common_bag

    chains = []
    for inst, td, sol in r2_suite():
        for u, v, _ in inst.demands:
            if common_bag(td, u, v) is None:
                chains.append(M.build_chain(sol, td, u, v))
    return tuple(chains)


def drift_chain(P1, P2, mu, y, delta):
    """Width-4 chain whose s0 -> t1 path descends in small steps.

    State 1 starts at potential 1/2, is pulled towards 0 by exchanging ``y``
    with its mirror for ``P1`` layers, then towards -1/2 by exchanging
    ``delta`` with the lower rail for ``P2`` layers. Only the middle-removal
    part of the width-4 cut can separate s0 from t1 here.
    """
    half = Fraction(1, 2)
    m0 = half - mu
    masses = [(half, half), (m0, mu, mu, m0)]
    caps = [{(0, 0): m0, (0, 1): mu, (1, 3): m0, (1, 2): mu}]
    for l in range(P1 + P2):
        c = {}

        def add(a, b, x):
            c[(a, b)] = c.get((a, b), 0) + x
            c[(3 - a, 3 - b)] = c.get((3 - a, 3 - b), 0) + x

        if l < P1:
            add(1, 2, y)
            add(1, 1, mu - y)
            add(0, 0, m0)
        else:
            add(3, 1, delta)
            add(1, 3, delta)
            add(1, 1, mu - delta)
            add(0, 0, m0 - delta)
        caps.append(c)
        masses.append((m0, mu, mu, m0))
    caps.append({(0, 0): m0, (1, 1): mu, (2, 0): mu, (3, 1): m0})
    masses.append((half, half))
    caps = tuple({k: v for k, v in c.items() if v} for c in caps)
    return M.MarkovFlowGraph(tuple(masses), caps).check()


def mixture_solution(inst, td, sides, weights):
    """Feasible relaxation point from a weighted mix of cuts and their complements.

    ``y_I = c sum_k w_k ([I inside S_k] + [I misses S_k]) / 2`` with ``c``
    chosen so the normalization row holds. Pairs that share no bag are
    generally not separated by the rounding with the mixture's probability,
    which makes these points useful beyond the integral optima.
    """
    from twsc.salp import SaSolution, SaVariableRegistry, objective_of

    reg = SaVariableRegistry.for_instance(inst, td)
    total = sum(weights)
    weights = [Fraction(w) / total for w in weights]
    dem = sum(w * I.evaluate_cut(inst, s).cut_demand for s, w in zip(sides, weights))
    c = 1 / dem
    vals = tuple(c * sum(w * Fraction(int(sub <= s) + int(sub.isdisjoint(s)), 2)
                         for s, w in zip(sides, weights)) for sub in reg.subsets)
    sol = SaSolution(reg, vals, 0)
    return SaSolution(reg, vals, objective_of(inst, sol))


def random_mixture(seed, n=9, r=2, demands=4, parts=3):
    rng = random.Random(seed)
    inst, td = I.gen_partial_ktree(n, r, 1.0, seed=seed, num_demands=demands)
    while True:
        sides = [frozenset(v for v in range(n) if rng.random() < 0.5) for _ in range(parts)]
        if any(I.evaluate_cut(inst, s).feasible for s in sides):
            break
    return inst, td, mixture_solution(inst, td, sides, [rng.randint(1, 5) for _ in sides])
