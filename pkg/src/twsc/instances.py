"""Sparsest-Cut instances, cuts, tree decompositions, generators and oracles.

All instance data is exact: capacities and demand weights are Fractions.
A cut is named by its side ``side0`` (the vertices labelled 0); its sparsity
is cut capacity over cut demand and is only defined when some demand is cut.
"""
from __future__ import annotations

import itertools
import json
import math
import os
import random
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from ._rational import as_fraction, fmt

DEFAULT_GUARD_N = 26
DEFAULT_DECOMPOSE_GUARD = 16


class InstanceError(ValueError):
    """Malformed instance, decomposition, or an oracle guard violation."""


def oracle_guard(default=DEFAULT_GUARD_N):
    """Enumeration guard, overridable through ``TWSC_GUARD_N``."""
    value = os.environ.get("TWSC_GUARD_N")
    return int(value) if value else default


def _pair(u, v):
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True)
class Instance:
    """Capacitated graph on vertices ``0..n-1`` with weighted demand pairs.

    ``edges`` and ``demands`` are tuples of ``(u, v, weight)`` with ``u < v``,
    sorted, one entry per unordered pair. Use :meth:`build` to normalize raw
    input (it merges duplicates and drops zero-weight demands).
    """

    n: int
    edges: tuple
    demands: tuple

    def __post_init__(self):
        if self.n < 2:
            raise InstanceError("an instance needs at least two vertices")
        for name, items in (("edge", self.edges), ("demand", self.demands)):
            seen = set()
            for u, v, w in items:
                if not (0 <= u < self.n and 0 <= v < self.n):
                    raise InstanceError(f"{name} ({u},{v}) has an invalid endpoint")
                if u == v:
                    raise InstanceError(f"{name} ({u},{v}) is a self-loop")
                if w < 0:
                    raise InstanceError(f"{name} ({u},{v}) has negative weight")
                key = _pair(u, v)
                if key in seen:
                    raise InstanceError(f"duplicate {name} pair {key}")
                seen.add(key)
        if not any(w > 0 for _, _, w in self.demands):
            raise InstanceError("at least one demand weight must be positive")

    @classmethod
    def build(cls, n, edges, demands):
        """Normalize raw ``(u, v, weight)`` lists into an Instance.

        Repeated pairs have their weights summed; zero-weight demands are
        dropped so that they never reach the relaxation.
        """
        def merge(items):
            acc = {}
            for u, v, w in items:
                u, v = int(u), int(v)
                if u == v:
                    raise InstanceError(f"pair ({u},{v}) is a self-loop")
                key = _pair(u, v)
                acc[key] = acc.get(key, Fraction(0)) + as_fraction(w)
            return acc

        e = merge(edges)
        d = {k: w for k, w in merge(demands).items() if w != 0}
        return cls(
            int(n),
            tuple((u, v, w) for (u, v), w in sorted(e.items())),
            tuple((u, v, w) for (u, v), w in sorted(d.items())),
        )

    @property
    def vertices(self):
        return range(self.n)

    def to_json(self):
        return {
            "n": self.n,
            "edges": [[u, v, fmt(w)] for u, v, w in self.edges],
            "demands": [[u, v, fmt(w)] for u, v, w in self.demands],
        }

    @classmethod
    def from_json(cls, data):
        try:
            return cls.build(data["n"], data["edges"], data["demands"])
        except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
            raise InstanceError(f"bad instance file: {exc}") from exc


@dataclass(frozen=True)
class TreeDecomposition:
    bags: tuple
    tree_edges: tuple
    _adj: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        bags = tuple(frozenset(int(v) for v in b) for b in self.bags)
        edges = tuple(tuple(sorted((int(a), int(b)))) for a, b in self.tree_edges)
        object.__setattr__(self, "bags", bags)
        object.__setattr__(self, "tree_edges", edges)
        adj = [[] for _ in bags]
        for a, b in edges:
            if 0 <= a < len(bags) and 0 <= b < len(bags):
                adj[a].append(b)
                adj[b].append(a)
        object.__setattr__(self, "_adj", tuple(tuple(sorted(x)) for x in adj))

    @property
    def width(self):
        return max(len(b) for b in self.bags) - 1

    def neighbors(self, b):
        return self._adj[b]

    def bags_containing(self, v):
        return [i for i, bag in enumerate(self.bags) if v in bag]

    def distances_from(self, sources):
        """BFS distance (in tree edges) from a set of bags to every bag."""
        dist = {s: 0 for s in sources}
        queue = deque(sorted(sources))
        while queue:
            a = queue.popleft()
            for b in self._adj[a]:
                if b not in dist:
                    dist[b] = dist[a] + 1
                    queue.append(b)
        return dist

    def path(self, a, b):
        """Bags on the tree path from ``a`` to ``b`` (inclusive)."""
        parent = {a: None}
        queue = deque([a])
        while queue:
            x = queue.popleft()
            if x == b:
                break
            for y in self._adj[x]:
                if y not in parent:
                    parent[y] = x
                    queue.append(y)
        if b not in parent:
            raise InstanceError(f"bags {a} and {b} are not connected")
        out = [b]
        while out[-1] != a:
            out.append(parent[out[-1]])
        return out[::-1]

    def to_json(self):
        return {
            "bags": [sorted(b) for b in self.bags],
            "tree_edges": [list(e) for e in self.tree_edges],
        }

    @classmethod
    def from_json(cls, data):
        try:
            return cls(tuple(data["bags"]), tuple(tuple(e) for e in data["tree_edges"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise InstanceError(f"bad decomposition file: {exc}") from exc


class Violation(NamedTuple):
    kind: str
    witness: tuple
    message: str


@dataclass(frozen=True)
class DecompositionCheck:
    valid: bool
    width: int | None
    violations: tuple

    def __bool__(self):
        return self.valid


@dataclass(frozen=True)
class CutReport:
    side0: frozenset
    cut_capacity: Fraction
    cut_demand: Fraction
    sparsity: Fraction | None
    feasible: bool

    def labels(self, n):
        return tuple(0 if v in self.side0 else 1 for v in range(n))


@dataclass(frozen=True)
class Assignment:
    """Total 0/1 labelling of the vertices, stored by vertex index."""

    labels: tuple

    @property
    def side0(self):
        return frozenset(v for v, b in enumerate(self.labels) if b == 0)

    def cut(self, inst):
        if len(self.labels) != inst.n:
            raise InstanceError("assignment domain differs from the vertex set")
        return evaluate_cut(inst, self.side0)


def evaluate_cut(inst, side0):
    side0 = frozenset(side0)
    if not side0 <= set(inst.vertices):
        raise InstanceError("side0 contains vertices outside the instance")
    cap = sum((w for u, v, w in inst.edges if (u in side0) != (v in side0)), Fraction(0))
    dem = sum((w for u, v, w in inst.demands if (u in side0) != (v in side0)), Fraction(0))
    feasible = dem > 0
    return CutReport(side0, cap, dem, cap / dem if feasible else None, feasible)


def validate_decomposition(inst, td):
    """Check tree-ness and properties (i)-(iii); never raises."""
    violations = []
    m = len(td.bags)
    if m == 0:
        return DecompositionCheck(False, None, (Violation("empty", (), "no bags"),))
    for a, b in td.tree_edges:
        if not (0 <= a < m and 0 <= b < m) or a == b:
            violations.append(Violation("bad_tree_edge", (a, b), f"tree edge ({a},{b}) is invalid"))
    if len(set(td.tree_edges)) != m - 1:
        violations.append(Violation("not_a_tree", (len(td.tree_edges), m),
                                    f"{len(set(td.tree_edges))} tree edges for {m} bags"))
    reach = td.distances_from([0])
    if len(reach) != m:
        missing = min(set(range(m)) - set(reach))
        violations.append(Violation("disconnected_tree", (missing,),
                                    f"bag {missing} is not connected to bag 0"))
    for v in inst.vertices:
        holders = td.bags_containing(v)
        if not holders:
            violations.append(Violation("vertex_uncovered", (v,), f"vertex {v} is in no bag"))
            continue
        sub = set(holders)
        seen = {holders[0]}
        queue = [holders[0]]
        while queue:
            a = queue.pop()
            for b in td.neighbors(a):
                if b in sub and b not in seen:
                    seen.add(b)
                    queue.append(b)
        if seen != sub:
            violations.append(Violation("vertex_not_connected", (v,),
                                        f"bags containing vertex {v} are not connected"))
    for u, v, _ in inst.edges:
        if not any(u in b and v in b for b in td.bags):
            violations.append(Violation("edge_uncovered", (u, v), f"edge ({u},{v}) is in no bag"))
    for i, b in enumerate(td.bags):
        extra = sorted(x for x in b if not 0 <= x < inst.n)
        if extra:
            violations.append(Violation("unknown_vertex", (i, extra[0]),
                                        f"bag {i} holds unknown vertex {extra[0]}"))
    valid = not violations
    return DecompositionCheck(valid, td.width if valid else None, tuple(violations))


def _scaled_ints(weights):
    den = 1
    for w in weights:
        den = math.lcm(den, w.denominator)
    return [int(w * den) for w in weights]


def brute_force_sparsest_cut(inst, guard=None):
    """Exact sparsest cut by enumeration of all bipartitions.

    Sides always contain vertex 0; ties go to the lexicographically smallest
    sorted ``side0``.
    """
    guard = oracle_guard() if guard is None else guard
    n = inst.n
    if n > guard:
        raise InstanceError(f"n={n} exceeds the enumeration guard {guard}")
    caps = _scaled_ints([w for _, _, w in inst.edges])
    dems = _scaled_ints([w for _, _, w in inst.demands])
    big = max(sum(caps), sum(dems)) >= 2**62
    dtype = object if big else np.int64
    total = 1 << (n - 1)
    chunk = 1 << 18
    best_ratio = math.inf
    candidates = []
    for start in range(1, total, chunk):
        masks = np.arange(start, min(total, start + chunk), dtype=np.int64)

        def label(v):
            if v == 0:
                return np.zeros_like(masks)
            return (masks >> (v - 1)) & 1

        cap = np.zeros(len(masks), dtype=dtype)
        dem = np.zeros(len(masks), dtype=dtype)
        for (u, v, _), c in zip(inst.edges, caps):
            cap += c * (label(u) ^ label(v))
        for (u, v, _), d in zip(inst.demands, dems):
            dem += d * (label(u) ^ label(v))
        ok = dem > 0
        if not ok.any():
            continue
        ratio = np.full(len(masks), np.inf)
        ratio[ok] = np.asarray(cap[ok], dtype=float) / np.asarray(dem[ok], dtype=float)
        low = ratio.min()
        if low <= best_ratio * (1 + 1e-9):
            if low < best_ratio:
                best_ratio = low
                candidates = [m for m in candidates if m[0] <= low * (1 + 1e-9)]
            idx = np.nonzero(ratio <= best_ratio * (1 + 1e-9))[0]
            candidates.extend((ratio[i], int(masks[i]), int(cap[i]), int(dem[i])) for i in idx)
    if not candidates:
        raise InstanceError("no cut separates a positive-weight demand pair")
    best = None
    for _, mask, c, d in candidates:
        side0 = tuple([0] + [v for v in range(1, n) if not (mask >> (v - 1)) & 1])
        key = (Fraction(c, d), side0)
        if best is None or key < best:
            best = key
    return evaluate_cut(inst, best[1])


def brute_force_max_cut(n, edges):
    """Max-Cut value of a simple unweighted graph and one optimal side."""
    best = (-1, None)
    for mask in range(1 << (n - 1)):
        side = {0} | {v for v in range(1, n) if (mask >> (v - 1)) & 1}
        val = sum(1 for u, v in edges if (u in side) != (v in side))
        if val > best[0]:
            best = (val, frozenset(side))
    return best


def maxcut_reduction(n, edges):
    """Reduce Max-Cut on a simple graph to Sparsest-Cut on ``K_{2,n}``.

    Vertex ``i`` stands for the original vertex, ``s = n`` and ``t = n + 1``.
    Returns the instance and its width-2 path decomposition ``{s, t, i}``.
    """
    if n < 2:
        raise InstanceError("max-cut reduction needs n >= 2")
    norm = {_pair(int(u), int(v)) for u, v in edges}
    if any(u == v for u, v in norm):
        raise InstanceError("graph must be simple")
    s, t = n, n + 1
    cap_edges = [(s, i, 1) for i in range(n)] + [(t, i, 1) for i in range(n)]
    demands = [(u, v, 1) for u, v in sorted(norm)] + [(s, t, n**3)]
    inst = Instance.build(n + 2, cap_edges, demands)
    td = TreeDecomposition(
        tuple(frozenset({s, t, i}) for i in range(n)),
        tuple((i, i + 1) for i in range(n - 1)),
    )
    return inst, td


def _random_capacity(rng):
    return Fraction(rng.randint(4, 40), 4)


def _random_demands(rng, n, count):
    pairs = list(itertools.combinations(range(n), 2))
    return [(u, v, 1) for u, v in sorted(rng.sample(pairs, min(count, len(pairs))))]


def gen_partial_ktree(n, r, keep_prob=1.0, seed=0, num_demands=None):
    """Random partial ``r``-tree with its width-``r`` decomposition.

    A random ``r``-tree is grown by attaching each new vertex to an ``r``-clique
    of an existing bag; each of its edges then survives with ``keep_prob``.
    Capacities lie in ``[1, 10]`` with denominator 4; demands are ``ceil(n/2)``
    distinct random pairs of unit weight unless ``num_demands`` is given.
    """
    if n < r + 1 or n < 2:
        raise InstanceError("need n >= max(r + 1, 2)")
    if not 0 <= keep_prob <= 1:
        raise InstanceError("keep_prob must lie in [0, 1]")
    rng = random.Random(seed)
    bags = [frozenset(range(r + 1))]
    tree_edges = []
    for v in range(r + 1, n):
        b = rng.randrange(len(bags))
        drop = rng.choice(sorted(bags[b]))
        bags.append((bags[b] - {drop}) | {v})
        tree_edges.append((b, len(bags) - 1))
    all_edges = sorted({_pair(u, v) for bag in bags for u, v in itertools.combinations(bag, 2)})
    kept = [(u, v) for u, v in all_edges if rng.random() < keep_prob]
    edges = [(u, v, _random_capacity(rng)) for u, v in kept]
    count = math.ceil(n / 2) if num_demands is None else num_demands
    inst = Instance.build(n, edges, _random_demands(rng, n, count))
    return inst, TreeDecomposition(tuple(bags), tuple(tree_edges))


def gen_path(n, seed=0, num_demands=None):
    """Weighted path ``0 - 1 - ... - n-1`` with its width-1 path decomposition."""
    rng = random.Random(seed)
    edges = [(i, i + 1, _random_capacity(rng)) for i in range(n - 1)]
    count = math.ceil(n / 2) if num_demands is None else num_demands
    inst = Instance.build(n, edges, _random_demands(rng, n, count))
    td = TreeDecomposition(
        tuple(frozenset({i, i + 1}) for i in range(n - 1)),
        tuple((i, i + 1) for i in range(n - 2)),
    )
    return inst, td


def _popcount(x):
    return bin(x).count("1")


def find_decomposition_small(inst, r, guard=DEFAULT_DECOMPOSE_GUARD):
    """Exact search for a decomposition of width at most ``r``.

    Searches elimination orderings by dynamic programming over the set of
    eliminated vertices; returns None when the treewidth exceeds ``r``.
    """
    n = inst.n
    if n > guard:
        raise InstanceError(f"n={n} exceeds the decomposition guard {guard}")
    adj = [0] * n
    for u, v, _ in inst.edges:
        adj[u] |= 1 << v
        adj[v] |= 1 << u
    full = (1 << n) - 1

    def q_set(eliminated, v):
        # vertices outside eliminated+{v} reachable from v through eliminated ones
        seen = 1 << v
        out = 0
        stack = [v]
        while stack:
            x = stack.pop()
            nb = adj[x] & ~seen
            seen |= nb
            out |= nb & ~eliminated
            inner = nb & eliminated
            while inner:
                low = inner & -inner
                stack.append(low.bit_length() - 1)
                inner ^= low
        return out

    failed = set()
    order = []

    def search(eliminated):
        if eliminated == full:
            return True
        if eliminated in failed:
            return False
        for v in range(n):
            if eliminated >> v & 1:
                continue
            if _popcount(q_set(eliminated, v)) <= r:
                order.append(v)
                if search(eliminated | 1 << v):
                    return True
                order.pop()
        failed.add(eliminated)
        return False

    if not search(0):
        return None
    pos = {v: i for i, v in enumerate(order)}
    bags, higher = [], []
    eliminated = 0
    for v in order:
        q = q_set(eliminated, v)
        nbrs = [x for x in range(n) if q >> x & 1]
        bags.append({v, *nbrs})
        higher.append(nbrs)
        eliminated |= 1 << v
    edges = []
    roots = []
    for i, v in enumerate(order):
        if higher[i]:
            edges.append((i, pos[min(higher[i], key=pos.get)]))
        else:
            roots.append(i)
    edges += [(roots[k], roots[k + 1]) for k in range(len(roots) - 1)]
    return _contract_subset_bags(bags, edges)


def _contract_subset_bags(bags, edges):
    bags = [set(b) for b in bags]
    adj = {i: set() for i in range(len(bags))}
    for a, b in edges:
        adj[a].add(b)
        adj[b].add(a)
    changed = True
    while changed:
        changed = False
        for a in sorted(adj):
            for b in sorted(adj[a]):
                if bags[a] <= bags[b]:
                    for c in adj[a] - {b}:
                        adj[c].discard(a)
                        adj[c].add(b)
                        adj[b].add(c)
                    adj[b].discard(a)
                    del adj[a]
                    changed = True
                    break
            if changed:
                break
    keep = sorted(adj)
    index = {old: new for new, old in enumerate(keep)}
    tree_edges = sorted({tuple(sorted((index[a], index[b]))) for a in keep for b in adj[a]})
    return TreeDecomposition(tuple(frozenset(bags[i]) for i in keep), tuple(tree_edges))


def load_json(path):
    with open(path) as fh:
        return json.load(fh)


def dump_json(data, path):
    with open(path, "w") as fh:
        json.dump(data, fh, indent=1, sort_keys=True)
        fh.write("\n")
