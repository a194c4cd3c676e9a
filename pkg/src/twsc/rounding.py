"""Randomized rounding of a relaxation solution along a tree decomposition.

Walking the bag tree from a root, each bag's new vertices are sampled from the
solution's local distribution conditioned on the vertices already labelled.
The resulting law on full assignments is the junction-tree product of the bag
distributions, so it can also be evaluated exactly: by chaining transition
matrices between consecutive separators (:class:`SeparatorChain`), by message
passing over the rooted bag tree (:class:`RoundingProcess`), or for small
``n`` by summing over all ``2^n`` assignments.
"""
from __future__ import annotations

import itertools
import random
from collections import deque
from dataclasses import dataclass
from fractions import Fraction

from .instances import Assignment, InstanceError, evaluate_cut
from .salp import SolutionIntegrityError

NAIVE_GUARD_N = 14


class CertificationError(RuntimeError):
    """A derandomized cut that misses the sparsity target ``alpha / c``."""

    def __init__(self, message, outcome=None):
        super().__init__(message)
        self.outcome = outcome


def epsilon0(k):
    """Finest clustering threshold of the general flow analysis for width-``k`` chains."""
    return Fraction(1, 6 * k * (12 * k * k) ** (k - 1))


def default_c(r):
    """Guarantee constant used by derandomization for decompositions of width ``r``."""
    if r <= 2:
        return Fraction(1, 100)
    return epsilon0(2**r) ** 2 / 2


@dataclass(frozen=True)
class TraversalPlan:
    """Connected order of the bags; ``plus[b]``/``minus[b]`` split bag ``b``
    into already-labelled and new vertices."""

    order: tuple
    parent: dict
    plus: dict
    minus: dict

    @property
    def root(self):
        return self.order[0]

    @classmethod
    def from_order(cls, td, order):
        order = tuple(order)
        if sorted(order) != list(range(len(td.bags))):
            raise InstanceError("a traversal must list every bag exactly once")
        seen = set()
        covered = set()
        parent, plus, minus = {}, {}, {}
        for pos, b in enumerate(order):
            if pos:
                earlier = [a for a in td.neighbors(b) if a in seen]
                if not earlier:
                    raise InstanceError(f"bag {b} is not adjacent to an earlier bag")
                parent[b] = earlier[0]
            else:
                parent[b] = None
            plus[b] = tuple(sorted(td.bags[b] & covered))
            minus[b] = tuple(sorted(td.bags[b] - covered))
            covered |= td.bags[b]
            seen.add(b)
        return cls(order, parent, plus, minus)

    @classmethod
    def bfs(cls, td, root=0):
        order = [root]
        seen = {root}
        queue = deque([root])
        while queue:
            a = queue.popleft()
            for b in td.neighbors(a):
                if b not in seen:
                    seen.add(b)
                    order.append(b)
                    queue.append(b)
        return cls.from_order(td, order)


@dataclass(frozen=True)
class RoundingOutcome:
    assignment: Assignment
    cut: object
    edge_cut: tuple
    demand_cut: tuple
    seed: object

    def to_json(self):
        from ._rational import fmt

        return {
            "labels": list(self.assignment.labels),
            "sparsity": None if self.cut.sparsity is None else fmt(self.cut.sparsity),
            "cut_capacity": fmt(self.cut.cut_capacity),
            "cut_demand": fmt(self.cut.cut_demand),
            "seed": self.seed,
        }


def _outcome(inst, labels, seed):
    labels = tuple(labels[v] for v in range(inst.n))
    a = Assignment(labels)
    return RoundingOutcome(
        a,
        a.cut(inst),
        tuple(labels[u] != labels[v] for u, v, _ in inst.edges),
        tuple(labels[u] != labels[v] for u, v, _ in inst.demands),
        seed,
    )


class RoundingProcess:
    """The rounding law for one (solution, traversal plan) pair.

    ``table[b]`` maps a labelling of ``plus[b]`` to the support list of
    ``(labelling of minus[b], conditional probability)``.
    """

    def __init__(self, td, sol, plan=None):
        self.td = td
        self.sol = sol
        self.plan = plan or TraversalPlan.bfs(td)
        self.children = {b: [] for b in self.plan.order}
        for b in self.plan.order[1:]:
            self.children[self.plan.parent[b]].append(b)
        self.home = {}
        for b in self.plan.order:
            for v in self.plan.minus[b]:
                self.home[v] = b
        self.table = {b: self._conditionals(b) for b in self.plan.order}

    def _conditionals(self, b):
        plus, minus = self.plan.plus[b], self.plan.minus[b]
        dist = self.sol.local_distribution(self.td.bags[b])
        dom = dist.domain
        pp = [dom.index(v) for v in plus]
        mp = [dom.index(v) for v in minus]
        joint = {}
        for lab, p in dist.probs.items():
            if p == 0:
                continue
            key = tuple(lab[k] for k in pp)
            joint.setdefault(key, []).append((tuple(lab[k] for k in mp), p))
        table = {}
        for key, items in joint.items():
            mass = sum(p for _, p in items)
            table[key] = sorted((m, p / mass) for m, p in items)
        return table

    def conditional(self, b, labels):
        key = tuple(labels[v] for v in self.plan.plus[b])
        try:
            return self.table[b][key]
        except KeyError:
            raise SolutionIntegrityError(
                f"bag {b}: conditioning on {dict(zip(self.plan.plus[b], key))} with zero mass") from None

    def sample(self, rng):
        labels = {}
        for b in self.plan.order:
            items = self.conditional(b, labels)
            u = rng.random()
            acc = 0.0
            choice = items[-1][0]
            for m, p in items:
                acc += float(p)
                if u < acc:
                    choice = m
                    break
            labels.update(zip(self.plan.minus[b], choice))
        return labels

    def query(self, vertices, evidence=None):
        """Law of the labels on ``vertices`` given the partial labelling ``evidence``.

        Message passing over the bags on root paths of the vertices involved;
        returns a dict from label tuples (ordered like sorted ``vertices``) to
        conditional probabilities.
        """
        evidence = dict(evidence or {})
        q = tuple(sorted(set(vertices)))
        free = [v for v in q if v not in evidence]
        relevant = set()
        for v in set(free) | set(evidence):
            b = self.home[v]
            while b is not None and b not in relevant:
                relevant.add(b)
                b = self.plan.parent[b]
        messages = {}
        for b in reversed(self.plan.order):
            if b not in relevant:
                continue
            plus, minus = self.plan.plus[b], self.plan.minus[b]
            kids = [c for c in self.children[b] if c in relevant]
            qpos = [(k, v) for k, v in enumerate(minus) if v in free]
            epos = [(k, evidence[v]) for k, v in enumerate(minus) if v in evidence]
            out = {}
            for key, items in self.table[b].items():
                acc = {}
                local = dict(zip(plus, key))
                for m, p in items:
                    if any(m[k] != bit for k, bit in epos):
                        continue
                    local.update(zip(minus, m))
                    part = {tuple((v, m[k]) for k, v in qpos): p}
                    for c in kids:
                        msg = messages[c].get(tuple(local[v] for v in self.plan.plus[c]))
                        if not msg:
                            part = {}
                            break
                        part = {a + k2: w1 * w2 for a, w1 in part.items() for k2, w2 in msg.items()}
                    for a, w in part.items():
                        acc[a] = acc.get(a, 0) + w
                out[key] = acc
            messages[b] = out
        root_msg = messages[self.plan.root].get((), {})
        total = sum(root_msg.values())
        if total == 0:
            raise SolutionIntegrityError("evidence has zero probability under the rounding law")
        result = {}
        for a, w in root_msg.items():
            lab = dict(a)
            lab.update(evidence)
            key = tuple(lab[v] for v in q)
            result[key] = result.get(key, 0) + w / total
        return result

    def separation(self, u, v, evidence=None):
        law = self.query((u, v), evidence)
        return sum((p for lab, p in law.items() if lab[0] != lab[1]), 0 * next(iter(law.values())))

    def bag_marginal(self, b):
        return self.query(self.td.bags[b])


def sc_round(inst, td, sol, seed=0, plan=None, process=None):
    """One run of the randomized rounding; deterministic given ``seed``."""
    process = process or RoundingProcess(td, sol, plan)
    labels = process.sample(random.Random(seed))
    return _outcome(inst, labels, seed)


def naive_joint(td, sol, plan=None, guard=NAIVE_GUARD_N):
    """Probability of every full assignment, by direct enumeration."""
    process = RoundingProcess(td, sol, plan)
    n = 1 + max(max(b) for b in td.bags)
    if n > guard:
        raise InstanceError(f"n={n} exceeds the enumeration guard {guard}")
    out = {}
    for labs in itertools.product((0, 1), repeat=n):
        labels = dict(enumerate(labs))
        w = 1
        for b in process.plan.order:
            key = tuple(labels[v] for v in process.plan.plus[b])
            m = tuple(labels[v] for v in process.plan.minus[b])
            w *= dict(process.table[b].get(key, [])).get(m, 0)
            if w == 0:
                break
        if w:
            out[labs] = w
    return out


@dataclass(frozen=True)
class SeparatorChain:
    """Markov chain of separator labellings along the bag path from ``i`` to ``j``.

    ``separators[l]`` is a sorted vertex tuple; ``states[l]`` its support
    labellings in lexicographic order, so the complement of state ``a`` is state
    ``len - 1 - a``; ``joint[l][a][b]`` is the probability of state ``a`` at
    layer ``l`` together with state ``b`` at layer ``l + 1``.
    """

    pair: tuple
    bag_path: tuple
    separators: tuple
    states: tuple
    masses: tuple
    joint: tuple

    @property
    def length(self):
        return len(self.separators) - 1

    def transition(self, l):
        return [[c / self.masses[l][a] for c in row] for a, row in enumerate(self.joint[l])]

    def endpoint_law(self):
        """Joint law of (label of i, label of j) by chaining transitions."""
        first = range(len(self.states[0]))
        cur = [[m if a == x else 0 * m for a, m in enumerate(self.masses[0])] for x in first]
        for l in range(self.length):
            t = self.transition(l)
            nxt = []
            for row in cur:
                nxt.append([sum((row[a] * t[a][b] for a in range(len(row))), 0 * self.masses[0][0])
                            for b in range(len(self.states[l + 1]))])
            cur = nxt
        law = {}
        for x in first:
            for b, lab in enumerate(self.states[-1]):
                law[(self.states[0][x][0], lab[0])] = cur[x][b]
        return law

    def separation_probability(self):
        return sum(p for (a, b), p in self.endpoint_law().items() if a != b)


def endpoint_bags(td, i, j):
    """Bag path between the bag subtrees of ``i`` and ``j`` (closest ends, smallest ids)."""
    bi, bj = td.bags_containing(i), td.bags_containing(j)
    if not bi or not bj:
        raise InstanceError("pair endpoint outside the decomposition")
    dist_j = td.distances_from(bj)
    start = min(bi, key=lambda b: (dist_j[b], b))
    dist_s = td.distances_from([start])
    end = min(bj, key=lambda b: (dist_s[b], b))
    return td.path(start, end)


def build_separator_chain(td, sol, i, j):
    if i == j:
        raise ValueError("pair endpoints must differ")
    path = endpoint_bags(td, i, j)
    seps = [(i,)]
    seps += [tuple(sorted(td.bags[a] & td.bags[b])) for a, b in zip(path, path[1:])]
    seps.append((j,))
    states, masses = [], []
    for s in seps:
        dist = sol.local_distribution(s)
        sup = sorted(lab for lab, p in dist.probs.items() if p != 0)
        states.append(tuple(sup))
        masses.append(tuple(dist.probs[lab] for lab in sup))
    joint = []
    for l, bag in enumerate(path):
        a_dom, b_dom = seps[l], seps[l + 1]
        dist = sol.local_distribution(set(a_dom) | set(b_dom))
        dom = dist.domain
        rows = []
        for fa in states[l]:
            row = []
            for fb in states[l + 1]:
                lab = {}
                ok = True
                for v, x in itertools.chain(zip(a_dom, fa), zip(b_dom, fb)):
                    if lab.setdefault(v, x) != x:
                        ok = False
                        break
                row.append(dist.probs[tuple(lab[v] for v in dom)] if ok else 0 * masses[0][0])
            rows.append(tuple(row))
        joint.append(tuple(rows))
    return SeparatorChain((i, j), tuple(path), tuple(seps), tuple(states), tuple(masses), tuple(joint))


def common_bag(td, i, j):
    return next((b for b, bag in enumerate(td.bags) if i in bag and j in bag), None)


def exact_distribution(inst, td, sol, targets=None):
    """Exact separation probability of each target pair under the rounding law.

    Pairs sharing a bag are read off the solution directly; the others go
    through their separator chain. ``targets`` defaults to all demand pairs.
    """
    if targets is None:
        targets = [(u, v) for u, v, _ in inst.demands]
    out = {}
    for i, j in targets:
        if common_bag(td, i, j) is not None:
            out[(i, j)] = sol.lp_distance(i, j)
        else:
            out[(i, j)] = build_separator_chain(td, sol, i, j).separation_probability()
    return out


def order_invariance_check(td, sol, bag_pair, plans):
    """Largest difference between the laws of ``f`` on two bags under two plans."""
    a, b = bag_pair
    verts = td.bags[a] | td.bags[b]
    laws = [RoundingProcess(td, sol, p).query(verts) for p in plans]
    keys = set(laws[0]) | set(laws[1])
    return max(abs(laws[0].get(k, 0) - laws[1].get(k, 0)) for k in keys)


def derandomize(inst, td, sol, c=None, plan=None):
    """Conditional-expectation derandomization of the rounding.

    At each bag the new vertices get the support labelling minimizing the
    conditional expectation of ``cap(cut) - (alpha / c) dem(cut)``; ties go
    to the larger expected cut demand, then to the lexicographically smallest
    labelling. Raises :class:`CertificationError` if the final cut is sparser
    than promised, i.e. violates ``sparsity <= alpha / c``.
    """
    if c is None:
        c = default_c(td.width)
    c = Fraction(c) if sol.mode == "rational" else float(c)
    if not 0 < c <= 1:
        raise ValueError("c must lie in (0, 1]")
    alpha = sol.objective
    process = RoundingProcess(td, sol, plan)
    pairs = [(u, v, w, 0) for u, v, w in inst.edges] + [(u, v, w, 1) for u, v, w in inst.demands]
    labels = {}

    def score(evidence):
        cap = dem = 0
        for u, v, w, is_dem in pairs:
            if u in evidence and v in evidence:
                p = int(evidence[u] != evidence[v])
            else:
                p = process.separation(u, v, evidence)
            if is_dem:
                dem += w * p
            else:
                cap += w * p
        return cap - alpha / c * dem, -dem

    for b in process.plan.order:
        minus = process.plan.minus[b]
        if not minus:
            continue
        best = None
        for m, _ in process.conditional(b, labels):
            trial = dict(labels)
            trial.update(zip(minus, m))
            key = score(trial) + (m,)
            if best is None or key < best[0]:
                best = (key, m)
        labels.update(zip(minus, best[1]))
    out = _outcome(inst, labels, None)
    if not out.cut.feasible or out.cut.sparsity > alpha / c:
        raise CertificationError(
            f"derandomized cut has sparsity {out.cut.sparsity}, above alpha/c = {alpha / c}", out)
    return out


def pair_report(inst, td, sol):
    """Per demand: (pair, LP distance, exact separation probability, ratio)."""
    probs = exact_distribution(inst, td, sol)
    rows = []
    for (i, j), p in probs.items():
        d = sol.lp_distance(i, j)
        rows.append(((i, j), d, p, None if d == 0 else p / d))
    return rows


def evaluate_labels(inst, labels):
    return evaluate_cut(inst, {v for v in range(inst.n) if labels[v] == 0})
