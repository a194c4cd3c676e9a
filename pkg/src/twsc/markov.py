"""Symmetric Markov flow graphs and the cut-and-cluster analysis.

A flow graph has layers ``L_0 .. L_N``; ``L_0 = (s0, s1)`` and
``L_N = (t0, t1)``. Node masses are visit probabilities, edge capacities are
transition probabilities ``p(u, v)``, and the symmetry pairs state ``a`` of a
width-``w`` layer with state ``w - 1 - a``. From a solution and a demand pair
the chain is read off the separator chain of the rounding; everything here is
exact when the numbers are Fractions.
"""
from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction

from ._rational import FLOAT_TOL, fmt
from .rounding import build_separator_chain, common_bag, epsilon0
from .salp import SolutionIntegrityError

S0, S1, T0, T1 = 0, 1, 0, 1


class AnalysisError(AssertionError):
    """The cut-and-cluster procedure failed to disconnect s0 from t1 as argued."""


def _zero(x):
    return 0 * x


@dataclass(frozen=True)
class MarkovFlowGraph:
    """Layered chain. ``caps[l]`` maps ``(a, b)`` to the capacity of the edge
    from state ``a`` of layer ``l`` to state ``b`` of layer ``l + 1``."""

    masses: tuple
    caps: tuple
    labels: tuple | None = None
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def N(self):
        return len(self.masses) - 1

    @property
    def widths(self):
        return tuple(len(m) for m in self.masses)

    @property
    def k(self):
        return max(self.widths)

    def mirror(self, l, a):
        return len(self.masses[l]) - 1 - a

    def out_edges(self, l, a):
        return [(b, c) for (x, b), c in self.caps[l].items() if x == a]

    def in_edges(self, l, b):
        return [(a, c) for (a, y), c in self.caps[l - 1].items() if y == b]

    def violations(self):
        out = []
        exact = not any(isinstance(m, float) for layer in self.masses for m in layer)
        tol = 0 if exact else FLOAT_TOL

        def bad(x, y):
            return abs(x - y) > tol

        if len(self.masses[0]) != 2 or len(self.masses[-1]) != 2:
            out.append("first and last layers must have exactly two states")
        if bad(self.masses[0][S0], Fraction(1, 2)) or bad(self.masses[0][S1], Fraction(1, 2)):
            out.append("source masses must both be 1/2")
        for l in range(self.N + 1):
            w = len(self.masses[l])
            for a in range(w):
                if bad(self.masses[l][a], self.masses[l][w - 1 - a]):
                    out.append(f"mass asymmetry at layer {l} state {a}")
                if l < self.N:
                    s = sum((c for (x, _), c in self.caps[l].items() if x == a), _zero(self.masses[l][a]))
                    if bad(s, self.masses[l][a]):
                        out.append(f"outflow {s} != mass {self.masses[l][a]} at layer {l} state {a}")
                if l > 0:
                    s = sum((c for (_, y), c in self.caps[l - 1].items() if y == a), _zero(self.masses[l][a]))
                    if bad(s, self.masses[l][a]):
                        out.append(f"inflow {s} != mass {self.masses[l][a]} at layer {l} state {a}")
        for l, caps in enumerate(self.caps):
            for (a, b), c in caps.items():
                if c < -tol:
                    out.append(f"negative capacity at transition {l} ({a},{b})")
                mirror = caps.get((self.mirror(l, a), self.mirror(l + 1, b)), 0)
                if bad(c, mirror):
                    out.append(f"capacity asymmetry at transition {l} ({a},{b})")
        return out

    def check(self):
        bad = self.violations()
        if bad:
            raise SolutionIntegrityError("; ".join(bad[:5]))
        return self

    def to_json(self):
        prof = potentials(self)
        return {
            "layers": [
                [{"state": a if self.labels is None else list(self.labels[l][a]),
                  "mass": fmt(m), "A": fmt(prof.A[l][a])} for a, m in enumerate(layer)]
                for l, layer in enumerate(self.masses)],
            "edges": [[[a, b, fmt(c)] for (a, b), c in sorted(caps.items())] for caps in self.caps],
            "phi": [fmt(v) for v in prof.phi],
        }

    @classmethod
    def from_json(cls, data):
        from ._rational import parse_number

        masses = tuple(tuple(parse_number(s["mass"]) for s in layer) for layer in data["layers"])
        caps = tuple({(int(a), int(b)): parse_number(c) for a, b, c in layer} for layer in data["edges"])
        return cls(masses, caps)


def _finish(masses, caps):
    caps = tuple({k: v for k, v in c.items() if v != 0} for c in caps)
    return MarkovFlowGraph(tuple(tuple(m) for m in masses), caps)


def build_chain(sol, td, i, j):
    """Flow graph of the separator chain for the demand pair ``(i, j)``."""
    if common_bag(td, i, j) is not None:
        raise ValueError(f"{i} and {j} share a bag; use the LP distance directly")
    sc = build_separator_chain(td, sol, i, j)
    caps = []
    for l, rows in enumerate(sc.joint):
        caps.append({(a, b): c for a, row in enumerate(rows) for b, c in enumerate(row) if c != 0})
    chain = MarkovFlowGraph(
        sc.masses, tuple(caps), sc.states,
        {"pair": (i, j), "separators": sc.separators, "bag_path": sc.bag_path})
    return chain.check()


@dataclass(frozen=True)
class LayeredFlow:
    flows: tuple  # per transition, dict (a, b) -> amount
    value: object


def flow_violations(chain, flow, source=S0, sink=T1):
    out = []
    for l, fl in enumerate(flow.flows):
        for (a, b), x in fl.items():
            cap = chain.caps[l].get((a, b), 0)
            if x < 0 or x > cap:
                out.append(f"flow {x} outside [0, {cap}] on transition {l} ({a},{b})")
    for l in range(chain.N + 1):
        for a in range(len(chain.masses[l])):
            inflow = sum((x for (_, b), x in flow.flows[l - 1].items() if b == a), 0) if l else 0
            outflow = sum((x for (b, _), x in flow.flows[l].items() if b == a), 0) if l < chain.N else 0
            if l == 0:
                if a != source and outflow != 0:
                    out.append(f"flow leaves non-source state {a}")
            elif l == chain.N:
                if a != sink and inflow != 0:
                    out.append(f"flow enters non-sink state {a}")
            elif inflow != outflow:
                out.append(f"conservation fails at layer {l} state {a}: {inflow} vs {outflow}")
    value = sum((x for (a, _), x in flow.flows[0].items() if a == source), 0) if flow.flows else 0
    if value != flow.value:
        out.append(f"stored value {flow.value} differs from source outflow {value}")
    return out


def lp_flow(sol, chain, i=None, j=None):
    """The flow ``y~[f* u f1 u f2]`` with ``f*`` putting ``i`` on 0 and ``j`` on 1."""
    if i is None:
        i, j = chain.meta["pair"]
    seps = chain.meta["separators"]
    flows = []
    for l, caps in enumerate(chain.caps):
        dom = sorted(set(seps[l]) | set(seps[l + 1]) | {i, j})
        dist = sol.local_distribution(dom)
        fl = {}
        for (a, b) in caps:
            lab = {i: 0, j: 1}
            ok = True
            for v, x in list(zip(seps[l], chain.labels[l][a])) + list(zip(seps[l + 1], chain.labels[l + 1][b])):
                if lab.setdefault(v, x) != x:
                    ok = False
                    break
            if ok:
                p = dist.probs[tuple(lab[v] for v in dom)]
                if p != 0:
                    fl[(a, b)] = p
        flows.append(fl)
    value = sum((x for (a, _), x in flows[0].items() if a == S0), _zero(chain.masses[0][0]))
    flow = LayeredFlow(tuple(flows), value)
    bad = flow_violations(chain, flow)
    if bad:
        raise SolutionIntegrityError("; ".join(bad[:5]))
    return flow


@dataclass(frozen=True)
class PotentialProfile:
    A: tuple
    phi: tuple
    to_s0: tuple  # p(s0, v) per layer

    @property
    def drop(self):
        return self.phi[0] - self.phi[-1]


def potentials(chain):
    """``A(v) = Pr[X_0 = s0 | X_l = v] - 1/2`` by forward recursion, and ``phi``."""
    q = [list(chain.masses[0])]
    q[0][S1] = _zero(q[0][S1])
    for l in range(chain.N):
        nxt = [_zero(chain.masses[0][0])] * len(chain.masses[l + 1])
        for (a, b), c in chain.caps[l].items():
            if q[l][a]:
                nxt[b] += q[l][a] * c / chain.masses[l][a]
        q.append(nxt)
    half = Fraction(1, 2) if not isinstance(chain.masses[0][0], float) else 0.5
    A = tuple(tuple(q[l][a] / m - half for a, m in enumerate(chain.masses[l])) for l in range(chain.N + 1))
    phi = []
    for l in range(chain.N + 1):
        mean = sum(m * x for m, x in zip(chain.masses[l], A[l]))
        phi.append(sum(m * x * x for m, x in zip(chain.masses[l], A[l])) - mean * mean)
    return PotentialProfile(A, tuple(phi), tuple(tuple(x) for x in q))


def joint(chain, l1, l2):
    """``p(u, v) = Pr[X_l1 = u and X_l2 = v]`` as a dense matrix."""
    w1 = len(chain.masses[l1])
    z = _zero(chain.masses[0][0])
    cur = [[chain.masses[l1][a] if a == b else z for b in range(w1)] for a in range(w1)]
    for l in range(l1, l2):
        nxt = [[z] * len(chain.masses[l + 1]) for _ in range(w1)]
        for (a, b), c in chain.caps[l].items():
            t = c / chain.masses[l][a]
            for u in range(w1):
                if cur[u][a]:
                    nxt[u][b] += cur[u][a] * t
        cur = nxt
    return cur


def p_s0_t1(chain):
    return potentials(chain).to_s0[-1][T1]


def p_s0_t1_by_paths(chain):
    """Path-sum oracle for ``Pr[X_0 = s0, X_N = t1]`` (small chains only)."""
    total = _zero(chain.masses[0][0])
    stack = [(0, S0, chain.masses[0][S0])]
    while stack:
        l, a, w = stack.pop()
        if l == chain.N:
            if a == T1:
                total += w
            continue
        for (x, b), c in chain.caps[l].items():
            if x == a:
                stack.append((l + 1, b, w * c / chain.masses[l][a]))
    return total


def a_stochastic_residual(chain, prof=None):
    """Largest violation of ``A(v) sum_u p(u,v) = sum_u p(u,v) A(u)`` over all layer pairs."""
    prof = prof or potentials(chain)
    worst = _zero(chain.masses[0][0])
    for l1 in range(chain.N + 1):
        for l2 in range(l1 + 1, chain.N + 1):
            P = joint(chain, l1, l2)
            for v in range(len(chain.masses[l2])):
                lhs = prof.A[l2][v] * sum(P[u][v] for u in range(len(P)))
                rhs = sum(P[u][v] * prof.A[l1][u] for u in range(len(P)))
                worst = max(worst, abs(lhs - rhs))
    return worst


def potential_drop_identity(chain, l1, l2, prof=None):
    """Both sides of ``phi(l1) - phi(l2) = sum p(u,v) (A(u) - A(v))^2``."""
    if not 0 <= l1 < l2 <= chain.N:
        raise ValueError("need 0 <= l1 < l2 <= N")
    prof = prof or potentials(chain)
    P = joint(chain, l1, l2)
    lhs = prof.phi[l1] - prof.phi[l2]
    rhs = sum((P[u][v] * (prof.A[l1][u] - prof.A[l2][v]) ** 2
               for u in range(len(P)) for v in range(len(P[u]))), _zero(lhs))
    return lhs, rhs, lhs - rhs


# ----------------------------------------------------------------------------
# maximum flow


def _residual_reach(chain, cut, start=(0, S0)):
    """Nodes reachable from ``start`` over positive-capacity edges not in ``cut``."""
    seen = {start}
    queue = deque([start])
    while queue:
        l, a = queue.popleft()
        if l == chain.N:
            continue
        for (x, b), c in chain.caps[l].items():
            if x == a and c > 0 and (l, a, b) not in cut and (l + 1, b) not in seen:
                seen.add((l + 1, b))
                queue.append((l + 1, b))
    return seen


def _co_reach(chain, cut, target=None):
    target = target or (chain.N, T1)
    seen = {target}
    queue = deque([target])
    while queue:
        l, b = queue.popleft()
        if l == 0:
            continue
        for (a, y), c in chain.caps[l - 1].items():
            if y == b and c > 0 and (l - 1, a, b) not in cut and (l - 1, a) not in seen:
                seen.add((l - 1, a))
                queue.append((l - 1, a))
    return seen


def max_flow(chain, cut=frozenset()):
    """Exact maximum s0 -> t1 flow (Edmonds-Karp) and a minimum cut.

    Edges listed in ``cut`` as ``(l, a, b)`` are treated as removed. Returns
    ``(value, flows, cut_edges)`` where ``cut_edges`` is a set of ``(l, a, b)``
    whose capacity equals the value.
    """
    z = _zero(chain.masses[0][0])
    flow = [dict.fromkeys(c, z) for c in chain.caps]
    src, snk = (0, S0), (chain.N, T1)

    def residual(l, a, b):
        if (l, a, b) in cut:
            return z
        return chain.caps[l][(a, b)] - flow[l][(a, b)]

    out_adj = {}
    for l, caps in enumerate(chain.caps):
        for (a, b) in caps:
            out_adj.setdefault((l, a), []).append(b)
    in_adj = {}
    for l, caps in enumerate(chain.caps):
        for (a, b) in caps:
            in_adj.setdefault((l + 1, b), []).append(a)
    value = z
    while True:
        prev = {src: None}
        queue = deque([src])
        while queue and snk not in prev:
            node = queue.popleft()
            l, a = node
            for b in out_adj.get(node, ()):
                nxt = (l + 1, b)
                if nxt not in prev and residual(l, a, b) > 0:
                    prev[nxt] = (node, +1)
                    queue.append(nxt)
            for a2 in in_adj.get(node, ()):
                nxt = (l - 1, a2)
                if nxt not in prev and flow[l - 1][(a2, a)] > 0:
                    prev[nxt] = (node, -1)
                    queue.append(nxt)
        if snk not in prev:
            break
        path = []
        node = snk
        while prev[node] is not None:
            parent, d = prev[node]
            path.append((parent, node, d))
            node = parent
        amount = None
        for (pl, pa), (nl, na), d in path:
            r = residual(pl, pa, na) if d > 0 else flow[nl][(na, pa)]
            amount = r if amount is None else min(amount, r)
        for (pl, pa), (nl, na), d in path:
            if d > 0:
                flow[pl][(pa, na)] += amount
            else:
                flow[nl][(na, pa)] -= amount
        value += amount
    reach = set(prev)
    cut_edges = {(l, a, b) for l, caps in enumerate(chain.caps) for (a, b) in caps
                 if (l, a) in reach and (l + 1, b) not in reach and (l, a, b) not in cut}
    return value, tuple({k: v for k, v in f.items() if v} for f in flow), cut_edges


def cut_capacity(chain, edges):
    return sum((chain.caps[l][(a, b)] for l, a, b in edges), _zero(chain.masses[0][0]))


# ----------------------------------------------------------------------------
# cut-charge bound and cut-and-cluster


def node_removal_edges(chain, nodes):
    return {(l, a, b) for l, a in nodes if l < chain.N for (b, _) in chain.out_edges(l, a)}


def cut_charge_bound(chain, groups, rho, prof=None):
    """Check the cut-charge hypotheses and return ``(capacity, bound)``.

    ``groups`` lists ``(l0, l1, nodes)`` with ``nodes`` a set of states of
    layer ``l0``; intervals ``[l0, l1]`` must not overlap and every node must be
    at A-distance ``>= rho`` from every state of layer ``l1``. The bound is
    ``(phi(0) - phi(N)) / rho^2``.
    """
    prof = prof or potentials(chain)
    spans = sorted((l0, l1) for l0, l1, _ in groups)
    for (a0, a1), (b0, b1) in zip(spans, spans[1:]):
        if b0 < a1:
            raise ValueError(f"intervals [{a0},{a1}] and [{b0},{b1}] overlap")
    for l0, l1, nodes in groups:
        if not 0 <= l0 < l1 <= chain.N:
            raise ValueError(f"bad interval [{l0},{l1}]")
        for w in nodes:
            for x in range(len(chain.masses[l1])):
                if abs(prof.A[l0][w] - prof.A[l1][x]) < rho:
                    raise ValueError(f"node {w} of layer {l0} is closer than rho to layer {l1}")
    cap = sum((chain.masses[l0][w] for l0, _, nodes in groups for w in nodes), _zero(prof.drop))
    return cap, prof.drop / (rho * rho)


@dataclass(frozen=True)
class ClusterCut:
    edges: frozenset  # (l, a, b)
    capacity: object
    relative_cost: object | None
    route: str
    log: tuple
    formula_bound: object | None = None


def epsilon_schedule(k):
    e0 = epsilon0(k)
    return [e0 * (12 * k * k) ** j for j in range(k + 1)]


def formula_bound(k):
    """Sum of the per-phase relative-cost bounds of the general procedure.

    ``1/eps_0^2`` for long edges, ``1/(k eps_{j-1})^2`` for phase ``j`` and 36
    for the final single-path cut.
    """
    eps = epsilon_schedule(k)
    return 1 / eps[0] ** 2 + sum(1 / (k * eps[j - 1]) ** 2 for j in range(1, k + 1)) + 36


def configured_C(k):
    if k <= 4:
        return Fraction(100)
    return 2 / epsilon0(k) ** 2


def _viable(chain, cut):
    fwd = _residual_reach(chain, cut)
    bwd = _co_reach(chain, cut)
    return fwd & bwd


def _result(chain, prof, edges, route, log, bound=None):
    edges = frozenset(edges)
    if (chain.N, T1) in _residual_reach(chain, edges):
        raise AnalysisError(f"{route}: the produced cut leaves a path from s0 to t1")
    cap = cut_capacity(chain, edges)
    rel = cap / prof.drop if prof.drop else None
    return ClusterCut(edges, cap, rel, route, tuple(log), bound)


def cut_and_cluster(chain, prof=None):
    """Cut separating s0 from t1, built as in the potential-drop argument.

    Width-4 chains (and narrower) use the dedicated routine with long-edge
    threshold ``2A*/7``; wider chains run the phased cut-and-cluster procedure.
    Raises :class:`AnalysisError` if the result fails to disconnect.
    """
    prof = prof or potentials(chain)
    if (chain.N, T1) not in _residual_reach(chain, frozenset()):
        return ClusterCut(frozenset(), _zero(prof.drop), _zero(prof.drop), "disconnected", ())
    s0_out = node_removal_edges(chain, [(0, S0)])
    a_t1 = prof.A[-1][T1]
    if a_t1 >= 0:
        return _result(chain, prof, s0_out, "source", ["A(t1) >= 0: cut s0"])
    if chain.k <= 4:
        return _cut_width4(chain, prof)
    return _cut_general(chain, prof)


def _cut_width4(chain, prof):
    log = []
    s0_out = node_removal_edges(chain, [(0, S0)])
    if prof.phi[-1] < Fraction(49, 200):
        log.append(f"phi(N) = {float(prof.phi[-1]):.6g} < 49/200: cut s0")
        return _result(chain, prof, s0_out, "source", log, Fraction(100))
    a_star = prof.A[-1][T0]
    rho = 2 * a_star / 7
    A = prof.A
    long_edges = {(l, a, b) for l, caps in enumerate(chain.caps) for (a, b) in caps
                  if abs(A[l][a] - A[l + 1][b]) >= rho}
    log.append(f"A* = {float(a_star):.6g}; {len(long_edges)} edges of length >= 2A*/7")
    cut = set(long_edges)
    groups = []
    lo, hi = 3 * a_star / 7, 5 * a_star / 7
    last_l1 = 0
    while True:
        viable = _viable(chain, frozenset(cut))
        if (chain.N, T1) not in viable:
            break
        targets_by_layer = {}
        for (l, a) in viable:
            if 0 < l < chain.N and abs(A[l][a]) <= a_star / 7:
                targets_by_layer.setdefault(l, set()).add(a)
        if not targets_by_layer:
            raise AnalysisError("flow reaches t1 without passing the middle interval")
        l1 = min(targets_by_layer)
        targets = {(l1, a) for a in targets_by_layer[l1]}
        reach = _residual_reach(chain, frozenset(cut))
        chosen = None
        for l0 in range(l1 - 1, last_l1 - 1, -1):
            W = {a for a in range(len(A[l0])) if (l0, a) in reach and lo <= A[l0][a] <= hi}
            if not W:
                continue
            trial = frozenset(cut | node_removal_edges(chain, [(l0, a) for a in W]))
            if not (_residual_reach(chain, trial) & targets):
                chosen = (l0, W, trial)
                break
        if chosen is None:
            raise AnalysisError(f"no layer before {l1} separates s0 from the middle interval")
        l0, W, trial = chosen
        groups.append((l0, l1, W))
        log.append(f"remove {sorted(W)} at layer {l0} to cut flow into layer {l1}")
        cut = set(trial)
        last_l1 = l1
    # certificates of the two charges
    long_cap = cut_capacity(chain, long_edges)
    if long_cap > prof.drop / (rho * rho):
        raise AnalysisError("long-edge capacity exceeds its potential charge")
    if groups:
        cut_charge_bound(chain, groups, rho, prof)
    return _result(chain, prof, cut, "width4", log, Fraction(100))


def _clusters(values, eps):
    """Single-linkage clusters of ``(A, state)`` pairs at threshold ``eps``."""
    items = sorted(values)
    out = []
    for v in items:
        if out and v[0] - out[-1][-1][0] <= eps:
            out[-1].append(v)
        else:
            out.append([v])
    return out


def _cut_general(chain, prof):
    A = prof.A
    k = chain.k
    log = []
    bound = formula_bound(k)
    s0_out = node_removal_edges(chain, [(0, S0)])
    if A[-1][T1] >= Fraction(-1, 3):
        log.append("A(t1) >= -1/3: cut s0")
        return _result(chain, prof, s0_out, "source", log, bound)
    eps = epsilon_schedule(k)
    cut = {(l, a, b) for l, caps in enumerate(chain.caps) for (a, b) in caps
           if abs(A[l][a] - A[l + 1][b]) >= eps[0]}
    log.append(f"eps0 = {float(eps[0]):.3g}; cut {len(cut)} edges of length >= eps0")
    for j in range(1, k + 1):
        viable = _viable(chain, frozenset(cut))
        if (chain.N, T1) not in viable:
            return _result(chain, prof, cut, "general", log, bound)
        layers = _viable_clusters(chain, A, viable, eps[j - 1])
        capacity = max(len(cl) for cl in layers)
        log.append(f"phase {j}: clustered capacity {capacity}")
        if capacity == 1:
            for l in range(1, chain.N):
                if layers[l] and 0 <= layers[l][0][-1][0] <= Fraction(1, 6):
                    nodes = [(l, a) for _, a in layers[l][0]]
                    cut |= node_removal_edges(chain, nodes)
                    log.append(f"single path: remove cluster at layer {l}")
                    return _result(chain, prof, cut, "general", log, bound)
            raise AnalysisError("single cluster path never enters [0, 1/6]")
        start = 0
        while True:
            viable = _viable(chain, frozenset(cut))
            if (chain.N, T1) not in viable:
                break
            layers = _viable_clusters(chain, A, viable, eps[j - 1])
            step = _phase_step(chain, A, layers, capacity, eps[j], eps[j - 1], k, start)
            if step is None:
                break
            l, cluster, l2 = step
            cut |= node_removal_edges(chain, [(l, a) for _, a in cluster])
            log.append(f"phase {j}: remove cluster {[a for _, a in cluster]} at layer {l} (charged to {l2})")
            start = l2
    if (chain.N, T1) in _viable(chain, frozenset(cut)):
        raise AnalysisError("phases exhausted with flow still reaching t1")
    return _result(chain, prof, cut, "general", log, bound)


def _viable_clusters(chain, A, viable, eps):
    layers = []
    for l in range(chain.N + 1):
        vals = [(A[l][a], a) for a in range(len(A[l])) if (l, a) in viable]
        layers.append(_clusters(vals, eps))
    return layers


def _gap(x, y):
    return y[0][0] - x[-1][0]


def _phase_step(chain, A, layers, capacity, eps_j, eps_prev, k, start):
    """One cut of a phase; None when no layer has ``capacity`` far-apart clusters."""
    l1 = next((l for l in range(max(start, 1), chain.N) if len(layers[l]) == capacity
               and all(_gap(x, y) > eps_j for x, y in zip(layers[l], layers[l][1:]))), None)
    if l1 is None:
        return None
    third = eps_j / 3
    l2 = next((l for l in range(l1 + 1, chain.N + 1)
               if len(layers[l]) != capacity
               or any(_gap(x, y) <= third for x, y in zip(layers[l], layers[l][1:]))), None)
    if l2 is None or len(layers[l2]) != capacity:
        raise AnalysisError(f"cluster paths from layer {l1} do not meet before changing count")
    ip = next(i for i, (x, y) in enumerate(zip(layers[l2], layers[l2][1:])) if _gap(x, y) <= third)
    step = k * eps_prev
    vals = sorted({A[l2][a] for a in range(len(A[l2]))})

    def top(l, i):
        return layers[l][i][-1][0]

    def bottom(l, i):
        return layers[l][i][0][0]

    if top(l2, ip) - top(l1, ip) >= third:
        lo, hi = top(l1, ip), top(l2, ip)
        a0 = _free_gap(vals, lo, hi, 4 * step, low_end=True)
        for l in range(l1 + 1, l2):
            if a0 + 2 * step < top(l, ip) < a0 + 3 * step:
                return l, layers[l][ip], l2
    else:
        lo, hi = bottom(l2, ip + 1), bottom(l1, ip + 1)
        a1 = _free_gap(vals, lo, hi, 4 * step, low_end=False)
        for l in range(l1 + 1, l2):
            if a1 - 3 * step < bottom(l, ip + 1) < a1 - 2 * step:
                return l, layers[l][ip + 1], l2
    raise AnalysisError(f"no layer between {l1} and {l2} lands in the cutting window")


def _free_gap(vals, lo, hi, width, low_end):
    """An end of the first open gap of length >= ``width`` inside ``(lo, hi)``."""
    pts = [lo] + [v for v in vals if lo < v < hi] + [hi]
    for x, y in zip(pts, pts[1:]):
        if y - x >= width:
            return x if low_end else y
    raise AnalysisError("no empty subinterval of the required length")


# ----------------------------------------------------------------------------
# random symmetric chains


def random_chain(rng, N, max_width=4, denominator=12, float_mode=False, stickiness=0):
    """Random symmetric flow graph with even layer widths up to ``max_width``.

    Each transition's capacities are built as a symmetric joint table: for the
    first half of the states a random split of their mass, mirrored on the
    other half, so conservation and symmetry hold exactly. ``stickiness``
    adds weight to the target at the same relative height, which keeps
    potentials spread out and exercises the non-trivial cut routes.
    """
    if isinstance(rng, int):
        rng = random.Random(rng)
    widths = [2] + [2 * rng.randint(1, max_width // 2) for _ in range(N - 1)] + [2]
    masses = [[Fraction(1, 2), Fraction(1, 2)]]
    caps = []
    for l in range(N):
        w1, w2 = widths[l], widths[l + 1]
        m = masses[l]
        # random joint: mass of each state in the lower half split over targets
        table = {}
        for a in range(w1 // 2):
            weights = [rng.randint(0, denominator) for _ in range(w2)]
            weights[round(a * (w2 - 1) / max(w1 - 1, 1))] += stickiness
            if not any(weights):
                weights[rng.randrange(w2)] = 1
            total = sum(weights)
            for b, wgt in enumerate(weights):
                if wgt:
                    c = m[a] * Fraction(wgt, total)
                    table[(a, b)] = table.get((a, b), 0) + c
                    mirror = (w1 - 1 - a, w2 - 1 - b)
                    table[mirror] = table.get(mirror, 0) + c
        nxt = [Fraction(0)] * w2
        for (a, b), c in table.items():
            nxt[b] += c
        # drop empty states so every node has positive mass
        keep = [b for b in range(w2) if nxt[b] > 0]
        remap = {b: i for i, b in enumerate(keep)}
        table = {(a, remap[b]): c for (a, b), c in table.items()}
        masses.append([nxt[b] for b in keep])
        caps.append(table)
        widths[l + 1] = len(keep)
    chain = _finish(masses, caps)
    if float_mode:
        chain = MarkovFlowGraph(tuple(tuple(float(x) for x in m) for m in chain.masses),
                                tuple({k: float(v) for k, v in c.items()} for c in chain.caps))
    return chain.check()
