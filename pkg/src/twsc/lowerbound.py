"""The layered graph ``H_k(N, eps)`` where the rounding loses a factor about ``k``.

Also converts a symmetric flow graph plus an ``s0 -> t1`` flow into a
pathwidth-``(2r - 1)`` instance with a feasible relaxation solution whose
rounding regenerates the flow graph, so that flows become integrality gaps of
the rounding.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations

from ._rational import as_fraction
from .instances import Instance, InstanceError, TreeDecomposition
from .markov import (S0, S1, T0, T1, LayeredFlow, MarkovFlowGraph, flow_violations,
                     p_s0_t1, potentials)
from .salp import SaSolution, SaVariableRegistry, SolutionIntegrityError, objective_of


@dataclass(frozen=True)
class HkParams:
    k: int
    N: int
    eps: Fraction

    def __post_init__(self):
        eps = as_fraction(self.eps)
        object.__setattr__(self, "eps", eps)
        if not isinstance(self.k, int) or self.k < 4 or self.k % 2:
            raise InstanceError(f"k must be an even integer >= 4, got {self.k}")
        if not isinstance(self.N, int) or self.N < 2:
            raise InstanceError(f"N must be an integer >= 2, got {self.N}")
        if not 0 < eps < Fraction(1, 2 * (self.N + self.k)):
            raise InstanceError(f"eps must lie in (0, 1/(2(N+k))), got {eps}")

    @classmethod
    def default(cls, k):
        """``N = 10 k^2`` and ``eps = 1/(4(N + k))``."""
        N = 10 * k * k
        return cls(k, N, Fraction(1, 4 * (N + k)))


def _mirror(k, i):
    return k - 1 - i


def _add_sym(caps, k, wa, wb, a, b, c):
    """Set edge ``(a, b)`` and its mirror image to capacity ``c``."""
    caps[(a, b)] = c
    caps[(wa - 1 - a, wb - 1 - b)] = c


def gen_Hk(params):
    """Build ``H_k(N, eps)`` as a flow graph with layers ``L_0 .. L_N``.

    Interior layers hold ``v_0 .. v_{k-1}`` with ``v_i`` mirrored to
    ``v_{k-1-i}``; ``v_0`` carries the heavy rail towards ``t0`` and the
    sink edges from the lower half of the last interior layer go to ``t1``.
    """
    k, N, eps = params.k, params.N, params.eps
    half = Fraction(1, 2)
    caps = []
    first = {}
    _add_sym(first, k, 2, k, S0, 0, half - (k - 2) * eps)
    for i in range(1, k - 1):
        _add_sym(first, k, 2, k, S0, i, 2 * eps * (k - 1 - i) / (k - 1))
    caps.append(first)
    for j in range(1, N - 1):
        layer = {}
        for i in range(1, k - 1):
            _add_sym(layer, k, k, k, i - 1, i, eps)
            _add_sym(layer, k, k, k, i + 1, i, eps)
        _add_sym(layer, k, k, k, 0, 0, half - (j + k - 2) * eps)
        _add_sym(layer, k, k, k, 1, 1, j * eps)
        caps.append(layer)
    node_cap = [2 * eps] * k
    node_cap[0] = node_cap[k - 1] = half - (N + k - 4) * eps
    node_cap[1] = node_cap[k - 2] = N * eps
    last = {}
    for i in range(k // 2):
        _add_sym(last, k, k, 2, i, T0, node_cap[i])
    caps.append(last)

    masses = [(half, half)]
    for l, layer in enumerate(caps):
        w = 2 if l == N - 1 else k
        m = [Fraction(0)] * w
        for (_, b), c in layer.items():
            m[b] += c
        masses.append(tuple(m))
    chain = MarkovFlowGraph(tuple(masses), tuple(caps), meta={"params": params})
    return chain.check()


def claimed_A(params, j, i):
    """Stated closed form for ``A(v^j_i)``."""
    return Fraction(1, 2) - Fraction(i, params.k - 1)


def claimed_A_t1(params):
    """Stated closed form ``-1/2 + (N + (k/2-2)(k/2+2)) eps / (k-1)``."""
    k, N, eps = params.k, params.N, params.eps
    return Fraction(-1, 2) + (N + (k // 2 - 2) * (k // 2 + 2)) * eps / (k - 1)


def derived_A_t1(params):
    """Closed form of ``A(t1)`` obtained by summing the edge capacities into ``t1``.

    With interior potentials ``1/2 - i/(k-1)``, ``A(t1) = 2 p(s0, t1)`` minus
    ``1/2`` and ``p(s0, t1) = sum_i c(v_i, t1) (k-1-i)/(k-1)``, which gives
    ``-1/2 + 2 (N + k^2/4 - k/2 - 2) eps / (k-1)``.
    """
    k, N, eps = params.k, params.N, params.eps
    return Fraction(-1, 2) + 2 * (N + Fraction(k * k, 4) - Fraction(k, 2) - 2) * eps / (k - 1)


def staircase_path(params, j):
    """States of ``p_j``: rail up to layer ``j``, climb to ``v_{k-2}``, then its rail to ``t1``."""
    k, N = params.k, params.N
    states = [S0]
    for l in range(1, N):
        states.append(min(max(l - j, 0), k - 2))
    states.append(T1)
    return states


def flow_F(params, chain=None):
    """The flow ``eps * (p_1 + ... + p_{N-k})`` on ``H_k``; raises if infeasible."""
    k, N, eps = params.k, params.N, params.eps
    if N <= k:
        raise InstanceError(f"flow F needs N > k, got N={N}, k={k}")
    chain = chain or gen_Hk(params)
    flows = [dict() for _ in range(N)]
    for j in range(1, N - k + 1):
        path = staircase_path(params, j)
        for l, (a, b) in enumerate(zip(path, path[1:])):
            if (a, b) not in chain.caps[l]:
                raise SolutionIntegrityError(f"path p_{j} uses missing edge ({a},{b}) at transition {l}")
            flows[l][(a, b)] = flows[l].get((a, b), 0) + eps
    flow = LayeredFlow(tuple(flows), (N - k) * eps)
    bad = flow_violations(chain, flow)
    if bad:
        raise SolutionIntegrityError("; ".join(bad[:5]))
    return flow


# ----------------------------------------------------------------------------
# flows to integrality gaps


@dataclass(frozen=True)
class GapInstance:
    instance: Instance
    decomposition: TreeDecomposition
    solution: SaSolution
    pair: tuple
    groups: tuple  # vertex tuple per layer


def _encode(width, r, a):
    """Bit labels of state ``a`` in a width-``width`` layer, complement-preserving."""
    if width == 2 ** r:
        v = a
    elif a < width // 2:
        v = a
    else:
        v = 2 ** r - 1 - (width - 1 - a)
    return tuple((v >> (r - 1 - t)) & 1 for t in range(r))


def _mirror_flow(chain, flow):
    return tuple({(chain.mirror(l, a), chain.mirror(l + 1, b)): x for (a, b), x in fl.items()}
                 for l, fl in enumerate(flow))


def _add(x, y):
    out = dict(x)
    for key, v in y.items():
        out[key] = out.get(key, 0) + v
    return out


class _PathMeasure:
    """Flow-proportional path law of a conserving layered flow.

    A flow ``f`` with total value ``m`` induces the Markov measure that starts
    at layer-0 states in proportion to their outflow and steps along edges in
    proportion to flow; its consecutive-layer marginals equal ``f``.
    """

    def __init__(self, widths, flows):
        self.flows = flows
        self.N = len(flows)
        self.mass = []
        for l in range(self.N + 1):
            m = [Fraction(0)] * widths[l]
            if l < self.N:
                for (a, _), x in flows[l].items():
                    m[a] += x
            else:
                for (_, b), x in flows[-1].items():
                    m[b] += x
            self.mass.append(m)
        # fwd[l][a][v] = Pr[X_0 = a, X_l = v]
        w0 = widths[0]
        self.fwd = [[[self.mass[0][a] if a == v else Fraction(0) for v in range(w0)] for a in range(w0)]]
        for l in range(self.N):
            nxt = [[Fraction(0)] * widths[l + 1] for _ in range(w0)]
            for (u, v), x in flows[l].items():
                t = x / self.mass[l][u]
                for a in range(w0):
                    if self.fwd[l][a][u]:
                        nxt[a][v] += self.fwd[l][a][u] * t
            self.fwd.append(nxt)
        # bwd[l][v][d] = Pr[X_N = d | X_l = v]
        wN = widths[-1]
        self.bwd = [None] * (self.N + 1)
        self.bwd[self.N] = [[Fraction(int(v == d)) for d in range(wN)] for v in range(wN)]
        for l in range(self.N - 1, -1, -1):
            cur = [[Fraction(0)] * wN for _ in range(widths[l])]
            for (u, v), x in flows[l].items():
                t = x / self.mass[l][u]
                for d in range(wN):
                    cur[u][d] += t * self.bwd[l + 1][v][d]
            self.bwd[l] = cur

    def window(self, l):
        """``Pr[X_0 = a, X_l = u, X_{l+1} = v, X_N = d]`` as a dict."""
        out = {}
        for (u, v), x in self.flows[l].items():
            t = x / self.mass[l][u]
            for a, row in enumerate(self.fwd[l]):
                if not row[u]:
                    continue
                for d, q in enumerate(self.bwd[l + 1][v]):
                    if q:
                        key = (a, u, v, d)
                        out[key] = out.get(key, 0) + row[u] * t * q
        return out


def flows_to_gaps(chain, flow, r):
    """Instance, path decomposition and relaxation solution realising ``flow``.

    Layer ``l`` of the chain becomes a group of ``r`` fresh vertices (one vertex
    ``s`` for layer 0, one vertex ``t`` for layer ``N``); bags are unions of two
    consecutive groups, each bag is a unit-capacity clique and the only demand
    is ``(s, t)``. The solution is the law of a path measure whose
    consecutive-layer marginals equal the capacities, so the rounding replays
    the chain, while its ``s``-``t`` separation probability is at least
    ``|flow|``.
    """
    chain.check()
    bad = flow_violations(chain, flow)
    if bad:
        raise SolutionIntegrityError("; ".join(bad[:5]))
    N = chain.N
    if max(chain.widths) > 2 ** r:
        raise InstanceError(f"layers of width {max(chain.widths)} do not fit in {r} bits")
    if any(w % 2 for w in chain.widths):
        raise InstanceError("layer widths must be even")

    # path law: 1/2 F + 1/2 mirror(F) + residual, residual = cap - (F + mirror F)/2
    fbar = _mirror_flow(chain, flow.flows)
    residual = []
    for l in range(N):
        sym = _add(flow.flows[l], fbar[l])
        res = {}
        for e, c in chain.caps[l].items():
            x = c - Fraction(sym.get(e, 0)) / 2
            if x < 0:
                raise SolutionIntegrityError(f"flow exceeds capacity at transition {l} {e}")
            if x:
                res[e] = x
        residual.append(res)
    widths = chain.widths
    parts = [(Fraction(1, 2), _PathMeasure(widths, flow.flows)),
             (Fraction(1, 2), _PathMeasure(widths, fbar)),
             (Fraction(1), _PathMeasure(widths, tuple(residual)))]
    parts = [(w, m) for w, m in parts if any(m.flows[0].values())]

    # vertices: s = 0, groups for layers 1..N-1, t = last
    groups = [(0,)]
    nxt = 1
    for l in range(1, N):
        groups.append(tuple(range(nxt, nxt + r)))
        nxt += r
    groups.append((nxt,))
    n = nxt + 1
    s, t = 0, nxt
    bags = [frozenset(groups[l]) | frozenset(groups[l + 1]) for l in range(N)]
    edges = {tuple(sorted(e)) for bag in bags for e in combinations(sorted(bag), 2)}
    inst = Instance.build(n, [(u, v, 1) for u, v in sorted(edges)], [(s, t, 1)])
    td = TreeDecomposition(tuple(bags), tuple((l, l + 1) for l in range(N - 1)))

    def labels(l, a):
        if l in (0, N):
            return (a,)
        return _encode(widths[l], r, a)

    # full-assignment law on each ground set bag_l + {s, t}
    reg = SaVariableRegistry.for_instance(inst, td)
    values = {}
    sep_prob = Fraction(0)
    for l in range(N):
        gset = bags[l] | {s, t}
        ground = tuple(sorted(gset))
        pos = {v: i for i, v in enumerate(ground)}
        law = {}
        for w, meas in parts:
            for (a, u, v, d), p in meas.window(l).items():
                lab = [None] * len(ground)
                for vert, bit in list(zip(groups[0], labels(0, a))) + list(zip(groups[l], labels(l, u))) \
                        + list(zip(groups[l + 1], labels(l + 1, v))) + list(zip(groups[N], labels(N, d))):
                    if lab[pos[vert]] not in (None, bit):
                        raise SolutionIntegrityError("inconsistent labels in a window")
                    lab[pos[vert]] = bit
                key = tuple(lab)
                law[key] = law.get(key, 0) + w * p
        if l == 0:
            sep_prob = sum((p for lab, p in law.items() if lab[pos[s]] != lab[pos[t]]), Fraction(0))
        for I in reg.subsets:
            if I <= gset and I not in values:
                values[I] = sum((p for lab, p in law.items() if all(lab[pos[v]] for v in I)),
                                Fraction(0))
    if not sep_prob:
        raise SolutionIntegrityError("path law never separates s and t; normalization impossible")
    scale = 1 / sep_prob
    vals = tuple(values[I] * scale for I in reg.subsets)
    sol = SaSolution(reg, vals, Fraction(0))
    sol = SaSolution(reg, vals, objective_of(inst, sol))
    return GapInstance(inst, td, sol, (s, t), tuple(groups))


@dataclass(frozen=True)
class LossRow:
    r: int
    k: int
    N: int
    eps: Fraction
    flow_value: Fraction
    y_sep: Fraction
    separation: Fraction
    ratio: Fraction
    claim_ratio: Fraction


def rounding_loss_report(r, params=None):
    """``y~_{s!=t}`` against the rounding's separation probability on ``H_{2^r}``."""
    from .rounding import exact_distribution

    if r < 2:
        raise InstanceError("r must be at least 2")
    params = params or HkParams.default(2 ** r)
    chain = gen_Hk(params)
    flow = flow_F(params, chain)
    gap = flows_to_gaps(chain, flow, r)
    y_sep = gap.solution.lp_distance(*gap.pair)
    sep = exact_distribution(gap.instance, gap.decomposition, gap.solution, [gap.pair])[gap.pair]
    return LossRow(r, params.k, params.N, params.eps, flow.value, y_sep, sep, sep / y_sep,
                   Fraction(1, 2) + claimed_A_t1(params))


def verify_claims(params, chain=None):
    """Exact potentials of ``H_k`` next to the stated closed forms."""
    chain = chain or gen_Hk(params)
    prof = potentials(chain)
    interior = all(prof.A[j][i] == claimed_A(params, j, i)
                   for j in range(1, params.N) for i in range(params.k))
    a_t1 = prof.A[-1][T1]
    return {
        "interior_A_match": interior,
        "A_t1": a_t1,
        "A_t1_claimed": claimed_A_t1(params),
        "A_t1_derived": derived_A_t1(params),
        "p_s0_t1": p_s0_t1(chain),
    }
