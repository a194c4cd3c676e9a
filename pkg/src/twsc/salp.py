"""The bag-local Sherali-Adams relaxation of Sparsest-Cut and its local distributions.

Variables ``y_I`` are indexed by subsets ``I`` of ground sets ``B u {i, j}``
(one per bag ``B`` and demand pair ``(i, j)``). Read as a scaled probability,
``y_I`` is the mass of assignments putting every vertex of ``I`` on side 1, and
``y_{I,J}`` (inclusion-exclusion over ``I``) the mass of assignments with ``I``
on side 0 and ``J`` on side 1. ``y~ = y / y_empty`` is the normalized version.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

from ._rational import FLOAT_TOL, fmt, parse_number
from .instances import InstanceError, evaluate_cut
from .simplex import EQ, GE, LinearProgram, SolverError, solve


class CoverageError(KeyError):
    """A vertex set that no ground set contains; the reduced LP has no value for it."""

    def __str__(self):
        return str(self.args[0]) if self.args else "not covered"


class SolutionIntegrityError(ValueError):
    """A relaxation solution violating nonnegativity, symmetry or normalization."""


def subset_key(subset):
    """Canonical text form of a vertex set: sorted ids joined by commas."""
    return ",".join(str(v) for v in sorted(subset))


def parse_subset_key(text):
    return frozenset(int(t) for t in text.split(",")) if text else frozenset()


def ground_sets(inst, td):
    """Distinct sets ``B u {i, j}`` over all bags and positive demands."""
    found = {bag | {i, j} for bag in td.bags for i, j, _ in inst.demands}
    return tuple(sorted(found, key=lambda s: (len(s), sorted(s))))


def _canonical(subsets):
    return tuple(sorted(subsets, key=lambda s: (len(s), sorted(s))))


@dataclass(frozen=True)
class SaVariableRegistry:
    """Column map over every subset of every ground set; the empty set is column 0."""

    ground: tuple
    subsets: tuple
    index: dict = field(repr=False, compare=False)

    @classmethod
    def build(cls, ground):
        subs = set()
        for g in ground:
            members = sorted(g)
            for k in range(len(members) + 1):
                subs.update(frozenset(c) for c in itertools.combinations(members, k))
        ordered = _canonical(subs)
        return cls(tuple(ground), ordered, {s: c for c, s in enumerate(ordered)})

    @classmethod
    def for_instance(cls, inst, td):
        return cls.build(ground_sets(inst, td))

    def __len__(self):
        return len(self.subsets)

    def column(self, subset):
        try:
            return self.index[frozenset(subset)]
        except KeyError:
            raise CoverageError(f"vertex set {sorted(subset)} lies in no ground set") from None

    def covers(self, subset):
        return frozenset(subset) in self.index

    @property
    def maximal_ground(self):
        return tuple(g for g in self.ground if not any(g < h for h in self.ground))


def _ie_terms(I, J):
    """``(sign, set)`` terms of ``y_{I,J}``: sum over I' in I of (-1)^|I'| y_{I' u J}."""
    I = sorted(I)
    J = frozenset(J)
    for k in range(len(I) + 1):
        sign = -1 if k % 2 else 1
        for sub in itertools.combinations(I, k):
            yield sign, J.union(sub)


def _ie_row(reg, I, J):
    row = {}
    for sign, s in _ie_terms(I, J):
        c = reg.column(s)
        row[c] = row.get(c, 0) + sign
    return {c: a for c, a in row.items() if a}


def _separation_row(reg, i, j, weight, row):
    # y_{i != j} = y_{{i},{j}} + y_{{j},{i}} = y_i + y_j - 2 y_ij
    for s, a in ((frozenset({i}), 1), (frozenset({j}), 1), (frozenset({i, j}), -2)):
        c = reg.column(s)
        row[c] = row.get(c, 0) + a * weight


def build_relaxation(inst, td, complete=False):
    """The relaxation as a :class:`LinearProgram` plus its variable registry.

    By default the nonnegativity and symmetry rows are emitted only for full
    assignments of each maximal ground set; every other ``y_{I,J}`` row is a
    sum of those, so the feasible region is the same. ``complete=True`` emits
    every row for every ground set (deduplicated) for cross-checking.
    """
    if not inst.demands:
        raise InstanceError("the relaxation needs at least one demand")
    for u, v, _ in inst.edges:
        if not any(u in b and v in b for b in td.bags):
            raise InstanceError(f"edge ({u},{v}) is covered by no bag")
    reg = SaVariableRegistry.for_instance(inst, td)
    lp = LinearProgram([subset_key(s) for s in reg.subsets], [0] * len(reg))
    seen = set()

    def emit(coeffs, rel, rhs):
        key = (tuple(sorted(coeffs.items())), rel, rhs)
        if coeffs and key not in seen:
            seen.add(key)
            lp.add_row(coeffs, rel, rhs)

    for g in (reg.ground if complete else reg.maximal_ground):
        members = sorted(g)
        domains = [g] if not complete else [
            frozenset(c) for k in range(len(members) + 1) for c in itertools.combinations(members, k)]
        for dom in domains:
            dm = sorted(dom)
            pairs = []
            if complete:
                for lab in itertools.product((0, 1, 2), repeat=len(dm)):
                    pairs.append((frozenset(v for v, t in zip(dm, lab) if t == 0),
                                  frozenset(v for v, t in zip(dm, lab) if t == 1)))
            else:
                for k in range(len(dm) + 1):
                    for ones in itertools.combinations(dm, k):
                        pairs.append((dom - frozenset(ones), frozenset(ones)))
            for I, J in pairs:
                emit(_ie_row(reg, I, J), GE, 0)
                diff = _ie_row(reg, I, J)
                for c, a in _ie_row(reg, J, I).items():
                    diff[c] = diff.get(c, 0) - a
                diff = {c: a for c, a in diff.items() if a}
                # orient each symmetry pair one way so (I,J) and (J,I) collapse
                if diff and sorted(diff.items()) > sorted((c, -a) for c, a in diff.items()):
                    diff = {c: -a for c, a in diff.items()}
                emit(diff, EQ, 0)
    norm = {}
    for i, j, w in inst.demands:
        _separation_row(reg, i, j, w, norm)
    lp.add_row({c: a for c, a in norm.items() if a}, EQ, 1)
    obj = {}
    for u, v, w in inst.edges:
        _separation_row(reg, u, v, w, obj)
    lp.objective = {c: a for c, a in obj.items() if a}
    return lp, reg


@dataclass(frozen=True)
class LocalDistribution:
    """Distribution over 0/1 assignments of ``domain`` (a sorted vertex tuple).

    ``probs`` maps label tuples aligned with ``domain`` to probabilities.
    """

    domain: tuple
    probs: dict

    def prob(self, assignment):
        return self.probs.get(tuple(assignment[v] for v in self.domain), 0 * sum(self.probs.values()))

    def marginal(self, sub):
        sub = tuple(sorted(sub))
        pos = [self.domain.index(v) for v in sub]
        out = {}
        for lab, p in self.probs.items():
            key = tuple(lab[k] for k in pos)
            out[key] = out.get(key, 0) + p
        return LocalDistribution(sub, out)

    def support(self):
        return [lab for lab, p in sorted(self.probs.items()) if p != 0]

    def total(self):
        return sum(self.probs.values())


@dataclass(frozen=True)
class SaSolution:
    registry: SaVariableRegistry
    values: tuple
    objective: object
    mode: str = "rational"
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if not self.values[0] > 0:
            raise SolutionIntegrityError("y_empty must be positive")

    @property
    def y_empty(self):
        return self.values[0]

    def y(self, subset):
        return self.values[self.registry.column(subset)]

    def y_tilde(self, subset):
        return self.y(subset) / self.y_empty

    def y_ie(self, I, J):
        I, J = frozenset(I), frozenset(J)
        if I & J:
            raise ValueError("I and J must be disjoint")
        if not self.registry.covers(I | J):
            raise CoverageError(f"vertex set {sorted(I | J)} lies in no ground set")
        return sum((s * self.y(T) for s, T in _ie_terms(I, J)), 0 * self.y_empty)

    def y_tilde_ie(self, I, J):
        return self.y_ie(I, J) / self.y_empty

    def local_distribution(self, L):
        L = frozenset(L)
        hit = self._cache.get(L)
        if hit is not None:
            return hit
        if not self.registry.covers(L):
            raise CoverageError(f"vertex set {sorted(L)} lies in no ground set")
        dom = tuple(sorted(L))
        t = len(dom)
        g = [self.y_tilde(frozenset(v for k, v in enumerate(dom) if mask >> k & 1))
             for mask in range(1 << t)]
        # superset Moebius transform: Pr[ones == mask]
        for k in range(t):
            bit = 1 << k
            for mask in range(1 << t):
                if not mask & bit:
                    g[mask] = g[mask] - g[mask | bit]
        probs = {}
        for mask in range(1 << t):
            probs[tuple(mask >> k & 1 for k in range(t))] = g[mask]
        probs = self._clean(probs, dom)
        dist = LocalDistribution(dom, probs)
        self._cache[L] = dist
        return dist

    def _clean(self, probs, dom):
        if self.mode == "rational":
            bad = [lab for lab, p in probs.items() if p < 0]
            if bad:
                raise SolutionIntegrityError(f"negative mass {probs[bad[0]]} on {dom}={bad[0]}")
            return probs
        out = {}
        for lab, p in probs.items():
            if p < -FLOAT_TOL:
                raise SolutionIntegrityError(f"negative mass {p} on {dom}={lab}")
            out[lab] = max(p, 0.0)
        total = sum(out.values())
        return {lab: p / total for lab, p in out.items()}

    def conditional_distribution(self, L, f0):
        """Distribution of the labels on ``L`` given the partial assignment ``f0``."""
        f0 = dict(f0)
        L = frozenset(L)
        dist = self.local_distribution(L | frozenset(f0))
        cond = tuple(sorted(f0))
        pos = [dist.domain.index(v) for v in cond]
        want = tuple(f0[v] for v in cond)
        keep = {lab: p for lab, p in dist.probs.items() if tuple(lab[k] for k in pos) == want}
        mass = sum(keep.values())
        if mass == 0 or (self.mode == "float" and mass <= FLOAT_TOL):
            raise SolutionIntegrityError(f"conditioning on {f0} which has zero mass")
        out = LocalDistribution(dist.domain, {lab: p / mass for lab, p in keep.items()})
        return out.marginal(L)

    def lp_distance(self, i, j):
        if i == j:
            raise ValueError("lp_distance needs two distinct vertices")
        return self.y_tilde_ie({i}, {j}) + self.y_tilde_ie({j}, {i})

    def as_warm_start(self):
        return {subset_key(s): v for s, v in zip(self.registry.subsets, self.values)}

    def to_json(self):
        data = {subset_key(s): fmt(v) for s, v in zip(self.registry.subsets, self.values)}
        data["objective"] = fmt(self.objective)
        data["mode"] = self.mode
        return data

    @classmethod
    def from_json(cls, data, registry):
        mode = data.get("mode", "rational")
        values = [None] * len(registry)
        for key, text in data.items():
            if key in ("objective", "mode"):
                continue
            subset = parse_subset_key(key)
            if not registry.covers(subset):
                raise SolutionIntegrityError(f"solution has unknown variable {key!r}")
            values[registry.column(subset)] = parse_number(text, mode)
        if any(v is None for v in values):
            missing = registry.subsets[values.index(None)]
            raise SolutionIntegrityError(f"solution lacks variable {subset_key(missing)!r}")
        return cls(registry, tuple(values), parse_number(data["objective"], mode), mode)


def y_inclusion_exclusion(sol, I, J):
    return sol.y_ie(I, J)


def local_distribution(sol, L):
    return sol.local_distribution(L)


def conditional_distribution(sol, L, f0):
    return sol.conditional_distribution(L, f0)


def lp_distance(sol, i, j):
    return sol.lp_distance(i, j)


def objective_of(inst, sol):
    return sum((w * (sol.y({u}) + sol.y({v}) - 2 * sol.y({u, v})) for u, v, w in inst.edges),
               0 * sol.y_empty)


def symmetrize(sol):
    """Average a solution with its complement image: ``y_I <- (y_I + y_{I,empty}) / 2``.

    Objective and normalization are unchanged because both only see
    separation masses, which complementing preserves.
    """
    vals = tuple((sol.y(s) + sol.y_ie(s, ())) / 2 for s in sol.registry.subsets)
    return SaSolution(sol.registry, vals, sol.objective, sol.mode)


def feasibility_witness(inst, td, side0=None, registry=None):
    """Integral solution from one cut: the half/half mix of the cut and its complement.

    ``y_I = c ([I in side1] + [I in side0]) / 2`` with ``c`` the inverse cut
    demand, which makes the normalization row hold.
    """
    if side0 is None:
        u = inst.demands[0][0]
        side0 = {u}
    report = evaluate_cut(inst, side0)
    if not report.feasible:
        raise InstanceError("the witness cut separates no demand")
    reg = registry or SaVariableRegistry.for_instance(inst, td)
    c = 1 / report.cut_demand
    s0 = report.side0
    vals = []
    for s in reg.subsets:
        ones = (s.isdisjoint(s0)) + (s <= s0)
        vals.append(c * Fraction(ones, 2))
    return SaSolution(reg, tuple(vals), report.sparsity)


def integrity_violations(inst, sol, limit=10):
    """Nonnegativity, symmetry and normalization failures (empty list when sound)."""
    out = []
    tol = 0 if sol.mode == "rational" else FLOAT_TOL
    for g in sol.registry.maximal_ground:
        dom = tuple(sorted(g))
        for ones_mask in range(1 << len(dom)):
            J = frozenset(v for k, v in enumerate(dom) if ones_mask >> k & 1)
            I = g - J
            a = sol.y_tilde_ie(I, J)
            if a < -tol:
                out.append(f"y~[{subset_key(I)} | {subset_key(J)}] = {a} < 0")
            b = sol.y_tilde_ie(J, I)
            if abs(a - b) > tol:
                out.append(f"asymmetric at [{subset_key(I)} | {subset_key(J)}]: {a} vs {b}")
            if len(out) >= limit:
                return out
    norm = sum((w * sol.lp_distance(i, j) for i, j, w in inst.demands), 0 * sol.y_empty) * sol.y_empty
    if abs(norm - 1) > tol:
        out.append(f"normalization sum is {norm}, not 1")
    obj = objective_of(inst, sol)
    if abs(obj - sol.objective) > tol * max(1, abs(obj)):
        out.append(f"stored objective {sol.objective} differs from recomputed {obj}")
    return out


def check_integrity(inst, sol):
    bad = integrity_violations(inst, sol)
    if bad:
        raise SolutionIntegrityError("; ".join(bad))


def solve_relaxation(inst, td, mode="rational", backend="auto", complete=False, warm=True):
    """Build and solve the relaxation; returns the optimal :class:`SaSolution`."""
    lp, reg = build_relaxation(inst, td, complete=complete)
    hint = feasibility_witness(inst, td, registry=reg).as_warm_start() if warm else None
    out = solve(lp, mode=mode, warm_start=hint, backend=backend)
    if out.status != "optimal":
        raise SolverError(f"relaxation solve ended with status {out.status}")
    values = out.values
    if mode == "float":
        values = tuple(0.0 if -FLOAT_TOL <= v < 0 else v for v in values)
    sol = SaSolution(reg, tuple(values), out.objective, mode)
    return sol
