"""Command-line driver: ``python -m twsc <command> ...``.

Exit codes: 0 success, 1 internal integrity failure, 2 usage or validation
error. Every command is deterministic given its flags.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from fractions import Fraction

from . import instances as inst_mod
from . import lowerbound, markov, rounding, salp
from ._rational import fmt
from .instances import (Instance, InstanceError, TreeDecomposition, brute_force_sparsest_cut,
                        dump_json, load_json, oracle_guard)
from .salp import SaSolution, SaVariableRegistry, SolutionIntegrityError
from .simplex import SolverError


class UsageError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    mode: str = "rational"
    seed: int = 0
    r: int | None = None
    guard: int = 16
    c: Fraction | None = None
    as_json: bool = False

    def __post_init__(self):
        if self.mode not in ("rational", "float"):
            raise UsageError(f"mode must be rational or float, got {self.mode!r}")
        if self.r is not None and self.r < 1:
            raise UsageError("r must be positive")
        if self.guard < 2:
            raise UsageError("guard must be at least 2")
        if self.c is not None and not 0 < self.c <= 1:
            raise UsageError("c must lie in (0, 1]")


def _fraction(text):
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from exc


def _config(args):
    return RunConfig(
        mode=getattr(args, "mode", "rational"),
        seed=getattr(args, "seed", 0) or 0,
        r=getattr(args, "r", None),
        guard=oracle_guard(),
        c=getattr(args, "c", None),
        as_json=getattr(args, "json", False),
    )


def _load_instance(path):
    return Instance.from_json(load_json(path))


def _load_td(path):
    return TreeDecomposition.from_json(load_json(path))


def _load_solution(path, inst, td):
    return SaSolution.from_json(load_json(path), SaVariableRegistry.for_instance(inst, td))


def _emit(cfg, rows, data, out=None):
    """Aligned two-column text, or the JSON object ``data`` with ``--json``."""
    out = out or sys.stdout
    if cfg.as_json:
        print(json.dumps(data, indent=2, sort_keys=True), file=out)
        return
    width = max((len(k) for k, _ in rows), default=0)
    for k, v in rows:
        print(f"{k:<{width}}  {v}", file=out)


def _table(header, body, out=None):
    out = out or sys.stdout
    cols = [header] + [[str(x) for x in row] for row in body]
    widths = [max(len(r[i]) for r in cols) for i in range(len(header))]
    for row in cols:
        print("  ".join(x.rjust(w) for x, w in zip(row, widths)), file=out)


def _fmt(x):
    return "-" if x is None else fmt(x)


def _check_td(inst, td):
    check = inst_mod.validate_decomposition(inst, td)
    if not check.valid:
        raise InstanceError("invalid decomposition: " + "; ".join(v.message for v in check.violations[:3]))


# ----------------------------------------------------------------------------
# commands


def cmd_gen(args):
    cfg = _config(args)
    if args.kind == "ktree":
        if args.n is None or cfg.r is None:
            raise UsageError("gen ktree needs --n and --r")
        inst, td = inst_mod.gen_partial_ktree(args.n, cfg.r, args.keep, cfg.seed, args.demands)
    elif args.kind == "path":
        if args.n is None:
            raise UsageError("gen path needs --n")
        inst, td = inst_mod.gen_path(args.n, cfg.seed, args.demands)
    else:
        if args.input is None:
            raise UsageError("gen maxcut needs --input")
        g = load_json(args.input)
        inst, td = inst_mod.maxcut_reduction(int(g["n"]), [tuple(e) for e in g["edges"]])
    dump_json(inst.to_json(), args.instance_out)
    dump_json(td.to_json(), args.td_out)
    _emit(cfg, [("vertices", inst.n), ("edges", len(inst.edges)), ("demands", len(inst.demands)),
                ("width", td.width)],
          {"n": inst.n, "edges": len(inst.edges), "demands": len(inst.demands), "width": td.width})
    return 0


def cmd_decompose(args):
    cfg = _config(args)
    inst = _load_instance(args.instance)
    if args.check:
        td = _load_td(args.check)
        res = inst_mod.validate_decomposition(inst, td)
        _emit(cfg, [("valid", res.valid), ("width", res.width)] +
              [(v.kind, v.message) for v in res.violations],
              {"valid": res.valid, "width": res.width,
               "violations": [v._asdict() | {"witness": str(v.witness)} for v in res.violations]})
        return 0 if res.valid else 2
    if cfg.r is None:
        raise UsageError("decompose needs --r or --check")
    td = inst_mod.find_decomposition_small(inst, cfg.r)
    if td is None:
        raise InstanceError(f"no decomposition of width <= {cfg.r}")
    dump_json(td.to_json(), args.td_out)
    _emit(cfg, [("width", td.width), ("bags", len(td.bags))], {"width": td.width, "bags": len(td.bags)})
    return 0


def cmd_solve(args):
    cfg = _config(args)
    inst, td = _load_instance(args.instance), _load_td(args.decomposition)
    _check_td(inst, td)
    sol = salp.solve_relaxation(inst, td, mode=cfg.mode, backend=args.backend)
    salp.check_integrity(inst, sol)
    dump_json(sol.to_json(), args.solution_out)
    _emit(cfg, [("objective", _fmt(sol.objective)), ("variables", len(sol.values)), ("mode", sol.mode)],
          {"objective": _fmt(sol.objective), "variables": len(sol.values), "mode": sol.mode})
    return 0


def cmd_round(args):
    cfg = _config(args)
    inst, td = _load_instance(args.instance), _load_td(args.decomposition)
    sol = _load_solution(args.solution, inst, td)
    if args.derandomize:
        out = rounding.derandomize(inst, td, sol, c=cfg.c)
    else:
        out = rounding.sc_round(inst, td, sol, seed=cfg.seed)
    dump_json(out.to_json(), args.cut_out)
    _emit(cfg, [("sparsity", _fmt(out.cut.sparsity)), ("cut_capacity", _fmt(out.cut.cut_capacity)),
                ("cut_demand", _fmt(out.cut.cut_demand))], out.to_json())
    return 0


def cmd_oracle(args):
    cfg = _config(args)
    inst = _load_instance(args.instance)
    rep = brute_force_sparsest_cut(inst, guard=cfg.guard)
    labels = list(rep.labels(inst.n))
    if args.cut_out:
        dump_json({"labels": labels, "sparsity": _fmt(rep.sparsity)}, args.cut_out)
    _emit(cfg, [("optimum", _fmt(rep.sparsity)), ("side0", sorted(rep.side0))],
          {"optimum": _fmt(rep.sparsity), "labels": labels})
    return 0


def cmd_report(args):
    cfg = _config(args)
    inst, td = _load_instance(args.instance), _load_td(args.decomposition)
    sol = _load_solution(args.solution, inst, td)
    labels = load_json(args.cut)["labels"]
    cut = rounding.evaluate_labels(inst, labels)
    alpha = sol.objective
    opt = brute_force_sparsest_cut(inst, guard=cfg.guard).sparsity if inst.n <= cfg.guard else None
    rows = rounding.pair_report(inst, td, sol)

    def ratio(a, b):
        return None if a is None or not b else a / b

    summary = [("alpha", _fmt(alpha)), ("sparsity", _fmt(cut.sparsity)), ("optimum", _fmt(opt)),
               ("sparsity/alpha", _fmt(ratio(cut.sparsity, alpha))),
               ("sparsity/optimum", _fmt(ratio(cut.sparsity, opt)))]
    if rows:
        summary.append(("min demand ratio", _fmt(min((r[3] for r in rows if r[3] is not None), default=None))))
    data = dict((k, v) for k, v in summary)
    data["demands"] = [{"pair": list(p), "lp": _fmt(d), "probability": _fmt(q), "ratio": _fmt(x)}
                       for p, d, q, x in rows]
    if cfg.as_json:
        _emit(cfg, [], data)
        return 0
    _emit(cfg, summary, data)
    print()
    _table(["pair", "lp_distance", "probability", "ratio"],
           [(f"{p[0]}-{p[1]}", _fmt(d), _fmt(q), _fmt(x)) for p, d, q, x in rows])
    return 0


def cmd_markov(args):
    cfg = _config(args)
    inst, td = _load_instance(args.instance), _load_td(args.decomposition)
    sol = _load_solution(args.solution, inst, td)
    i, j = args.pair
    chain = markov.build_chain(sol, td, i, j)
    prof = markov.potentials(chain)
    value, _, _ = markov.max_flow(chain)
    lpf = markov.lp_flow(sol, chain, i, j)
    cc = markov.cut_and_cluster(chain, prof)
    if args.chain_out:
        dump_json(chain.to_json(), args.chain_out)
    data = {"layers": chain.N, "width": chain.k, "phi": [_fmt(x) for x in prof.phi],
            "max_flow": _fmt(value), "lp_flow": _fmt(lpf.value),
            "p_s0_t1": _fmt(markov.p_s0_t1(chain)), "cut_route": cc.route,
            "cut_capacity": _fmt(cc.capacity), "relative_cost": _fmt(cc.relative_cost)}
    if cfg.as_json:
        _emit(cfg, [], data)
        return 0
    _emit(cfg, [(k, v) for k, v in data.items() if k != "phi"], data)
    print()
    _table(["layer", "width", "phi"], [(l, len(chain.masses[l]), _fmt(p)) for l, p in enumerate(prof.phi)])
    return 0


def cmd_lowerbound(args):
    cfg = _config(args)
    if cfg.r is not None:
        if any(x is not None for x in (args.k, args.N, args.eps)):
            raise UsageError("give either --r or --k/--N/--eps")
        params = lowerbound.HkParams.default(2 ** cfg.r)
        r = cfg.r
    else:
        if None in (args.k, args.N, args.eps):
            raise UsageError("lowerbound needs --r or all of --k, --N, --eps")
        params = lowerbound.HkParams(args.k, args.N, args.eps)
        r = (params.k - 1).bit_length()
    chain = lowerbound.gen_Hk(params)
    flow = lowerbound.flow_F(params, chain)
    claims = lowerbound.verify_claims(params, chain)
    data = {"k": params.k, "N": params.N, "eps": _fmt(params.eps), "flow": _fmt(flow.value),
            "A_t1": _fmt(claims["A_t1"]), "A_t1_claimed": _fmt(claims["A_t1_claimed"]),
            "interior_A_match": claims["interior_A_match"],
            "flow/(1/2+A_t1)": _fmt(flow.value / (Fraction(1, 2) + claims["A_t1"]))}
    if args.chain_out:
        dump_json(chain.to_json(), args.chain_out)
    if args.to_instance:
        if not (args.instance_out and args.td_out and args.solution_out):
            raise UsageError("--to-instance needs --instance-out, --td-out and --solution-out")
        gap = lowerbound.flows_to_gaps(chain, flow, r)
        dump_json(gap.instance.to_json(), args.instance_out)
        dump_json(gap.decomposition.to_json(), args.td_out)
        dump_json(gap.solution.to_json(), args.solution_out)
        y = gap.solution.lp_distance(*gap.pair)
        sep = rounding.exact_distribution(gap.instance, gap.decomposition, gap.solution, [gap.pair])[gap.pair]
        data.update({"r": r, "y_sep": _fmt(y), "separation": _fmt(sep), "separation/y_sep": _fmt(sep / y)})
    _emit(cfg, list(data.items()), data)
    return 0


# ----------------------------------------------------------------------------
# parser


def build_parser():
    p = argparse.ArgumentParser(prog="twsc", description="Sparsest cut on bounded-treewidth graphs.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--json", action="store_true", help="print the report as JSON")
        return sp

    def inputs(sp, solution=True):
        sp.add_argument("--instance", required=True)
        sp.add_argument("--decomposition", required=True)
        if solution:
            sp.add_argument("--solution", required=True)

    g = common(sub.add_parser("gen", help="generate an instance and its decomposition"))
    g.add_argument("kind", choices=["ktree", "maxcut", "path"])
    g.add_argument("--n", type=int)
    g.add_argument("--r", type=int)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--keep", type=float, default=1.0, help="edge keep probability for ktree")
    g.add_argument("--demands", type=int, default=None)
    g.add_argument("--input", help="graph JSON {n, edges} for maxcut")
    g.add_argument("--instance-out", default="instance.json")
    g.add_argument("--td-out", default="decomposition.json")
    g.set_defaults(func=cmd_gen)

    d = common(sub.add_parser("decompose", help="find or check a tree decomposition"))
    d.add_argument("--instance", required=True)
    d.add_argument("--r", type=int)
    d.add_argument("--check", help="decomposition file to validate")
    d.add_argument("--td-out", default="decomposition.json")
    d.set_defaults(func=cmd_decompose)

    s = common(sub.add_parser("solve", help="solve the relaxation"))
    inputs(s, solution=False)
    s.add_argument("--mode", choices=["rational", "float"], default="rational")
    s.add_argument("--backend", choices=["auto", "tableau", "highs"], default="auto")
    s.add_argument("--solution-out", default="solution.json")
    s.set_defaults(func=cmd_solve)

    r = common(sub.add_parser("round", help="round a solution to a cut"))
    inputs(r)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--derandomize", action="store_true")
    r.add_argument("--c", type=_fraction, default=None)
    r.add_argument("--cut-out", default="cut.json")
    r.set_defaults(func=cmd_round)

    o = common(sub.add_parser("oracle", help="brute-force sparsest cut"))
    o.add_argument("--instance", required=True)
    o.add_argument("--cut-out", default=None)
    o.set_defaults(func=cmd_oracle)

    m = common(sub.add_parser("markov", help="analyse the chain of one demand pair"))
    inputs(m)
    m.add_argument("--pair", type=int, nargs=2, required=True)
    m.add_argument("--chain-out", default=None)
    m.set_defaults(func=cmd_markov)

    lb = common(sub.add_parser("lowerbound", help="build the lower-bound chain and instance"))
    lb.add_argument("--r", type=int)
    lb.add_argument("--k", type=int)
    lb.add_argument("--N", type=int)
    lb.add_argument("--eps", type=_fraction)
    lb.add_argument("--to-instance", action="store_true")
    lb.add_argument("--chain-out", default=None)
    lb.add_argument("--instance-out", default=None)
    lb.add_argument("--td-out", default=None)
    lb.add_argument("--solution-out", default=None)
    lb.set_defaults(func=cmd_lowerbound)

    rep = common(sub.add_parser("report", help="compare a cut with the relaxation and the optimum"))
    inputs(rep)
    rep.add_argument("--cut", required=True)
    rep.set_defaults(func=cmd_report)
    return p


INTEGRITY_ERRORS = (SolutionIntegrityError, markov.AnalysisError, rounding.CertificationError, SolverError)
USAGE_ERRORS = (UsageError, InstanceError, ValueError, TypeError, KeyError, OSError)


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        return args.func(args)
    except INTEGRITY_ERRORS as exc:
        print(f"integrity failure: {exc}", file=sys.stderr)
        return 1
    except USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
