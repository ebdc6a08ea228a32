"""Command-line interface: benchmark sweeps, single solves, mesh dumps and
property-check suites."""

import argparse
import sys

import numpy as np

from .bench import (BenchContext, RunConfig, run_benchmark, write_records,
                    write_state, make_blend)
from .lattice import dump_lattice
from .mesh import build_graded_mesh, count_dof, effective_volumes, \
    interpolate_to_lattice
from .solver import AtomisticProblem, BqceProblem, solve_problem


def _parse_k0(values):
    return tuple(int(v) for v in values)


def cmd_bench(args):
    cfg = RunConfig(problem=args.problem, N=args.N, method=args.method,
                    K0_list=_parse_k0(args.K0), rule=args.rule,
                    alpha=args.alpha,
                    p="inf" if args.p == "inf" else float(args.p),
                    growth_cap=args.growth_cap, out=args.out)
    _, records = run_benchmark(cfg)
    if not args.out:
        write_records(sys.stdout, records)
    else:
        print(f"wrote {len(records)} records to {args.out}")
    return 0


def _solve_from_config(cfg):
    ctx = BenchContext(cfg.problem, cfg.N, newton_steps=cfg.newton_steps)
    K0 = cfg.K0_list[0]
    if cfg.method == "atm":
        inside = ctx.domain.free & (ctx.domain.hexn <= K0)
        prob = AtomisticProblem(ctx.model, ctx.domain, ctx.nbrs, ctx.F,
                                solve_ids=np.nonzero(inside)[0])
        x, rep = solve_problem(prob, newton_steps=cfg.newton_steps)
        return ctx, None, None, prob.positions(x), rep
    plan, regions, blend = make_blend(ctx, cfg.method, K0, cfg)
    mesh = build_graded_mesh(ctx.domain, regions, plan, cfg.growth_cap)
    effective_volumes(mesh, blend, ctx.domain)
    prob = BqceProblem(ctx.model, ctx.domain, ctx.nbrs, mesh, blend, ctx.F)
    x, rep = solve_problem(prob, newton_steps=cfg.newton_steps)
    y_sites = interpolate_to_lattice(mesh, prob.node_positions(x), ctx.domain)
    y_sites[ctx.domain.is_halo] = ctx.domain.pos[ctx.domain.is_halo] @ ctx.F.T
    return ctx, mesh, blend, y_sites, rep


def cmd_solve(args):
    cfg = RunConfig.from_json(args.config)
    ctx, _, _, y_sites, rep = _solve_from_config(cfg)
    with open(args.out, "w") as fh:
        write_state(fh, ctx.domain, y_sites, ctx.F)
    print(f"solved {cfg.problem} N={cfg.N} {cfg.method} K0={cfg.K0_list[0]}: "
          f"energy {rep.energy:.12g}, gradient sup {rep.grad_sup:.3g}")
    return 0


def cmd_dump_mesh(args):
    cfg = RunConfig.from_json(args.config)
    ctx = BenchContext(cfg.problem, cfg.N, newton_steps=cfg.newton_steps)
    plan, regions, blend = make_blend(ctx, cfg.method, cfg.K0_list[0], cfg)
    mesh = build_graded_mesh(ctx.domain, regions, plan, cfg.growth_cap)
    v = effective_volumes(mesh, blend, ctx.domain)
    keep = np.ones(mesh.n_nodes, bool)
    has_site = mesh.node_site >= 0
    defect_node = np.zeros(mesh.n_nodes, bool)
    defect_node[has_site] = ctx.domain.is_defect[mesh.node_site[has_site]]
    keep &= ~defect_node
    node_beta = np.ones(mesh.n_nodes)
    node_beta[has_site] = blend.beta[mesh.node_site[has_site]]
    ids = np.nonzero(keep)[0]
    with open(args.out, "w") as fh:
        dump_lattice(fh, ids, mesh.node_xy[ids], elements=mesh.elements,
                     beta=node_beta[ids], v_eff=v)
    print(f"wrote mesh dump ({ids.size} nodes, {mesh.n_elements} elements, "
          f"dof {count_dof(mesh)}) to {args.out}")
    return 0


def cmd_check(args):
    from . import checks

    ok = checks.run_suite(args.suite)
    return 0 if ok else 1


def main(argv=None):
    ap = argparse.ArgumentParser(
        prog="bqce",
        description="Blended quasicontinuum benchmarks on a 2D EAM lattice")
    sub = ap.add_subparsers(dest="cmd", required=True)

    b = sub.add_parser("bench", help="run a convergence sweep, emit CSV")
    b.add_argument("--problem", required=True,
                   choices=("microcrack", "divacancy"))
    b.add_argument("--method", required=True,
                   choices=("atm", "qce", "bqce-linear", "bqce-smooth"))
    b.add_argument("--N", type=int, default=100)
    b.add_argument("--K0", nargs="+", required=True,
                   help="K0 sweep (for atm: sub-domain radii)")
    b.add_argument("--rule", choices=("table", "mu"), default="table")
    b.add_argument("--alpha", type=float, default=3.0)
    b.add_argument("--p", default="2")
    b.add_argument("--growth-cap", dest="growth_cap", type=float, default=1.5)
    b.add_argument("--out", default="")
    b.set_defaults(fn=cmd_bench)

    s = sub.add_parser("solve", help="solve one configuration, write state")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_solve)

    d = sub.add_parser("dump-mesh", help="build and dump the mesh + beta")
    d.add_argument("--config", required=True)
    d.add_argument("--out", required=True)
    d.set_defaults(fn=cmd_dump_mesh)

    c = sub.add_parser("check", help="run a property suite (exit code 0/1)")
    c.add_argument("--suite", required=True,
                   choices=("gradients", "invariants", "ghostforce"))
    c.set_defaults(fn=cmd_check)

    args = ap.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
