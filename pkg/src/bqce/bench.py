"""Microcrack and di-vacancy convergence benchmarks.

Builds ATM / QCE / BQCE problems across K0 sweeps, solves them with the
shared PCG + Newton pipeline, measures W^{1,2} / W^{1,inf} seminorm and
energy errors against the exact atomistic reference, fits log-log
convergence slopes and reads/writes the CSV record format.
"""

import json
import logging
import math
import time
from dataclasses import dataclass, asdict, field

import numpy as np

from .blending import (beta_linear, beta_qce, beta_smooth, classify_regions,
                       select_parameters)
from .cauchy_born import find_ground_state
from .eam import EamModel
from .errors import ConstructionError
from .lattice import (SQRT3, generate_domain, micro_triangulation,
                      neighbor_shells)
from .mesh import (build_graded_mesh, count_dof, effective_volumes,
                   interpolate_to_lattice)
from .solver import AtomisticProblem, BqceProblem, solve_problem

PROBLEM_DEFECTS = {"microcrack": "microcrack11", "divacancy": "divacancy"}
METHODS = ("atm", "qce", "bqce-linear", "bqce-smooth")

CSV_HEADER = ("method,K0,K1,dof,err_w12,err_w1inf,err_energy_abs,"
              "err_energy_signed,energy,wall_time_s")
DENOM_NOTE = ("# relative-error denominator: W^{1,p} micro-interpolant "
              "seminorm of the reference defect field y_ref - F*x over the "
              "full domain; micro-elements with a defect vertex are excluded")

log = logging.getLogger(__name__)


@dataclass
class RunConfig:
    """One benchmark invocation (mirrors the CLI flags / config file)."""

    problem: str = "divacancy"
    N: int = 100
    method: str = "bqce-smooth"
    K0_list: tuple = (3, 4, 6, 8, 11, 16)
    rule: str = "table"
    alpha: float = 3.0
    p: float = 2.0
    growth_cap: float = 1.5
    newton_steps: int = 3
    max_iter: int = 0          # 0: solver default (5x unknowns)
    seed: int = 0              # used only by FD-check perturbations
    reproducible: bool = True  # reductions are always fixed-order
    out: str = ""
    model: dict = field(default_factory=dict)  # EamModel parameter overrides

    def __post_init__(self):
        if self.problem not in PROBLEM_DEFECTS:
            raise ConstructionError(f"unknown problem {self.problem!r}")
        if self.method not in METHODS:
            raise ConstructionError(f"unknown method {self.method!r}")
        if self.N < 20:
            raise ConstructionError("benchmarks need N >= 20")
        self.K0_list = tuple(int(k) for k in self.K0_list)
        if isinstance(self.p, str):
            self.p = float("inf") if self.p == "inf" else float(self.p)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            raw = json.load(fh)
        return cls(**raw)

    def to_json(self, path):
        data = asdict(self)
        data["K0_list"] = list(self.K0_list)
        if math.isinf(self.p):
            data["p"] = "inf"
        with open(path, "w") as fh:
            json.dump(data, fh, indent=2)


@dataclass
class ConvergenceRecord:
    method: str
    K0: int
    K1: int
    dof: int
    err_w12: float
    err_w1inf: float
    err_energy_abs: float
    err_energy_signed: float
    energy: float
    wall_time_s: float

    def __post_init__(self):
        # canonicalize to the CSV precision (15 significant digits) so a
        # written record reads back exactly equal
        for name in ("err_w12", "err_w1inf", "err_energy_abs",
                     "err_energy_signed", "energy", "wall_time_s"):
            setattr(self, name, float(f"{getattr(self, name):.15g}"))


def load_strain(problem, F0):
    """Benchmark loading: 3% mixed-mode for the microcrack, 3% isotropic
    stretch plus 3% shear for the di-vacancy."""
    F0 = np.asarray(F0, float)
    if problem == "microcrack":
        load = np.array([[1.0, 0.03], [0.0, 1.03]])
    elif problem == "divacancy":
        load = np.array([[1.03, 0.03], [0.0, 1.03]])
    else:
        raise ConstructionError(f"unknown problem {problem!r}")
    return load @ F0


class BenchContext:
    """Shared state for one (problem, N): domain, strain, reference solve."""

    def __init__(self, problem, N, model=None, newton_steps=3):
        self.problem = problem
        self.N = N
        if model is None:
            model = EamModel()
        elif isinstance(model, dict):
            model = EamModel(**model)
        self.model = model
        self.newton_steps = newton_steps
        self.F0 = find_ground_state(self.model)
        self.F = load_strain(problem, self.F0)
        self.domain = generate_domain(N, PROBLEM_DEFECTS[problem])
        self.nbrs = neighbor_shells(self.domain, self.model.r_cut_density,
                                    self.model.r_cut_pair)
        self.micro = micro_triangulation(self.domain)
        self._micro_grads_op = _p1_gradient_operator(self.domain.pos,
                                                     self.micro)
        self._ref = None

    def reference(self):
        """Exact atomistic minimizer (cached): all domain sites free."""
        if self._ref is None:
            prob = AtomisticProblem(self.model, self.domain, self.nbrs, self.F)
            x, rep = solve_problem(prob, newton_steps=self.newton_steps)
            y = prob.positions(x)
            self._ref = (y, rep)
            g_ref = self.micro_gradients(y)
            dg = g_ref - self.F
            self._den_w12 = math.sqrt(
                float(np.sum(SQRT3 / 4.0 * (dg ** 2).sum(axis=(1, 2)))))
            self._den_w1inf = float(
                np.sqrt((dg ** 2).sum(axis=(1, 2))).max())
        return self._ref

    def micro_gradients(self, y_sites):
        return np.einsum("evi,evj->eij", y_sites[self.micro],
                         self._micro_grads_op)

    def error_norms(self, y_test, elem_mask=None):
        """Relative W^{1,2} and W^{1,inf} micro-seminorm errors vs the
        reference; the denominator is the reference defect-field seminorm
        over the full domain."""
        y_ref, _ = self.reference()
        diff = self.micro_gradients(y_ref) - self.micro_gradients(y_test)
        nrm = (diff ** 2).sum(axis=(1, 2))
        if elem_mask is not None:
            nrm = nrm[elem_mask]
        w12 = math.sqrt(float(np.sum(SQRT3 / 4.0 * nrm)))
        w1inf = float(np.sqrt(nrm.max())) if nrm.size else 0.0
        return w12 / self._den_w12, w1inf / self._den_w1inf


def _p1_gradient_operator(pos, tris):
    """Per-element shape-function gradients of the micro triangulation."""
    p = pos[tris]
    g = np.empty((tris.shape[0], 3, 2))
    for v in range(3):
        d = p[:, (v + 1) % 3] - p[:, (v + 2) % 3]
        g[:, v, 0] = d[:, 1]
        g[:, v, 1] = -d[:, 0]
    a2 = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) \
        - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0])
    return g / a2[:, None, None]


def make_blend(ctx, method, K0, cfg):
    """Region decomposition and blending function for one sweep point."""
    if method == "qce":
        plan = select_parameters(cfg.alpha, cfg.p, K0, ctx.N, cfg.rule)
        regions = classify_regions(ctx.domain, ctx.domain.defect_ids, K0, 0)
        return plan, regions, beta_qce(ctx.domain, regions)
    plan = select_parameters(cfg.alpha, cfg.p, K0, ctx.N, cfg.rule)
    regions = classify_regions(ctx.domain, ctx.domain.defect_ids, K0, plan.K1)
    if method == "bqce-linear":
        return plan, regions, beta_linear(ctx.domain, regions)
    if method == "bqce-smooth":
        return plan, regions, beta_smooth(ctx.domain, regions)
    raise ConstructionError(f"method {method!r} has no blending function")


def run_coupled(ctx, method, K0_list, cfg, collect=None):
    """QCE/BQCE sweep: regions -> beta -> mesh -> volumes -> solve -> errors."""
    ctx.reference()
    records = []
    for K0 in K0_list:
        t0 = time.perf_counter()
        try:
            plan, regions, blend = make_blend(ctx, method, K0, cfg)
            mesh = build_graded_mesh(ctx.domain, regions, plan,
                                     cfg.growth_cap)
            effective_volumes(mesh, blend, ctx.domain)
            prob = BqceProblem(ctx.model, ctx.domain, ctx.nbrs, mesh, blend,
                               ctx.F)
            x, rep = solve_problem(
                prob, max_iter=cfg.max_iter if cfg.max_iter else None,
                newton_steps=cfg.newton_steps)
            y_sites = interpolate_to_lattice(mesh, prob.node_positions(x),
                                             ctx.domain)
            y_ref, ref_rep = ctx.reference()
            y_sites[ctx.domain.is_halo] = y_ref[ctx.domain.is_halo]
            w12, w1inf = ctx.error_norms(y_sites)
            e_ref = ref_rep.energy
            signed = rep.energy - e_ref
            records.append(ConvergenceRecord(
                method, K0, blend.K1, count_dof(mesh), w12, w1inf,
                abs(signed), signed, rep.energy, time.perf_counter() - t0))
            if collect is not None:
                collect.append((K0, mesh, blend, rep))
        except Exception:
            log.exception("aborting %s K0=%d after a stage failure",
                          method, K0)
    return records


def run_atm(ctx, radii, cfg, collect=None):
    """Reduced atomistic computation: clamp everything outside each radius."""
    ctx.reference()
    records = []
    for r in radii:
        t0 = time.perf_counter()
        free = ctx.domain.free
        inside = free & (ctx.domain.hexn <= r)
        solve_ids = np.nonzero(inside)[0]
        if solve_ids.size == 0:
            raise ConstructionError(f"ATM radius {r} leaves no free sites")
        prob = AtomisticProblem(ctx.model, ctx.domain, ctx.nbrs, ctx.F,
                                solve_ids=solve_ids)
        x, rep = solve_problem(
            prob, max_iter=cfg.max_iter if cfg.max_iter else None,
            newton_steps=cfg.newton_steps)
        y = prob.positions(x)
        mask = (ctx.domain.hexn[ctx.micro] <= r).all(axis=1)
        w12, w1inf = ctx.error_norms(y, elem_mask=mask)
        _, ref_rep = ctx.reference()
        signed = rep.energy - ref_rep.energy
        records.append(ConvergenceRecord(
            "atm", int(r), 0, int(solve_ids.size), w12, w1inf, abs(signed),
            signed, rep.energy, time.perf_counter() - t0))
        if collect is not None:
            collect.append((int(r), None, None, rep))
    return records


def run_benchmark(cfg, ctx=None, collect=None):
    """Dispatch one RunConfig; for method=atm the K0 list holds the
    sub-domain radii."""
    if ctx is None:
        ctx = BenchContext(cfg.problem, cfg.N, model=cfg.model or None,
                           newton_steps=cfg.newton_steps)
    if cfg.method == "atm":
        records = run_atm(ctx, cfg.K0_list, cfg, collect)
    else:
        records = run_coupled(ctx, cfg.method, cfg.K0_list, cfg, collect)
    if cfg.out:
        write_records(cfg.out, records)
    return ctx, records


def fit_slope(dofs, errors, window=None):
    """Least-squares log-log slope over the largest-DoF window.

    window=None uses the upper half of the sweep by DoF (at least 3
    points), excluding any pre-asymptotic head.
    """
    dofs = np.asarray(dofs, float)
    errors = np.asarray(errors, float)
    order = np.argsort(dofs)
    dofs = dofs[order]
    errors = errors[order]
    if window is None:
        window = max(3, (dofs.size + 1) // 2)
    if window > dofs.size:
        raise ConstructionError("slope window exceeds the record count")
    dofs = dofs[-window:]
    errors = errors[-window:]
    if dofs.size < 3:
        raise ConstructionError("slope fit needs at least 3 records")
    if (errors <= 0).any() or not np.isfinite(errors).all():
        raise ConstructionError("slope fit requires positive finite errors")
    a = np.stack([np.log10(dofs), np.ones_like(dofs)], axis=1)
    coef, *_ = np.linalg.lstsq(a, np.log10(errors), rcond=None)
    return float(coef[0])


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.15g}"
    return str(v)


def write_records(path_or_fh, records, note=DENOM_NOTE):
    fh = path_or_fh if hasattr(path_or_fh, "write") else open(path_or_fh, "w")
    try:
        if note:
            fh.write(note + "\n")
        fh.write(CSV_HEADER + "\n")
        for r in records:
            fh.write(",".join(_fmt(v) for v in (
                r.method, r.K0, r.K1, r.dof, r.err_w12, r.err_w1inf,
                r.err_energy_abs, r.err_energy_signed, r.energy,
                r.wall_time_s)) + "\n")
    finally:
        if fh is not path_or_fh:
            fh.close()


def read_records(path_or_fh):
    fh = path_or_fh if hasattr(path_or_fh, "read") else open(path_or_fh)
    try:
        records = []
        header = None
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if header is None:
                if line != CSV_HEADER:
                    raise ConstructionError(
                        f"unexpected CSV header {line!r}")
                header = line
                continue
            parts = line.split(",")
            records.append(ConvergenceRecord(
                parts[0], int(parts[1]), int(parts[2]), int(parts[3]),
                *[float(v) for v in parts[4:]]))
        return records
    finally:
        if fh is not path_or_fh:
            fh.close()


def default_atm_radii(K0_list, problem):
    """Sub-domain radii whose DoF roughly bracket a coupled K0 sweep."""
    radius = {"microcrack": 7, "divacancy": 1}[problem]
    return tuple(2 * k + radius + 4 for k in K0_list)


def write_state(path_or_fh, domain, y_sites, F):
    """Checkpoint `id ux uy` displacement lines (u = y - F x) for the
    free sites."""
    fh = path_or_fh if hasattr(path_or_fh, "write") else open(path_or_fh, "w")
    try:
        free = domain.free_ids
        u = y_sites[free] - domain.pos[free] @ np.asarray(F, float).T
        for i, (ux, uy) in zip(free, u):
            fh.write(f"{int(i)} {ux:.15g} {uy:.15g}\n")
    finally:
        if fh is not path_or_fh:
            fh.close()
