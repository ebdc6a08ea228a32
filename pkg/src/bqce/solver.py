"""Energy minimization: preconditioned Polak-Ribiere conjugate gradients
run to maximal precision, then a fixed number of full Newton steps.

The PCG loop terminates when the computed direction stops being a
descent direction (the precision floor of the energy), mirroring the
reference pipeline; three Newton steps with a sparse symmetric solve
then push the gradient to machine-precision levels.
"""

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from .assembly import BqceSystem, boundary_band_nodes
from .eam import total_atomistic_energy, atomistic_gradient, atomistic_hessian
from .errors import AssemblyError, EvaluationError, SolverError

_EPS = float(np.finfo(float).eps)


@dataclass
class SolveReport:
    pcg_iterations: int = 0
    newton_iterations: int = 0
    energy: float = float("nan")
    grad_sup: float = float("nan")
    reason: str = ""
    wall_time_s: float = 0.0
    energy_trace: list = field(default_factory=list)
    newton_grad_sups: list = field(default_factory=list)
    preconditioned: bool = False


def _dof_index(ids):
    return np.stack([2 * ids, 2 * ids + 1], axis=1).ravel()


class AtomisticProblem:
    """Atomistic energy over the domain with a subset of free sites.

    The functional sums every free site's energy plus the halo sites'
    energy differences from the homogeneous state, so uniform strain is
    an exact equilibrium on a defect-free domain and values are
    comparable across different solve masks. Unknowns are the
    displacements of `solve_ids`.
    """

    def __init__(self, model, domain, nbrs, F, solve_ids=None):
        self.model = model
        self.domain = domain
        self.nbrs = nbrs
        self.F = np.asarray(F, float)
        self.weights = (domain.free | domain.is_halo).astype(float)
        self.active = np.nonzero(self.weights > 0)[0].astype(np.int64)
        if solve_ids is None:
            solve_ids = domain.free_ids
        self.solve_ids = np.asarray(solve_ids, np.int64)
        self.base = domain.pos @ self.F.T
        self.n_dof = 2 * self.solve_ids.size
        self._dofs = _dof_index(self.solve_ids)
        halo = domain.halo_ids
        self._offset = -total_atomistic_energy(model, domain, nbrs, self.base,
                                               self.weights, halo)
        # site energies more than two hops away from the unknowns are
        # constants of the minimization: sum them once and skip them in
        # the hot evaluations
        if self.solve_ids.size < domain.free_ids.size:
            from .lattice import hopping_distance

            d = hopping_distance(domain, self.solve_ids)
            self._eval_sites = self.active[d[self.active] <= 3]
            far = self.active[d[self.active] > 3]
            self._offset += total_atomistic_energy(
                model, domain, nbrs, self.base, self.weights, far)
        else:
            self._eval_sites = self.active

    def x0(self):
        return np.zeros(self.n_dof)

    def positions(self, x):
        pos = self.base.copy()
        pos[self.solve_ids] += x.reshape(-1, 2)
        return pos

    def value(self, x):
        return self._offset + total_atomistic_energy(
            self.model, self.domain, self.nbrs, self.positions(x),
            self.weights, self._eval_sites)

    def value_grad(self, x):
        e, g = atomistic_gradient(self.model, self.domain, self.nbrs,
                                  self.positions(x), self.weights,
                                  self._eval_sites)
        return self._offset + e, g[self.solve_ids].ravel()

    def hessian(self, x):
        h = atomistic_hessian(self.model, self.domain, self.nbrs,
                              self.positions(x), self.weights,
                              self._eval_sites)
        return h[self._dofs][:, self._dofs]


class BqceProblem:
    """Blended energy over the free mesh-node displacements."""

    def __init__(self, model, domain, nbrs, mesh, blend, F):
        self.system = BqceSystem(model, domain, nbrs, mesh, blend, F)
        self.mesh = mesh
        self.F = self.system.F
        clamped = mesh.constrained | boundary_band_nodes(mesh, domain)
        self.free_nodes = np.nonzero(~clamped)[0]
        self.base = mesh.node_xy @ self.F.T
        self.n_dof = 2 * self.free_nodes.size
        self._dofs = _dof_index(self.free_nodes)

    def x0(self):
        return np.zeros(self.n_dof)

    def node_positions(self, x):
        y = self.base.copy()
        y[self.free_nodes] += x.reshape(-1, 2)
        return y

    def displacements(self, x):
        u = np.zeros_like(self.base)
        u[self.free_nodes] = x.reshape(-1, 2)
        return u

    def value(self, x):
        return self.system.energy(self.node_positions(x))

    def value_grad(self, x):
        e, g = self.system.energy_gradient(self.node_positions(x))
        return e, g[self.free_nodes].ravel()

    def hessian(self, x):
        h = self.system.hessian(self.node_positions(x))
        return h[self._dofs][:, self._dofs]

    def state(self, x):
        from .assembly import BqceState

        return BqceState(self.F.copy(), self.displacements(x))


def make_preconditioner(h):
    """SPD-solve preconditioner from a sparse matrix; identity fallback."""
    try:
        lu = spla.splu(h.tocsc(), permc_spec="MMD_AT_PLUS_A")
        probe = lu.solve(np.ones(h.shape[0]))
        if not np.isfinite(probe).all():
            return None
        return lu.solve
    except (RuntimeError, ValueError):
        return None


def default_preconditioner(problem):
    """Hessian at the homogeneous state, factorized once and reused."""
    return make_preconditioner(problem.hessian(problem.x0()))


def _safe_value(objective, x):
    try:
        v = objective.value(x)
    except (AssemblyError, EvaluationError):
        return float("inf")
    return v if np.isfinite(v) else float("inf")


def _safe_value_grad(objective, x):
    try:
        f, g = objective.value_grad(x)
    except (AssemblyError, EvaluationError):
        return float("inf"), None
    if not np.isfinite(f):
        return float("inf"), None
    return f, g


def _line_search(objective, x, d, f0, gd0, alpha0, c1, max_backtracks):
    """Backtracking Armijo search with one secant-on-slope refinement.

    The secant step zeroes the directional derivative exactly for
    quadratic energies (so CG terminates in n iterations there) and is
    free of the cancellation that plagues value-based interpolation near
    the precision floor. Returns (alpha, f, g) or None after exhausting
    the backtracks.
    """
    a = alpha0
    for _ in range(max_backtracks):
        f1, g1 = _safe_value_grad(objective, x + a * d)
        if f1 <= f0 + c1 * a * gd0:
            s1 = float(np.dot(g1, d))
            if s1 > gd0:
                aq = a * gd0 / (gd0 - s1)
                if 0 < aq <= 50 * a and abs(aq - a) > 1e-14 * a:
                    f2, g2 = _safe_value_grad(objective, x + aq * d)
                    # prefer the secant point on ties: it is the exact 1D
                    # minimizer for quadratic energies
                    if g2 is not None and f2 <= f0 + c1 * aq * gd0 \
                            and f2 <= f1 + 1e-12 * (1.0 + abs(f1)):
                        return aq, f2, g2
            return a, f1, g1
        if g1 is not None:
            s1 = float(np.dot(g1, d))
            if s1 > gd0:
                a = min(max(a * gd0 / (gd0 - s1), 0.1 * a), 0.5 * a)
                continue
        a *= 0.5
    return None


def minimize_pcg(objective, x0, precond=None, max_iter=None, armijo=1e-4,
                 max_backtracks=40):
    """Preconditioned Polak-Ribiere CG run until descent is lost.

    Accepted steps satisfy the Armijo condition, so the recorded energy
    trace is nonincreasing. Termination reasons: 'descent-lost' (the
    numerical precision floor), 'max-iter'.
    """
    t0 = time.perf_counter()
    x = np.array(x0, float)
    if max_iter is None:
        max_iter = 5 * max(1, x.size)
    f, g = objective.value_grad(x)
    z = precond(g) if precond is not None else g
    d = -z
    gz = float(np.dot(g, z))
    report = SolveReport(preconditioned=precond is not None)
    report.energy_trace.append(f)
    reason = "max-iter"
    it = 0
    f_prev = None
    stalled = 0
    while it < max_iter:
        gd = float(np.dot(g, d))
        floor = -_EPS * (1.0 + abs(f))
        if gd >= floor:
            d = -z
            gd = -gz
            if gd >= floor:
                reason = "descent-lost"
                break
        if f_prev is None:
            alpha0 = 1.0
        else:
            alpha0 = min(1.0, 2.02 * (f_prev - f) / max(-gd, 1e-300))
            if not np.isfinite(alpha0) or alpha0 <= 0:
                alpha0 = 1.0
        hit = _line_search(objective, x, d, f, gd, alpha0, armijo,
                           max_backtracks)
        if hit is None:
            if abs(gd) <= np.sqrt(_EPS) * (1.0 + abs(f)):
                reason = "descent-lost"
                break
            raise SolverError(
                f"line search failed on a genuine descent direction "
                f"(slope {gd:g}); the gradient is inconsistent")
        alpha, f_new, g_new = hit
        x = x + alpha * d
        f_prev = f
        f = f_new
        z_new = precond(g_new) if precond is not None else g_new
        beta = max(0.0, float(np.dot(g_new - g, z_new)) / gz)
        gz = float(np.dot(g_new, z_new))
        g = g_new
        z = z_new
        d = -z + beta * d
        it += 1
        report.energy_trace.append(f)
        # maximal precision: consecutive steps that only shave roundoff
        # off the energy mean descent is numerically exhausted
        if f_prev - f <= 8.0 * _EPS * (1.0 + abs(f)):
            stalled += 1
            if stalled >= 2:
                reason = "descent-lost"
                break
        else:
            stalled = 0
    report.pcg_iterations = it
    report.energy = f
    report.grad_sup = float(np.abs(g).max()) if g.size else 0.0
    report.reason = reason
    report.wall_time_s = time.perf_counter() - t0
    return x, report


def newton_polish(objective, x, steps=3):
    """Fixed number of full Newton steps with a sparse direct solve."""
    t0 = time.perf_counter()
    x = np.array(x, float)
    report = SolveReport()
    f, g = objective.value_grad(x)
    entry_sup = float(np.abs(g).max())
    for _ in range(steps):
        report.newton_grad_sups.append(float(np.abs(g).max()))
        h = objective.hessian(x)
        try:
            lu = spla.splu(h.tocsc(), permc_spec="MMD_AT_PLUS_A")
        except (RuntimeError, ValueError) as err:
            raise SolverError(
                f"Newton factorization failed ({err}); the state is not "
                f"near a strict local minimizer") from err
        delta = lu.solve(-g)
        if not np.isfinite(delta).all():
            raise SolverError(
                "singular or indefinite Hessian produced a non-finite "
                "Newton step")
        x = x + delta
        f, g = objective.value_grad(x)
        report.newton_iterations += 1
    sup = float(np.abs(g).max())
    if sup > 10.0 * entry_sup + 1e-8:
        raise SolverError(
            f"Newton steps increased the gradient ({entry_sup:g} -> "
            f"{sup:g}); the state is not near a strict local minimizer")
    report.newton_grad_sups.append(sup)
    report.energy = f
    report.grad_sup = sup
    report.reason = "converged"
    report.wall_time_s = time.perf_counter() - t0
    return x, report


def solve_problem(problem, precondition=True, max_iter=None, newton_steps=3):
    """Full pipeline: PCG to maximal precision, then Newton polish."""
    t0 = time.perf_counter()
    precond = default_preconditioner(problem) if precondition else None
    x, rep = minimize_pcg(problem, problem.x0(), precond=precond,
                          max_iter=max_iter)
    x, nrep = newton_polish(problem, x, steps=newton_steps)
    rep.newton_iterations = nrep.newton_iterations
    rep.newton_grad_sups = nrep.newton_grad_sups
    rep.energy = nrep.energy
    rep.grad_sup = nrep.grad_sup
    rep.reason = nrep.reason
    rep.wall_time_s = time.perf_counter() - t0
    return x, rep
