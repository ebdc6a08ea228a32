import numpy as np
import pytest
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from bqce.errors import SolverError
from bqce.lattice import generate_domain, neighbor_shells
from bqce.solver import (AtomisticProblem, default_preconditioner,
                         make_preconditioner, minimize_pcg, newton_polish,
                         solve_problem)


class Quadratic:
    """Convex quadratic stub f = 0.5 x'Ax - b'x."""

    def __init__(self, a, b):
        self.a = a
        self.b = b
        self.n_dof = b.size

    def x0(self):
        return np.zeros(self.n_dof)

    def value(self, x):
        return 0.5 * float(x @ (self.a @ x)) - float(self.b @ x)

    def value_grad(self, x):
        return self.value(x), self.a @ x - self.b

    def hessian(self, x):
        return sp.csr_matrix(self.a)


@pytest.fixture(scope="module")
def quad():
    rng = np.random.default_rng(0)
    m = rng.standard_normal((8, 8))
    a = m @ m.T + 8 * np.eye(8)
    return Quadratic(a, rng.standard_normal(8))


def test_cg_exact_on_quadratic(quad):
    x, rep = minimize_pcg(quad, quad.x0(), max_iter=quad.n_dof + 2)
    exact = np.linalg.solve(quad.a, quad.b)
    assert np.abs(x - exact).max() < 1e-10
    assert rep.pcg_iterations <= quad.n_dof + 1


def test_cg_descent_lost_at_minimizer(quad):
    exact = np.linalg.solve(quad.a, quad.b)
    x, rep = minimize_pcg(quad, exact)
    assert rep.reason == "descent-lost"
    assert rep.pcg_iterations <= 1


def test_newton_one_step_on_quadratic(quad):
    x, rep = newton_polish(quad, quad.x0(), steps=1)
    exact = np.linalg.solve(quad.a, quad.b)
    assert np.abs(x - exact).max() < 1e-12
    assert rep.newton_iterations == 1


def test_energy_monotone_and_newton(model, ground_state):
    f = np.array([[1.03, 0.03], [0.0, 1.03]]) @ ground_state
    dom = generate_domain(20, "divacancy")
    nbrs = neighbor_shells(dom)
    prob = AtomisticProblem(model, dom, nbrs, f)
    x, rep = solve_problem(prob)
    trace = rep.energy_trace
    assert all(trace[i + 1] <= trace[i] + 1e-12 * abs(trace[i])
               for i in range(len(trace) - 1))
    assert rep.grad_sup < 1e-10
    assert rep.reason == "converged"


def test_newton_superlinear_divacancy50(model, ground_state):
    f = np.array([[1.03, 0.03], [0.0, 1.03]]) @ ground_state
    dom = generate_domain(50, "divacancy")
    nbrs = neighbor_shells(dom)
    prob = AtomisticProblem(model, dom, nbrs, f)
    precond = default_preconditioner(prob)
    x, rep = minimize_pcg(prob, prob.x0(), precond=precond)
    x, nrep = newton_polish(prob, x, steps=3)
    sups = nrep.newton_grad_sups
    # superlinear contraction until the residual hits the machine floor
    assert sups[1] < 1e-3 * sups[0]
    assert all(sups[i + 1] <= 1.5 * sups[i] for i in range(len(sups) - 1))
    assert nrep.grad_sup < 1e-10


def test_preconditioning_reduces_iterations(model, ground_state):
    f = np.array([[1.03, 0.03], [0.0, 1.03]]) @ ground_state
    dom = generate_domain(50, "divacancy")
    nbrs = neighbor_shells(dom)
    prob = AtomisticProblem(model, dom, nbrs, f)
    precond = default_preconditioner(prob)
    _, rep_p = minimize_pcg(prob, prob.x0(), precond=precond, max_iter=150)
    _, rep_u = minimize_pcg(prob, prob.x0(), max_iter=150)
    assert rep_p.pcg_iterations <= rep_u.pcg_iterations


def test_preconditioner_is_spd_defect_free(model, ground_state):
    dom = generate_domain(14)
    nbrs = neighbor_shells(dom)
    prob = AtomisticProblem(model, dom, nbrs, ground_state)
    h0 = prob.hessian(prob.x0()).tocsc()
    lam = spla.eigsh(h0, k=1, which="SA", return_eigenvectors=False)[0]
    assert lam > 0
    assert abs(h0 - h0.T).max() < 1e-12


def test_identity_fallback_on_singular():
    singular = sp.csr_matrix((4, 4))
    assert make_preconditioner(singular) is None


def test_newton_noop_when_converged(quad):
    exact = np.linalg.solve(quad.a, quad.b)
    x, rep = newton_polish(quad, exact, steps=3)
    assert np.abs(x - exact).max() < 1e-12


def test_inconsistent_gradient_raises():
    class Liar(Quadratic):
        def value_grad(self, x):
            return self.value(x), -(self.a @ x - self.b)

    rng = np.random.default_rng(1)
    m = rng.standard_normal((4, 4))
    liar = Liar(m @ m.T + 4 * np.eye(4), rng.standard_normal(4))
    with pytest.raises(SolverError):
        minimize_pcg(liar, np.ones(4))


def test_determinism(model, ground_state):
    f = np.array([[1.03, 0.03], [0.0, 1.03]]) @ ground_state
    dom = generate_domain(14, "divacancy")
    nbrs = neighbor_shells(dom)
    runs = []
    for _ in range(2):
        prob = AtomisticProblem(model, dom, nbrs, f)
        x, rep = solve_problem(prob)
        runs.append((x.copy(), tuple(rep.energy_trace), rep.pcg_iterations))
    assert np.array_equal(runs[0][0], runs[1][0])
    assert runs[0][1] == runs[1][1]
    assert runs[0][2] == runs[1][2]
