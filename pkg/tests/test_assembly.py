import numpy as np
import pytest
import scipy.sparse.linalg as spla

from bqce.assembly import (BqceSystem, boundary_band_nodes,
                           continuum_site_energies, ghost_force_norm)
from bqce.blending import (LABEL_ATOMISTIC, BlendField, beta_linear, beta_qce,
                           beta_smooth, classify_regions, select_parameters)
from bqce.errors import AssemblyError
from bqce.lattice import generate_domain, neighbor_shells
from bqce.mesh import build_graded_mesh, effective_volumes, micro_mesh
from bqce.solver import AtomisticProblem, BqceProblem, solve_problem

from conftest import origin_id


def _zero_blend(dom):
    beta = np.zeros(dom.n_points)
    labels = np.full(dom.n_points, -1, np.int8)
    labels[dom.free] = 0
    return BlendField("qce", dom.N, 0, beta, labels)


@pytest.fixture(scope="module")
def loaded(ground_state):
    return np.array([[1.03, 0.03], [0.0, 1.03]]) @ ground_state


def test_reduction_to_atomistic(model, loaded):
    dom = generate_domain(12, "divacancy")
    nbrs = neighbor_shells(dom)
    mesh = micro_mesh(dom)
    system = BqceSystem(model, dom, nbrs, mesh, _zero_blend(dom), loaded)
    atom = AtomisticProblem(model, dom, nbrs, loaded)
    rng = np.random.default_rng(3)
    x = 0.02 * rng.standard_normal(atom.n_dof)
    u = np.zeros((mesh.n_nodes, 2))
    u[mesh.site_node[atom.solve_ids]] = x.reshape(-1, 2)
    y_nodes = mesh.node_xy @ loaded.T + u
    e_b, g_b = system.energy_gradient(y_nodes)
    e_a, g_a = atom.value_grad(x)
    assert abs(e_b - e_a) <= 1e-12 * abs(e_a)
    g_b_sites = g_b[mesh.site_node[atom.solve_ids]].ravel()
    assert np.abs(g_b_sites - g_a).max() < 1e-10
    h_b = BqceProblem(model, dom, nbrs, mesh, _zero_blend(dom), loaded)
    # hessians agree on the shared free dofs
    hb = system.hessian(y_nodes)
    dofs = np.stack([2 * mesh.site_node[atom.solve_ids],
                     2 * mesh.site_node[atom.solve_ids] + 1], 1).ravel()
    hb = hb[dofs][:, dofs]
    ha = atom.hessian(x)
    assert abs(hb - ha).max() < 1e-8


def test_homogeneous_exactness(model, ground_state, loaded):
    from bqce.eam import total_atomistic_energy

    dom = generate_domain(20)
    nbrs = neighbor_shells(dom)
    orig = origin_id(dom)
    plan = select_parameters(3, 2, 4, 20)
    fdv = np.array([[1.03, 0.03], [0.0, 1.03]]) @ ground_state
    for kind, k1 in (("qce", 0), ("linear", 4), ("smooth", 4)):
        regions = classify_regions(dom, [orig], 4, k1)
        blend = {"qce": beta_qce, "linear": beta_linear,
                 "smooth": beta_smooth}[kind](dom, regions)
        mesh = build_graded_mesh(dom, regions, plan)
        effective_volumes(mesh, blend, dom)
        for f in (ground_state, loaded, fdv):
            system = BqceSystem(model, dom, nbrs, mesh, blend, f)
            e_b = system.energy(mesh.node_xy @ f.T)
            e_a = total_atomistic_energy(model, dom, nbrs, dom.pos @ f.T)
            assert abs(e_b - e_a) <= 1e-10 * abs(e_a)


def test_qce_equals_direct_site_assembly(model, loaded):
    dom = generate_domain(16)
    nbrs = neighbor_shells(dom)
    orig = origin_id(dom)
    regions = classify_regions(dom, [orig], 3, 0)
    blend = beta_qce(dom, regions)
    plan = select_parameters(3, 2, 3, 16)
    mesh = build_graded_mesh(dom, regions, plan)
    effective_volumes(mesh, blend, dom)
    system = BqceSystem(model, dom, nbrs, mesh, blend, loaded)
    rng = np.random.default_rng(8)
    u = np.zeros((mesh.n_nodes, 2))
    free = ~mesh.constrained
    u[free] = 0.01 * rng.standard_normal((int(free.sum()), 2))
    y_nodes = mesh.node_xy @ loaded.T + u
    e_blended = system.energy(y_nodes)
    # direct QCE: atomistic site energies on the atomistic region plus
    # site-major clipped Cauchy-Born energies on the continuum region
    from bqce.eam import site_energies
    from bqce.mesh import interpolate_to_lattice

    y_sites = interpolate_to_lattice(mesh, y_nodes, dom)
    y_sites[~dom.free] = dom.pos[~dom.free] @ loaded.T
    a_ids = np.nonzero(regions.labels == LABEL_ATOMISTIC)[0]
    c_ids = np.nonzero(dom.free & (blend.beta == 1.0))[0]
    e_at = site_energies(model, nbrs, y_sites, a_ids).sum()
    e_cont = continuum_site_energies(model, dom, mesh, y_nodes, c_ids).sum()
    assert abs(e_blended - (e_at + e_cont)) <= 1e-10 * abs(e_blended)


def test_gradient_hessian_fd(model, loaded):
    dom = generate_domain(16, "divacancy")
    nbrs = neighbor_shells(dom)
    regions = classify_regions(dom, dom.defect_ids, 3, 3)
    blend = beta_smooth(dom, regions)
    plan = select_parameters(3, 2, 3, 16)
    mesh = build_graded_mesh(dom, regions, plan)
    effective_volumes(mesh, blend, dom)
    prob = BqceProblem(model, dom, nbrs, mesh, blend, loaded)
    rng = np.random.default_rng(12)
    x = 0.02 * rng.standard_normal(prob.n_dof)
    _, g = prob.value_grad(x)
    h = 1e-5
    worst = 0.0
    for k in rng.choice(prob.n_dof, 12, replace=False):
        xp = x.copy()
        xp[k] += h
        xm = x.copy()
        xm[k] -= h
        fd = (prob.value(xp) - prob.value(xm)) / (2 * h)
        worst = max(worst, abs(fd - g[k]) / max(1.0, abs(fd)))
    assert worst < 1e-6
    hess = prob.hessian(x)
    assert abs(hess - hess.T).max() < 1e-12
    v = rng.standard_normal(prob.n_dof)
    hp = 1e-6
    _, gp = prob.value_grad(x + hp * v)
    _, gm = prob.value_grad(x - hp * v)
    fd = (gp - gm) / (2 * hp)
    assert np.abs(hess @ v - fd).max() <= 1e-5 * np.abs(fd).max()


def test_translation_invariance(model, loaded):
    dom = generate_domain(14, "divacancy")
    nbrs = neighbor_shells(dom)
    regions = classify_regions(dom, dom.defect_ids, 3, 3)
    blend = beta_smooth(dom, regions)
    plan = select_parameters(3, 2, 3, 14)
    mesh = build_graded_mesh(dom, regions, plan)
    effective_volumes(mesh, blend, dom)
    system = BqceSystem(model, dom, nbrs, mesh, blend, loaded)
    rng = np.random.default_rng(1)
    u = 0.01 * rng.standard_normal((mesh.n_nodes, 2))
    y = mesh.node_xy @ loaded.T + u
    t = np.array([0.8, -0.45])
    e0 = system.energy(y)
    e1 = system.energy(y + t, halo_shift=t)
    assert abs(e1 - e0) <= 1e-10 * abs(e0)


def test_ghost_force_decay(model, ground_state):
    dom = generate_domain(40)
    nbrs = neighbor_shells(dom)
    orig = origin_id(dom)
    mesh0 = micro_mesh(dom)
    effective_volumes(mesh0, _zero_blend(dom), dom)
    sup0, l20 = ghost_force_norm(model, dom, nbrs, mesh0, _zero_blend(dom),
                                 ground_state)
    assert sup0 < 1e-10 and l20 < 1e-10
    sups = {}
    for kind in ("qce", "smooth"):
        for k in (4, 8):
            k0, k1 = (k, 0) if kind == "qce" else (4, k)
            regions = classify_regions(dom, [orig], k0, k1)
            blend = beta_qce(dom, regions) if kind == "qce" \
                else beta_smooth(dom, regions)
            plan = select_parameters(3, 2, k0, 40)
            mesh = build_graded_mesh(dom, regions, plan)
            effective_volumes(mesh, blend, dom)
            sups[kind, k] = ghost_force_norm(model, dom, nbrs, mesh, blend,
                                             ground_state)[0]
    assert sups["qce", 8] >= 0.5 * sups["qce", 4]
    assert sups["smooth", 8] <= 0.5 * sups["smooth", 4]
    assert sups["qce", 4] > 1e-3


def test_minimizer_hessian_nonnegative(model, loaded):
    dom = generate_domain(14, "divacancy")
    nbrs = neighbor_shells(dom)
    regions = classify_regions(dom, dom.defect_ids, 3, 3)
    blend = beta_smooth(dom, regions)
    plan = select_parameters(3, 2, 3, 14)
    mesh = build_graded_mesh(dom, regions, plan)
    effective_volumes(mesh, blend, dom)
    prob = BqceProblem(model, dom, nbrs, mesh, blend, loaded)
    x, rep = solve_problem(prob)
    h = prob.hessian(x).tocsc()
    lam = spla.eigsh(h, k=1, which="SA", return_eigenvectors=False)[0]
    assert lam >= -1e-8


def test_element_inversion_reported(model, loaded):
    dom = generate_domain(14)
    nbrs = neighbor_shells(dom)
    orig = origin_id(dom)
    regions = classify_regions(dom, [orig], 3, 3)
    blend = beta_smooth(dom, regions)
    plan = select_parameters(3, 2, 3, 14)
    mesh = build_graded_mesh(dom, regions, plan)
    effective_volumes(mesh, blend, dom)
    system = BqceSystem(model, dom, nbrs, mesh, blend, loaded)
    y = mesh.node_xy @ loaded.T
    # collapse one vertex of an active far-field element across its base
    e = int(np.nonzero(mesh.v_eff > 0)[0][-1])
    tri = mesh.elements[e]
    # reflect the third vertex through the opposite edge midpoint
    y[tri[2]] = y[tri[0]] + y[tri[1]] - y[tri[2]]
    with pytest.raises(AssemblyError, match="element"):
        system.energy(y)


def test_boundary_band_requires_volumes(model, loaded):
    dom = generate_domain(14)
    mesh = micro_mesh(dom)
    with pytest.raises(AssemblyError):
        boundary_band_nodes(mesh, dom)
