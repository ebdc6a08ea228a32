import math

import numpy as np
import pytest

from bqce.eam import (EamModel, atomistic_gradient, atomistic_hessian,
                      site_energies, site_energy, total_atomistic_energy)
from bqce.errors import EvaluationError
from bqce.lattice import SQRT3

from conftest import origin_id


def test_pair_phi_values(model):
    v, d1, _ = model.pair_phi(1.0)
    assert abs(v - (-1.0)) < 1e-15
    assert abs(d1) < 1e-15
    v2, _, _ = model.pair_phi(2.0)
    assert abs(v2 - (math.exp(-8.8) - 2 * math.exp(-4.4))) < 1e-15


def test_pair_phi_derivatives_fd(model):
    h = 1e-6
    for r in (0.9, 1.3, 2.2):
        v, d1, d2 = model.pair_phi(r)
        fd1 = (model.pair_phi(r + h)[0] - model.pair_phi(r - h)[0]) / (2 * h)
        fd2 = (model.pair_phi(r + h)[1] - model.pair_phi(r - h)[1]) / (2 * h)
        assert abs(d1 - fd1) < 1e-7 * max(1, abs(fd1))
        assert abs(d2 - fd2) < 1e-7 * max(1, abs(fd2))


def test_density_and_embedding(model):
    v, d1, d2 = model.density_rho(1.0)
    assert abs(v - math.exp(-3.0)) < 1e-15
    assert abs(d1 + 3 * v) < 1e-15
    g0, g1, _ = model.embed_G(model.rho_bar_0)
    assert g0 == 0.0 and g1 == 0.0
    s0 = model.rho_bar_0
    gz, _, _ = model.embed_G(0.0)
    assert abs(gz - model.c * (s0 ** 2 + s0 ** 4)) < 1e-14


def test_site_energy_perfect_lattice(model, domain10, nbrs10):
    e = site_energy(model, domain10, nbrs10, domain10.pos,
                    origin_id(domain10))
    # independent oracle: explicit sums over the three shells
    phi = lambda r: math.exp(-2 * model.a * (r - 1)) \
        - 2 * math.exp(-model.a * (r - 1))
    rho = lambda r: math.exp(-model.b * r)
    gg = lambda s: model.c * ((s - model.rho_bar_0) ** 2
                              + (s - model.rho_bar_0) ** 4)
    oracle = 3 * (phi(1) + phi(SQRT3) + phi(2)) + gg(6 * rho(1) + 6 * rho(SQRT3))
    assert abs(e - oracle) < 1e-13


def test_site_energy_no_neighbors(model, domain10):
    # all neighbors removed: only the embedding term at zero density is left
    from bqce.lattice import NeighborTable

    n = domain10.n_points
    empty = np.zeros(n + 1, np.int64)
    none = np.zeros(0, np.int64)
    bare = NeighborTable(1.8, 2.5, (empty,), (none,), empty, none, empty, none)
    e = site_energy(model, domain10, bare, domain10.pos, origin_id(domain10))
    s0 = model.rho_bar_0
    assert abs(e - model.c * (s0 ** 2 + s0 ** 4)) < 1e-15


def test_homogeneity_under_uniform_strain(model, domain10, nbrs10,
                                          ground_state):
    F = np.array([[1.01, 0.02], [0.0, 0.99]]) @ ground_state
    y = domain10.pos @ F.T
    interior = domain10.free_ids[domain10.hexn[domain10.free_ids] <= 6]
    e = site_energies(model, nbrs10, y, interior)
    assert np.abs(e - e[0]).max() < 1e-13


def test_total_energy_and_gradient_fd(model, divacancy12):
    domain, nbrs = divacancy12
    rng = np.random.default_rng(7)
    y = domain.pos + 0.03 * rng.standard_normal((domain.n_points, 2))
    e, g = atomistic_gradient(model, domain, nbrs, y)
    h = 1e-5
    worst = 0.0
    for k in rng.choice(domain.free_ids, 10, replace=False):
        for c in range(2):
            yp = y.copy()
            yp[k, c] += h
            ym = y.copy()
            ym[k, c] -= h
            fd = (total_atomistic_energy(model, domain, nbrs, yp)
                  - total_atomistic_energy(model, domain, nbrs, ym)) / (2 * h)
            worst = max(worst, abs(fd - g[k, c]) / max(1.0, abs(fd)))
    assert worst < 1e-6


def test_interior_gradient_zero_at_identity(model, domain10, nbrs10):
    _, g = atomistic_gradient(model, domain10, nbrs10, domain10.pos)
    interior = domain10.free & (domain10.hexn <= 6)
    assert np.abs(g[interior]).max() < 1e-12


def test_net_force_vanishes(model, domain10, nbrs10):
    _, g = atomistic_gradient(model, domain10, nbrs10, domain10.pos)
    assert np.abs(g[domain10.free].sum(axis=0)).max() < 1e-10


def test_translation_and_rotation_invariance(model, divacancy12):
    domain, nbrs = divacancy12
    rng = np.random.default_rng(11)
    y = domain.pos + 0.02 * rng.standard_normal((domain.n_points, 2))
    e = total_atomistic_energy(model, domain, nbrs, y)
    e_t = total_atomistic_energy(model, domain, nbrs, y + [0.7, -2.3])
    assert abs(e_t - e) <= 1e-12 * abs(e)
    th = 0.6
    q = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
    e_r = total_atomistic_energy(model, domain, nbrs, y @ q.T)
    assert abs(e_r - e) <= 1e-10 * abs(e)


def test_hessian_symmetry_and_fd(model, divacancy12):
    domain, nbrs = divacancy12
    rng = np.random.default_rng(13)
    y = domain.pos + 0.02 * rng.standard_normal((domain.n_points, 2))
    h = atomistic_hessian(model, domain, nbrs, y)
    assert abs(h - h.T).max() < 1e-12
    v = rng.standard_normal((domain.n_points, 2))
    v[~domain.free] = 0.0
    step = 1e-6
    _, gp = atomistic_gradient(model, domain, nbrs, y + step * v)
    _, gm = atomistic_gradient(model, domain, nbrs, y - step * v)
    fd = (gp - gm) / (2 * step)
    hv = (h @ v.ravel()).reshape(-1, 2)
    fr = domain.free
    assert np.abs(hv[fr] - fd[fr]).max() <= 1e-6 * np.abs(fd[fr]).max()


def test_coincident_positions_error(model, domain10, nbrs10):
    y = domain10.pos.copy()
    orig = origin_id(domain10)
    e1 = int(domain10.lookup(np.array([[1, 0]]))[0])
    y[e1] = y[orig]
    with pytest.raises(EvaluationError, match=r"\d+"):
        total_atomistic_energy(model, domain10, nbrs10, y)


def test_custom_parameters_default_rho0():
    m = EamModel(b=2.0)
    assert abs(m.rho_bar_0 - 6 * math.exp(-2.0)) < 1e-15
