import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bqce.errors import ConstructionError
from bqce.lattice import (SQRT3, VORONOI_AREA, dump_lattice, generate_domain,
                          hex_norm, hopping_distance, lattice_positions,
                          micro_triangulation, neighbor_shells, voronoi_cell)

from conftest import origin_id


def test_site_count_examples():
    assert generate_domain(1).free.sum() == 7
    assert generate_domain(100).free.sum() == 30301
    assert generate_domain(100, "microcrack11").free.sum() == 30301 - 11


@given(st.integers(min_value=1, max_value=60))
@settings(max_examples=12, deadline=None)
def test_site_count_formula(n):
    assert generate_domain(n).free.sum() == 3 * n * n + 3 * n + 1


def test_site_count_formula_large():
    assert generate_domain(500).free.sum() == 3 * 500 ** 2 + 3 * 500 + 1


def test_defect_requires_interior_domain():
    with pytest.raises(ConstructionError):
        generate_domain(7, "microcrack11")
    with pytest.raises(ConstructionError):
        generate_domain(5, "divacancy")


def test_unknown_defect_rejected():
    with pytest.raises(ConstructionError):
        generate_domain(10, "voidzilla")


def test_defects_removed_and_disjoint():
    d = generate_domain(10, "divacancy")
    assert d.is_defect.sum() == 2
    assert not (d.is_defect & d.free).any()
    # no duplicate lattice points
    assert np.unique(d.lat, axis=0).shape[0] == d.n_points


def test_halo_is_within_pair_cutoff():
    d = generate_domain(6)
    dom = d.pos[d.free]
    halo = d.pos[d.is_halo]
    dmin = np.sqrt(((halo[:, None, :] - dom[None, :, :]) ** 2).sum(-1)).min(1)
    assert dmin.max() <= 2.5 + 1e-12
    assert (d.hexn[d.is_halo] > 6).all()
    # guard band sits beyond the halo and is never free
    assert not (d.is_guard & d.free).any()


def test_neighbor_shell_counts(domain10, nbrs10):
    orig = origin_id(domain10)
    assert nbrs10.shell_counts(orig) == (6, 6, 6)
    assert len(nbrs10.neighbors(orig)) == 18
    # shell radii are 1, sqrt(3), 2 in reference positions
    for ptr, idx, rad in zip(nbrs10.shell_ptr, nbrs10.shell_idx, (1.0, SQRT3, 2.0)):
        ids = idx[ptr[orig]:ptr[orig + 1]]
        r = np.linalg.norm(domain10.pos[ids] - domain10.pos[orig], axis=1)
        assert np.allclose(r, rad, atol=1e-12)
        assert (r < 2.5).all()


def test_defect_adjacent_first_shell():
    d = generate_domain(10, "divacancy")
    nb = neighbor_shells(d)
    site = int(d.lookup(np.array([[-1, 0]]))[0])  # next to removed (0,0)
    assert nb.shell_counts(site)[0] == 5
    # defect sites appear in no list
    for ids in (nb.pair_idx, nb.dens_idx):
        assert not d.is_defect[ids].any()


def test_neighbor_symmetry(domain10, nbrs10):
    pairs = set()
    for s in range(domain10.n_points):
        for t in nbrs10.neighbors(s):
            pairs.add((s, int(t)))
    for s, t in pairs:
        assert (t, s) in pairs


def test_hopping_examples():
    d = generate_domain(10)
    orig = origin_id(d)
    hops = hopping_distance(d, [orig])
    e1 = int(d.lookup(np.array([[1, 0]]))[0])
    e2 = int(d.lookup(np.array([[2, 0]]))[0])
    assert hops[orig] == 0
    assert hops[e1] == 1
    assert hops[e2] == 2


def test_hopping_triangle_inequality(domain10, nbrs10):
    hops = hopping_distance(domain10, [origin_id(domain10)])
    ptr, idx = nbrs10.shell_ptr[0], nbrs10.shell_idx[0]
    for s in range(domain10.n_points):
        for t in idx[ptr[s]:ptr[s + 1]]:
            assert abs(int(hops[s]) - int(hops[t])) <= 1


def test_hopping_counts_defect_vertices():
    # layers measured around the crack pass through the removed sites
    d = generate_domain(12, "microcrack11")
    hops = hopping_distance(d, d.defect_ids)
    above = int(d.lookup(np.array([[0, 1]]))[0])
    assert hops[above] == 1


def test_hopping_empty_source(domain10):
    with pytest.raises(ConstructionError):
        hopping_distance(domain10, [])


def test_voronoi_cell(domain10):
    cell = voronoi_cell(domain10, origin_id(domain10))
    assert abs(cell.area - VORONOI_AREA) < 1e-12
    assert cell.vertices.shape == (6, 2)
    r = np.linalg.norm(cell.vertices - cell.center, axis=1)
    assert np.allclose(r, 1.0 / math.sqrt(3.0), atol=1e-12)
    # closed polygon repeats the first vertex
    assert np.allclose(cell.closed_vertices[0], cell.closed_vertices[-1])


def test_micro_triangulation_geometry():
    d = generate_domain(1)
    tris = micro_triangulation(d)
    assert len(tris) == 6
    p = d.pos[tris]
    areas = 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                   - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0]))
    assert np.allclose(areas, math.sqrt(3) / 4, atol=1e-12)


def test_micro_triangulation_excludes_defects():
    d = generate_domain(10, "divacancy")
    tris = micro_triangulation(d)
    assert not d.is_defect[tris].any()
    # count: perfect hexagon loses the 12 triangles touching either vacancy
    full = micro_triangulation(generate_domain(10))
    assert len(tris) < len(full)


def test_micro_triangulation_tiles_hexagon():
    d = generate_domain(9)
    tris = micro_triangulation(d)
    p = d.pos[tris]
    areas = 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                   - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0]))
    hex_area = 3 * math.sqrt(3) / 2 * 81
    assert abs(areas.sum() - hex_area) < 1e-9 * hex_area


def test_voronoi_tiling_of_interior_element(domain10):
    from bqce.mesh import clip_convex, polygon_area

    tris = micro_triangulation(domain10)
    cents = domain10.pos[tris].mean(axis=1)
    t = tris[int(np.argmin(np.linalg.norm(cents, axis=1)))]
    tri_poly = domain10.pos[t]
    total = 0.0
    for s in range(domain10.n_points):
        cell = voronoi_cell(domain10, s)
        total += polygon_area(clip_convex(cell.vertices, tri_poly))
    assert abs(total - math.sqrt(3) / 4) < 1e-12


def test_hex_norm_matches_positions():
    lat = np.array([[3, -1], [0, 5], [-2, -2]])
    assert list(hex_norm(lat)) == [3, 5, 4]
    pos = lattice_positions(lat)
    assert np.allclose(pos[1], [2.5, 5 * SQRT3 / 2])


def test_dump_format():
    d = generate_domain(2)
    tris = micro_triangulation(d)
    ids = d.free_ids
    buf = io.StringIO()
    dump_lattice(buf, ids, d.pos[ids], elements=tris,
                 beta=np.linspace(0, 1, ids.size))
    lines = buf.getvalue().splitlines()
    assert lines[0] == f"sites {ids.size}"
    ncoord = lines[1].split()
    assert len(ncoord) == 3
    assert lines[1 + ids.size] == f"elements {len(tris)}"
    assert lines[2 + ids.size + len(tris)].startswith("beta")
