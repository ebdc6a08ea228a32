"""Conforming radially coarsened triangulation and BQCE effective volumes.

The mesh is fully refined (unit lattice triangles) on every site that
carries any atomistic weight plus a two-layer buffer, then coarsens in
concentric hexagonal rings whose spacing follows the grading rule
h(x) = (|x|/K0)^gamma subject to a growth cap on adjacent element
diameters. The outermost ring is the hexagon through the first halo
layer (side N+1), so the Voronoi cells of all domain sites are covered
and the effective-volume identity holds exactly.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .blending import LABEL_CONTINUUM
from .errors import ConstructionError, MeshError
from .lattice import VORONOI_TEMPLATE, _unit_triangles, lattice_positions

# hexagon corner directions (positions of lattice points (r,0), (0,r), ...)
_CORNER_LAT = np.array([(1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1)],
                       np.int64)
_CORNER_XY = lattice_positions(_CORNER_LAT)
MESH_BUFFER_LAYERS = 2


@dataclass
class Mesh:
    """Triangulation with node/element data and lattice cross-references."""

    node_xy: np.ndarray
    node_site: np.ndarray        # lattice point id per node, -1 if none
    elements: np.ndarray         # (n_elem, 3) node ids, CCW
    constrained: np.ndarray      # Dirichlet boundary or passive defect node
    site_node: np.ndarray        # node id per lattice point, -1 if none
    R_fine: int
    growth_cap: float
    ring_radii: np.ndarray
    v_eff: np.ndarray = None
    _grid: tuple = field(default=None, repr=False)

    @property
    def n_nodes(self):
        return self.node_xy.shape[0]

    @property
    def n_elements(self):
        return self.elements.shape[0]

    @property
    def tri_xy(self):
        return self.node_xy[self.elements]

    @property
    def areas(self):
        p = self.tri_xy
        return 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                      - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0]))

    @property
    def diameters(self):
        p = self.tri_xy
        e0 = np.linalg.norm(p[:, 1] - p[:, 0], axis=1)
        e1 = np.linalg.norm(p[:, 2] - p[:, 1], axis=1)
        e2 = np.linalg.norm(p[:, 0] - p[:, 2], axis=1)
        return np.maximum(e0, np.maximum(e1, e2))

    @property
    def shape_grads(self):
        """P1 barycentric gradients: grad lambda_v per element vertex."""
        p = self.tri_xy
        g = np.empty((self.n_elements, 3, 2))
        for v in range(3):
            d = p[:, (v + 1) % 3] - p[:, (v + 2) % 3]
            g[:, v, 0] = d[:, 1]
            g[:, v, 1] = -d[:, 0]
        return g / (2.0 * self.areas)[:, None, None]

    def grid(self):
        if self._grid is None:
            self._grid = _build_grid(self.tri_xy)
        return self._grid


def _build_grid(tri_xy, cell=1.0):
    """Uniform grid registering each element with the cells its bbox covers."""
    lo = tri_xy.reshape(-1, 2).min(axis=0) - 1e-9
    hi = tri_xy.reshape(-1, 2).max(axis=0) + 1e-9
    inv = 1.0 / cell
    nx = max(1, int(math.ceil((hi[0] - lo[0]) * inv)))
    ny = max(1, int(math.ceil((hi[1] - lo[1]) * inv)))
    bmin = tri_xy.min(axis=1)
    bmax = tri_xy.max(axis=1)
    cx0 = np.clip(np.floor((bmin[:, 0] - lo[0]) * inv).astype(np.int64), 0, nx - 1)
    cx1 = np.clip(np.floor((bmax[:, 0] - lo[0]) * inv).astype(np.int64), 0, nx - 1)
    cy0 = np.clip(np.floor((bmin[:, 1] - lo[1]) * inv).astype(np.int64), 0, ny - 1)
    cy1 = np.clip(np.floor((bmax[:, 1] - lo[1]) * inv).astype(np.int64), 0, ny - 1)
    counts = (cx1 - cx0 + 1) * (cy1 - cy0 + 1)
    total = int(counts.sum())
    elem_rep = np.repeat(np.arange(tri_xy.shape[0], dtype=np.int64), counts)
    csum = np.cumsum(counts)
    within = np.arange(total) - np.repeat(csum - counts, counts)
    wx = (cx1 - cx0 + 1)[elem_rep]
    cellx = cx0[elem_rep] + within % wx
    celly = cy0[elem_rep] + within // wx
    cells = celly * nx + cellx
    order = np.argsort(cells, kind="stable")
    cells = cells[order]
    items = elem_rep[order]
    ptr = np.zeros(nx * ny + 1, np.int64)
    np.add.at(ptr, cells + 1, 1)
    np.cumsum(ptr, out=ptr)
    return ptr, items, float(lo[0]), float(lo[1]), inv, nx, ny


# radial gap over tangential spacing; flat strips keep the corner
# diagonals hypot(gap + t/2, sqrt(3)/2 t) inside the diameter cap
_STRIP_ASPECT = 0.45


def _ring_plan(r_fine, r_out, k0, gamma, grow):
    """Ring ladder: radii plus tangential spacing targets per ring.

    Both scales grow geometrically by `grow` per ring, capped by the
    grading rule h(r) = (r/K0)^gamma; radial gaps keep a fixed aspect to
    the tangential spacing so strip triangles stay near-equilateral. The
    ladder is rescaled to land exactly on r_out. The caller retries with
    a gentler `grow` if the built mesh violates the diameter cap.
    """
    span = float(r_out - r_fine)
    if span <= 0:
        return np.array([float(r_fine)]), np.zeros(1)
    gaps = []
    tang = []
    r = float(r_fine)
    t = 1.0
    while r < r_out - 1e-9:
        h = (max(r, k0) / k0) ** gamma
        t = max(1.0, min(t * grow, h))
        g = min(_STRIP_ASPECT * t, h)
        tang.append(t)
        gaps.append(g)
        r += g
    f = span / sum(gaps)
    gaps = np.asarray(gaps) * f
    radii = np.concatenate([[r_fine], r_fine + np.cumsum(gaps)])
    return radii, np.asarray(tang)


def _ring_nodes(radius, m):
    """6*m node positions of the hexagonal ring, CCW from corner (r, 0)."""
    pts = []
    for k in range(6):
        a = radius * _CORNER_XY[k]
        b = radius * _CORNER_XY[(k + 1) % 6]
        for j in range(m):
            t = j / m
            pts.append((1 - t) * a + t * b)
    return np.array(pts)


def _strip_elements(inner_ids, outer_ids):
    """Conforming two-pointer triangulation of one hexagonal annulus strip.

    Advancing by edge-parameter fraction keeps diagonals near-radial and
    distributes the coarsening fans evenly along each hexagon edge.
    """
    tris = []
    n_in = len(inner_ids)
    n_out = len(outer_ids)
    m_in = n_in // 6
    m_out = n_out // 6
    for k in range(6):
        # closed sector polylines, sharing the ring corners
        a = [inner_ids[(k * m_in + j) % n_in] for j in range(m_in + 1)]
        b = [outer_ids[(k * m_out + j) % n_out] for j in range(m_out + 1)]
        i = j = 0
        while i < len(a) - 1 or j < len(b) - 1:
            if i == len(a) - 1:
                adv_inner = False
            elif j == len(b) - 1:
                adv_inner = True
            else:
                adv_inner = (i + 1) * m_out <= (j + 1) * m_in
            if adv_inner:
                tris.append((a[i], b[j], a[i + 1]))
                i += 1
            else:
                tris.append((b[j], b[j + 1], a[i]))
                j += 1
    return tris


def micro_mesh(domain):
    """Fully refined mesh: unit triangles over the whole hexagon side N+1."""
    return _assemble_mesh(domain, domain.N + 1,
                          np.array([float(domain.N + 1)]), 1.5, np.zeros(1))


def build_graded_mesh(domain, regions, plan, growth_cap=1.5):
    """Graded mesh: unit triangles on the blend support plus buffer, then
    radially coarsened hexagonal rings out to the domain boundary.

    The per-ring growth target starts below the cap (element diameters
    grow faster than ring gaps because of diagonals) and backs off until
    the built mesh satisfies the adjacent-diameter bound.
    """
    if growth_cap <= 1.0:
        raise ConstructionError("growth cap must exceed 1")
    keep = (regions.labels >= 0) & (regions.labels != LABEL_CONTINUUM)
    keep |= domain.is_defect
    if not keep.any():
        raise ConstructionError("no atomistic or blend sites: nothing to mesh")
    r_fine = int(domain.hexn[keep].max()) + MESH_BUFFER_LAYERS
    r_out = domain.N + 1
    r_fine = min(r_fine, r_out)
    grow = 1.0 + 0.32 * (growth_cap - 1.0)
    for _ in range(30):
        radii, tang = _ring_plan(r_fine, r_out, plan.K0, plan.mesh_exponent,
                                 grow)
        mesh = _assemble_mesh(domain, r_fine, radii, growth_cap, tang)
        if adjacent_diameter_ratio(mesh) <= growth_cap * (1 + 1e-9):
            return mesh
        grow = 1.0 + 0.85 * (grow - 1.0)
    raise MeshError(
        f"graded mesh violates the growth cap {growth_cap} even at "
        f"growth target {grow:.4f}")


def _assemble_mesh(domain, r_fine, radii, growth_cap, tang):
    # refined core: every lattice point with hex-norm <= r_fine is a node
    core = np.nonzero(domain.hexn <= r_fine)[0]
    site_node = np.full(domain.n_points, -1, np.int64)
    site_node[core] = np.arange(core.size)
    node_xy = [domain.pos[core]]
    node_site = [core]
    tris_sites = _unit_triangles(domain, r_fine, exclude_defects=False)
    elements = [np.take(site_node, tris_sites)]
    n_nodes = core.size

    ring_ids = None
    if radii.size > 1:
        # lattice ring of the refined hexagon, CCW from corner (r_fine, 0)
        ring0_lat = []
        for k in range(6):
            c = r_fine * _CORNER_LAT[k]
            d = _CORNER_LAT[(k + 1) % 6] - _CORNER_LAT[k]
            for j in range(r_fine):
                ring0_lat.append(c + j * d)
        ring_ids = site_node[domain.lookup(np.array(ring0_lat))]
        if (ring_ids < 0).any():
            raise MeshError("refined-core boundary ring is incomplete")
        m_prev = r_fine
        for i in range(1, radii.size):
            r = radii[i]
            m = int(round(r / tang[i - 1]))
            m_lo = int(math.ceil(m_prev * r / (radii[i - 1] * growth_cap)))
            m = max(1, min(m_prev, max(m, m_lo)))
            xy = _ring_nodes(r, m)
            ids = n_nodes + np.arange(xy.shape[0])
            n_nodes += xy.shape[0]
            node_xy.append(xy)
            node_site.append(np.full(xy.shape[0], -1, np.int64))
            elements.append(np.array(_strip_elements(list(ring_ids),
                                                     list(ids))))
            ring_ids = ids
            m_prev = m

    node_xy = np.concatenate(node_xy)
    node_site = np.concatenate(node_site)
    elements = np.concatenate(elements).astype(np.int64)

    constrained = np.zeros(n_nodes, bool)
    if radii.size > 1:
        constrained[ring_ids] = True
    else:
        # pure micro mesh: the outermost lattice ring is the boundary
        constrained[site_node[domain.hexn == r_fine]] = True
    # removed-atom positions stay as passive geometry nodes
    constrained[site_node[np.clip(domain.defect_ids, 0, None)]] = True
    # lattice ids for coarse ring nodes that happen to sit on lattice sites
    loose = node_site < 0
    if loose.any():
        cand = domain.site_id_of_position(node_xy[loose])
        node_site[loose] = cand
        upd = np.nonzero(loose)[0][cand >= 0]
        site_node[cand[cand >= 0]] = upd

    mesh = Mesh(node_xy, node_site, elements, constrained, site_node,
                int(r_fine), float(growth_cap), radii)
    _validate_mesh(mesh, domain)
    return mesh


def _validate_mesh(mesh, domain):
    a = mesh.areas
    if (a <= 0).any():
        raise MeshError(f"{int((a <= 0).sum())} elements are not CCW/positive")
    # conformity: interior edges shared by exactly two elements
    e = mesh.elements
    edges = np.sort(np.concatenate([e[:, (0, 1)], e[:, (1, 2)], e[:, (2, 0)]]),
                    axis=1)
    uniq, counts = np.unique(edges, axis=0, return_counts=True)
    if (counts > 2).any():
        raise MeshError("non-conforming mesh: an edge is shared 3+ times")
    bnd = uniq[counts == 1]
    bnd_nodes = np.unique(bnd)
    if not mesh.constrained[bnd_nodes].all():
        raise MeshError("mesh boundary contains unconstrained nodes")
    # total area covers the closed hexagon of side N+1
    hex_area = 3.0 * math.sqrt(3.0) / 2.0 * (domain.N + 1) ** 2
    if abs(float(a.sum()) - hex_area) > 1e-9 * hex_area:
        raise MeshError(
            f"mesh area {a.sum():.12g} does not tile the hexagon {hex_area:.12g}")


def adjacent_diameter_ratio(mesh):
    """Max diameter ratio over element pairs sharing an edge."""
    e = mesh.elements
    edges = np.sort(np.concatenate([e[:, (0, 1)], e[:, (1, 2)], e[:, (2, 0)]]),
                    axis=1)
    owner = np.tile(np.arange(e.shape[0]), 3)
    order = np.lexsort((edges[:, 1], edges[:, 0]))
    edges = edges[order]
    owner = owner[order]
    same = (edges[:-1] == edges[1:]).all(axis=1)
    d = mesh.diameters
    da = d[owner[:-1][same]]
    db = d[owner[1:][same]]
    if da.size == 0:
        return 1.0
    return float(np.max(np.maximum(da, db) / np.minimum(da, db)))


def clip_convex(subject, clipper):
    """Intersection polygon of two convex CCW polygons (may be empty)."""
    poly = [tuple(map(float, p)) for p in np.asarray(subject, float)]
    clipper = np.asarray(clipper, float)
    m = clipper.shape[0]
    for j in range(m):
        ax, ay = clipper[j]
        bx, by = clipper[(j + 1) % m]
        ex, ey = bx - ax, by - ay
        out = []
        if not poly:
            break
        px, py = poly[-1]
        dp = ex * (py - ay) - ey * (px - ax)
        for qx, qy in poly:
            dq = ex * (qy - ay) - ey * (qx - ax)
            if dq >= 0.0:
                if dp < 0.0:
                    t = dp / (dp - dq)
                    out.append((px + t * (qx - px), py + t * (qy - py)))
                out.append((qx, qy))
            elif dp >= 0.0:
                t = dp / (dp - dq)
                out.append((px + t * (qx - px), py + t * (qy - py)))
            px, py, dp = qx, qy, dq
        poly = out
    return np.array(poly).reshape(-1, 2)


def polygon_area(poly):
    poly = np.asarray(poly, float)
    if poly.shape[0] < 3:
        return 0.0
    w = np.roll(poly, -1, axis=0)
    a = 0.5 * float(np.sum(poly[:, 0] * w[:, 1] - w[:, 0] * poly[:, 1]))
    return a if a > 1e-14 else 0.0


def _candidate_pairs(mesh, domain, site_ids):
    """(site, element) pairs whose Voronoi cell bbox meets the element bbox."""
    ptr, items, x0, y0, inv, nx, ny = mesh.grid()
    xy = domain.pos[site_ids]
    r = 1.0 / math.sqrt(3.0) + 1e-9
    pairs_s = []
    pairs_e = []
    cx0 = np.clip(np.floor((xy[:, 0] - r - x0) * inv).astype(np.int64), 0, nx - 1)
    cx1 = np.clip(np.floor((xy[:, 0] + r - x0) * inv).astype(np.int64), 0, nx - 1)
    cy0 = np.clip(np.floor((xy[:, 1] - r - y0) * inv).astype(np.int64), 0, ny - 1)
    cy1 = np.clip(np.floor((xy[:, 1] + r - y0) * inv).astype(np.int64), 0, ny - 1)
    for s in range(site_ids.size):
        seen = set()
        for cx in range(cx0[s], cx1[s] + 1):
            for cy in range(cy0[s], cy1[s] + 1):
                cell = cy * nx + cx
                for k in range(ptr[cell], ptr[cell + 1]):
                    seen.add(int(items[k]))
        for e in seen:
            pairs_s.append(s)
            pairs_e.append(e)
    return (np.asarray(pairs_s, np.int64), np.asarray(pairs_e, np.int64))


def effective_volumes(mesh, blend, domain):
    """Per-element v_T = sum over sites of beta(site) * |vor(site) ∩ T|.

    Sums run over the free (domain) sites only, matching the energy; the
    result is cached on the mesh and returned.
    """
    beta = blend.beta
    site_ids = domain.free_ids
    site_ids = site_ids[beta[site_ids] > 0.0]
    v = np.zeros(mesh.n_elements)
    if site_ids.size:
        ps, pe = _candidate_pairs(mesh, domain, site_ids)
        areas = kernels.clip_cell_areas(VORONOI_TEMPLATE, domain.pos[site_ids],
                                        np.ascontiguousarray(mesh.tri_xy),
                                        ps, pe)
        np.add.at(v, pe, beta[site_ids[ps]] * areas)
    mesh.v_eff = v
    return v


def locate(mesh, points):
    """Element id and barycentric coordinates per query point (-1 outside)."""
    ptr, items, x0, y0, inv, nx, ny = mesh.grid()
    pts = np.ascontiguousarray(np.atleast_2d(points), float)
    return kernels.locate_points(pts, np.ascontiguousarray(mesh.tri_xy),
                                 ptr, items, x0, y0, inv, nx, ny)


def p1_evaluate(mesh, nodal, points):
    """Evaluate a P1 nodal field at arbitrary points inside the mesh."""
    nodal = np.asarray(nodal, float)
    pts = np.atleast_2d(np.asarray(points, float))
    elem, bary = locate(mesh, pts)
    if (elem < 0).any():
        k = int(np.argmax(elem < 0))
        raise ConstructionError(
            f"point {pts[k]} lies outside the triangulation")
    vals = np.einsum("qv,qv...->q...", bary, nodal[mesh.elements[elem]])
    return vals if np.asarray(points).ndim > 1 else vals[0]


def interpolate_to_lattice(mesh, nodal, domain):
    """Nodal P1 field sampled at every free lattice site.

    Sites that are mesh nodes take their nodal values exactly; the rest
    are barycentrically interpolated.
    """
    nodal = np.asarray(nodal, float)
    free = domain.free_ids
    out_shape = (domain.n_points,) + nodal.shape[1:]
    out = np.zeros(out_shape)
    node = mesh.site_node[free]
    direct = node >= 0
    out[free[direct]] = nodal[node[direct]]
    rest = free[~direct]
    if rest.size:
        out[rest] = p1_evaluate(mesh, nodal, domain.pos[rest])
    return out


def count_dof(mesh):
    """Unconstrained mesh nodes (every beta < 1 site is such a node)."""
    return int((~mesh.constrained).sum())
