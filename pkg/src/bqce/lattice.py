"""Triangular reference lattice and hexagonal computational domains.

Sites are points A @ n for integer pairs n, with A the triangular
generator [[1, 1/2], [0, sqrt(3)/2]]. The domain is the hexagon of
hex-norm <= N around the origin; a constrained exterior halo (every
lattice site within the pair cutoff of the domain) is kept so boundary
atoms see full neighbor lists. Neighbor shells, hopping distances,
Voronoi cells and the unit micro-triangulation all live here.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConstructionError
from .kernels import bfs_hops

SQRT3 = math.sqrt(3.0)
GENERATOR = np.array([[1.0, 0.5], [0.0, SQRT3 / 2.0]])
GENERATOR_INV = np.array([[1.0, -1.0 / SQRT3], [0.0, 2.0 / SQRT3]])

# neighbor shells of the perfect lattice in lattice coordinates
SHELL_OFFSETS = (
    np.array([(1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1)], np.int64),
    np.array([(1, 1), (2, -1), (-1, 2), (-1, -1), (-2, 1), (1, -2)], np.int64),
    np.array([(2, 0), (0, 2), (-2, 2), (-2, 0), (0, -2), (2, -2)], np.int64),
)
SHELL_RADII = (1.0, SQRT3, 2.0)

VORONOI_AREA = SQRT3 / 2.0
# regular hexagon cell: circumradius 1/sqrt(3), vertices at 30 + 60k degrees
VORONOI_TEMPLATE = (1.0 / SQRT3) * np.array(
    [(math.cos(th), math.sin(th))
     for th in (math.pi / 6 + k * math.pi / 3 for k in range(6))]
)

DEFECT_SITES = {
    "none": np.zeros((0, 2), np.int64),
    "microcrack11": np.array([(k, 0) for k in range(-5, 6)], np.int64),
    "divacancy": np.array([(0, 0), (1, 0)], np.int64),
}


def hex_norm(lat):
    """Hexagonal layer index of lattice coordinates (max-norm analogue)."""
    lat = np.asarray(lat)
    return np.maximum(np.abs(lat[..., 0]),
                      np.maximum(np.abs(lat[..., 1]),
                                 np.abs(lat[..., 0] + lat[..., 1])))


def lattice_positions(lat):
    return np.asarray(lat, float) @ GENERATOR.T


def _offsets_within(cutoff):
    """All nonzero lattice offsets with Euclidean length <= cutoff."""
    m = int(math.ceil(cutoff / (SQRT3 / 2.0))) + 1
    r = np.arange(-m, m + 1)
    n1, n2 = np.meshgrid(r, r, indexing="ij")
    off = np.stack([n1.ravel(), n2.ravel()], axis=1)
    d = np.linalg.norm(lattice_positions(off), axis=1)
    keep = (d > 0) & (d <= cutoff + 1e-12)
    return off[keep]


@dataclass
class LatticeDomain:
    """Hexagonal domain of side N with defects removed and halo retained.

    Arrays cover every generated lattice point (domain + halo + defect
    positions); boolean masks partition them. `free` sites carry energy
    and unknowns, `halo` sites are Dirichlet-constrained, `defect` sites
    are removed atoms kept only as geometric reference points.
    """

    N: int
    defect: str
    lat: np.ndarray
    pos: np.ndarray
    hexn: np.ndarray
    is_defect: np.ndarray
    is_halo: np.ndarray
    _key_sorted: np.ndarray = field(repr=False)
    _key_order: np.ndarray = field(repr=False)
    _key_off: int = field(repr=False)
    _key_stride: int = field(repr=False)
    _graph_ptr: np.ndarray = field(repr=False)
    _graph_idx: np.ndarray = field(repr=False)

    @property
    def n_points(self):
        return self.lat.shape[0]

    @property
    def free(self):
        return (self.hexn <= self.N) & ~self.is_defect

    @property
    def is_guard(self):
        """Clamped exterior band beyond the halo (position providers only)."""
        return (self.hexn > self.N) & ~self.is_halo

    @property
    def free_ids(self):
        return np.nonzero(self.free)[0]

    @property
    def halo_ids(self):
        return np.nonzero(self.is_halo)[0]

    @property
    def defect_ids(self):
        return np.nonzero(self.is_defect)[0]

    @property
    def boundary_sites(self):
        """Outermost hexagonal layer plus the constrained halo."""
        return np.nonzero((self.hexn == self.N) & ~self.is_defect
                          | self.is_halo)[0]

    def lookup(self, lat):
        """Map lattice coordinates to point ids (-1 where absent)."""
        lat = np.asarray(lat, np.int64)
        flat = lat.reshape(-1, 2)
        key = (flat[:, 0] + self._key_off) * self._key_stride \
            + (flat[:, 1] + self._key_off)
        j = np.searchsorted(self._key_sorted, key)
        j = np.clip(j, 0, self._key_sorted.size - 1)
        ids = np.where(self._key_sorted[j] == key, self._key_order[j], -1)
        oob = (np.abs(flat) > self._key_off).any(axis=1)
        ids[oob] = -1
        return ids.reshape(lat.shape[:-1])

    def site_id_of_position(self, xy, tol=1e-9):
        """Point id of an (exact) lattice position, or -1."""
        n = np.rint(np.asarray(xy, float) @ GENERATOR_INV.T).astype(np.int64)
        ids = self.lookup(n)
        ok = np.linalg.norm(lattice_positions(n) - xy, axis=-1) < tol
        return np.where(ok, ids, -1)


def generate_domain(N, defect="none", halo_cutoff=2.5):
    """Build the hexagonal domain of side N with the given defect removed.

    Beyond the halo a second band of clamped guard sites is kept so that
    every halo site also has full neighbor lists: halo site energies
    enter the minimization functionals (as differences from the
    homogeneous state) and need complete shells for uniform strain to be
    an exact equilibrium.
    """
    if N < 1:
        raise ConstructionError(f"domain side must be >= 1, got {N}")
    if defect not in DEFECT_SITES:
        raise ConstructionError(f"unknown defect kind {defect!r}")
    dsites = DEFECT_SITES[defect]
    if dsites.size and N < 8:
        raise ConstructionError(
            f"defect {defect!r} requires N >= 8 so it stays interior, got {N}")

    margin = 2 * int(math.ceil(halo_cutoff / (SQRT3 / 2.0)))
    r = np.arange(-(N + margin), N + margin + 1)
    n1, n2 = np.meshgrid(r, r, indexing="ij")
    lat = np.stack([n1.ravel(), n2.ravel()], axis=1)
    lat = lat[hex_norm(lat) <= N + margin]

    off = N + margin + 2
    stride = 2 * off + 1
    key = (lat[:, 0] + off) * stride + (lat[:, 1] + off)
    order = np.argsort(key)
    key_sorted = key[order]

    def lookup(nm):
        flat = nm.reshape(-1, 2)
        k = (flat[:, 0] + off) * stride + (flat[:, 1] + off)
        j = np.clip(np.searchsorted(key_sorted, k), 0, key_sorted.size - 1)
        ids = np.where(key_sorted[j] == k, order[j], -1)
        oob = (np.abs(flat) > off).any(axis=1)
        ids[oob] = -1
        return ids.reshape(nm.shape[:-1])

    hexn = hex_norm(lat)
    # halo: exterior points within halo_cutoff of some domain point; on the
    # lattice that means one of the within-cutoff offsets lands at
    # hex-norm <= N
    cut_offs = _offsets_within(halo_cutoff)
    exterior = hexn > N
    nbr_ids = lookup(lat[:, None, :] + cut_offs[None, :, :])
    valid = nbr_ids >= 0
    nbr_hex = np.where(valid, hexn[np.clip(nbr_ids, 0, None)], N + margin + 1)
    is_halo = exterior & (nbr_hex <= N).any(axis=1)

    is_defect = np.zeros(lat.shape[0], bool)
    if dsites.size:
        dom = LatticeDomain(N, defect, lat, lattice_positions(lat), hexn,
                            is_defect, is_halo, key_sorted, order, off,
                            stride, np.zeros(1, np.int64),
                            np.zeros(0, np.int64))
        ids = dom.lookup(dsites)
        if (ids < 0).any() or (hexn[ids] >= N).any():
            raise ConstructionError(
                f"defect {defect!r} is not interior to the N={N} domain")
        is_defect[ids] = True

    domain = LatticeDomain(N, defect, lat, lattice_positions(lat), hexn,
                           is_defect, is_halo, key_sorted, order, off, stride,
                           np.zeros(1, np.int64), np.zeros(0, np.int64))
    # first-neighbor graph of the perfect lattice (defect sites included)
    # backs the hopping distance
    gptr, gidx = _shell_csr(domain, (SHELL_OFFSETS[0],), defect_aware=False)
    domain._graph_ptr = gptr
    domain._graph_idx = gidx
    return domain


def _shell_csr(domain, offset_groups, defect_aware=True):
    """CSR adjacency over the given offset groups, in group order per row."""
    n = domain.n_points
    cols_per_group = []
    for offs in offset_groups:
        ids = domain.lookup(domain.lat[:, None, :] + offs[None, :, :])
        if defect_aware:
            invalid = ids < 0
            tmp = np.clip(ids, 0, None)
            invalid |= domain.is_defect[tmp]
            ids = np.where(invalid, -1, ids)
            ids[domain.is_defect] = -1
        cols_per_group.append(ids)
    allc = np.concatenate(cols_per_group, axis=1)
    valid = allc >= 0
    counts = valid.sum(axis=1)
    ptr = np.zeros(n + 1, np.int64)
    np.cumsum(counts, out=ptr[1:])
    idx = allc[valid].astype(np.int64)
    return ptr, idx


@dataclass
class NeighborTable:
    """Reference-configuration neighbor lists split by shell and by cutoff.

    `pair_*` spans every shell within the pair cutoff (2.5: shells at
    1, sqrt(3), 2); `dens_*` spans the density cutoff (1.8: first two
    shells). Lists are built once from reference positions and never
    updated; defect sites appear in no list.
    """

    r_cut_density: float
    r_cut_pair: float
    shell_ptr: tuple
    shell_idx: tuple
    pair_ptr: np.ndarray
    pair_idx: np.ndarray
    dens_ptr: np.ndarray
    dens_idx: np.ndarray

    def shell_counts(self, site):
        return tuple(int(p[site + 1] - p[site]) for p in self.shell_ptr)

    def neighbors(self, site):
        return self.pair_idx[self.pair_ptr[site]:self.pair_ptr[site + 1]]


def neighbor_shells(domain, r_cut_density=1.8, r_cut_pair=2.5):
    """Shell-partitioned neighbor table from reference positions."""
    groups = [offs for offs, rad in zip(SHELL_OFFSETS, SHELL_RADII)
              if rad <= r_cut_pair + 1e-12]
    shell_ptr = []
    shell_idx = []
    for offs in groups:
        p, i = _shell_csr(domain, (offs,))
        shell_ptr.append(p)
        shell_idx.append(i)
    dens_groups = tuple(offs for offs, rad in zip(SHELL_OFFSETS, SHELL_RADII)
                        if rad <= r_cut_density + 1e-12)
    pair_ptr, pair_idx = _shell_csr(domain, tuple(groups))
    dens_ptr, dens_idx = _shell_csr(domain, dens_groups)
    return NeighborTable(r_cut_density, r_cut_pair, tuple(shell_ptr),
                         tuple(shell_idx), pair_ptr, pair_idx,
                         dens_ptr, dens_idx)


def hopping_distance(domain, source_ids):
    """Graph distance over first-neighbor bonds of the perfect lattice.

    Defect sites count as graph vertices, so distances measure layers
    around a defect. Returns one nonnegative integer per point; 0 on the
    source set.
    """
    source_ids = np.asarray(source_ids, np.int64).ravel()
    if source_ids.size == 0:
        raise ConstructionError("hopping distance needs a nonempty source set")
    if (source_ids < 0).any() or (source_ids >= domain.n_points).any():
        raise ConstructionError("hopping source contains unknown site ids")
    return bfs_hops(domain.n_points, domain._graph_ptr, domain._graph_idx,
                    source_ids)


@dataclass
class VoronoiCell:
    """Voronoi cell of a lattice site: a regular hexagon of area sqrt(3)/2."""

    site: int
    center: np.ndarray
    vertices: np.ndarray  # counterclockwise, not repeated

    @property
    def closed_vertices(self):
        return np.vstack([self.vertices, self.vertices[:1]])

    @property
    def area(self):
        v = self.vertices
        w = np.roll(v, -1, axis=0)
        return 0.5 * float(np.sum(v[:, 0] * w[:, 1] - w[:, 0] * v[:, 1]))


def voronoi_cell(domain, site):
    """Voronoi cell of the site with the given point id."""
    center = domain.pos[site]
    return VoronoiCell(int(site), center, VORONOI_TEMPLATE + center)


def _unit_triangles(domain, max_hex, exclude_defects=True):
    """All unit lattice triangles with vertices of hex-norm <= max_hex."""
    # anchor points range one layer wider: a down triangle's anchor is not
    # one of its vertices
    base = domain.lat[(domain.hexn <= max_hex + 1)]
    e1 = np.array([1, 0], np.int64)
    e2 = np.array([0, 1], np.int64)
    up = np.stack([base, base + e1, base + e2], axis=1)
    down = np.stack([base + e1, base + e1 + e2, base + e2], axis=1)
    tris = np.concatenate([up, down], axis=0)
    ids = domain.lookup(tris)
    ok = (ids >= 0).all(axis=1)
    ok &= (hex_norm(tris) <= max_hex).all(axis=1)
    if exclude_defects:
        ok &= ~domain.is_defect[np.clip(ids, 0, None)].any(axis=1)
    return ids[ok].astype(np.int64)


def micro_triangulation(domain):
    """Unit triangles on non-defect domain sites, counterclockwise."""
    return _unit_triangles(domain, domain.N, exclude_defects=True)


def dump_lattice(fh, ids, xy, elements=None, beta=None, v_eff=None):
    """Write the plain-text lattice/mesh dump format.

    `sites <count>` then `id x y` lines (15 significant digits), then
    `elements <count>` with `id i j k` triples (plus a v_eff column when
    given), then optionally `beta <count>` with `id beta` lines.
    """
    ids = np.asarray(ids)
    xy = np.asarray(xy, float)
    fh.write(f"sites {ids.size}\n")
    for i, (x, y) in zip(ids, xy):
        fh.write(f"{int(i)} {x:.15g} {y:.15g}\n")
    elements = np.zeros((0, 3), np.int64) if elements is None else elements
    fh.write(f"elements {len(elements)}\n")
    for t, tri in enumerate(elements):
        line = f"{t} {int(tri[0])} {int(tri[1])} {int(tri[2])}"
        if v_eff is not None:
            line += f" {v_eff[t]:.15g}"
        fh.write(line + "\n")
    if beta is not None:
        fh.write(f"beta {ids.size}\n")
        for i, bv in zip(ids, beta):
            fh.write(f"{int(i)} {bv:.15g}\n")
