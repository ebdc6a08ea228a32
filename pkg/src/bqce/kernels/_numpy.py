"""Pure-numpy fallback implementations of the hot kernels.

Selected with BQCE_BACKEND=numpy (or when numba is missing). Same
signatures and semantics as the numba backend, vectorized where that is
practical; the polygon clipper falls back to plain Python loops.
"""

import numpy as np

STATUS_OK = 0
STATUS_COINCIDENT = 1


def _csr_expand(ptr, idx, rows):
    """Flattened CSR rows: returns (repeated row ids, column ids, counts)."""
    counts = ptr[rows + 1] - ptr[rows]
    total = int(counts.sum())
    if total == 0:
        e = np.empty(0, np.int64)
        return e, e, counts
    csum = np.cumsum(counts)
    within = np.arange(total) - np.repeat(csum - counts, counts)
    flat = np.repeat(ptr[rows], counts) + within
    return np.repeat(rows, counts), idx[flat], counts


def _phi(r, a):
    t = np.exp(-a * (r - 1.0))
    return t * t - 2.0 * t


def _dphi(r, a):
    t = np.exp(-a * (r - 1.0))
    return 2.0 * a * t * (1.0 - t)


def _ddphi(r, a):
    t = np.exp(-a * (r - 1.0))
    return 2.0 * a * a * t * (2.0 * t - 1.0)


def _bond_geometry(pos, rows, cols):
    d = pos[cols] - pos[rows]
    r = np.sqrt(d[:, 0] ** 2 + d[:, 1] ** 2)
    return d, r


def _first_zero(rows, cols, r):
    k = int(np.argmin(r))
    return int(rows[k]), int(cols[k])


def eam_energy(pos, active, w, pair_ptr, pair_idx, dens_ptr, dens_idx,
               a, b, c, rho0):
    prow, pcol, _ = _csr_expand(pair_ptr, pair_idx, active)
    _, rp = _bond_geometry(pos, prow, pcol)
    if rp.size and rp.min() == 0.0:
        xi, eta = _first_zero(prow, pcol, rp)
        return STATUS_COINCIDENT, xi, eta, 0.0
    epair = 0.5 * np.bincount(prow, weights=_phi(rp, a),
                              minlength=pos.shape[0])
    drow, dcol, _ = _csr_expand(dens_ptr, dens_idx, active)
    _, rd = _bond_geometry(pos, drow, dcol)
    if rd.size and rd.min() == 0.0:
        xi, eta = _first_zero(drow, dcol, rd)
        return STATUS_COINCIDENT, xi, eta, 0.0
    rho_bar = np.bincount(drow, weights=np.exp(-b * rd),
                          minlength=pos.shape[0])
    dd = rho_bar[active] - rho0
    site_e = epair[active] + c * (dd ** 2 + dd ** 4)
    return STATUS_OK, -1, -1, float(np.dot(w[active], site_e))


def eam_site_energies(pos, sites, pair_ptr, pair_idx, dens_ptr, dens_idx,
                      a, b, c, rho0):
    status, xi, eta, e = eam_energy(pos, sites, np.ones(pos.shape[0]),
                                    pair_ptr, pair_idx, dens_ptr, dens_idx,
                                    a, b, c, rho0)
    if status != STATUS_OK:
        return status, xi, eta, np.zeros(sites.size)
    prow, pcol, _ = _csr_expand(pair_ptr, pair_idx, sites)
    _, rp = _bond_geometry(pos, prow, pcol)
    epair = 0.5 * np.bincount(prow, weights=_phi(rp, a),
                              minlength=pos.shape[0])
    drow, dcol, _ = _csr_expand(dens_ptr, dens_idx, sites)
    _, rd = _bond_geometry(pos, drow, dcol)
    rho_bar = np.bincount(drow, weights=np.exp(-b * rd),
                          minlength=pos.shape[0])
    dd = rho_bar[sites] - rho0
    return STATUS_OK, -1, -1, epair[sites] + c * (dd ** 2 + dd ** 4)


def eam_energy_gradient(pos, active, w, pair_ptr, pair_idx, dens_ptr,
                        dens_idx, a, b, c, rho0):
    n = pos.shape[0]
    grad = np.zeros((n, 2))
    prow, pcol, _ = _csr_expand(pair_ptr, pair_idx, active)
    dp, rp = _bond_geometry(pos, prow, pcol)
    if rp.size and rp.min() == 0.0:
        xi, eta = _first_zero(prow, pcol, rp)
        return STATUS_COINCIDENT, xi, eta, 0.0, grad
    wrow = w[prow]
    energy = float(np.dot(wrow, 0.5 * _phi(rp, a)))
    coef = wrow * 0.5 * _dphi(rp, a) / rp
    np.add.at(grad, pcol, coef[:, None] * dp)
    np.add.at(grad, prow, -coef[:, None] * dp)

    drow, dcol, _ = _csr_expand(dens_ptr, dens_idx, active)
    dd_, rd = _bond_geometry(pos, drow, dcol)
    if rd.size and rd.min() == 0.0:
        xi, eta = _first_zero(drow, dcol, rd)
        return STATUS_COINCIDENT, xi, eta, 0.0, grad
    rho = np.exp(-b * rd)
    rho_bar = np.bincount(drow, weights=rho, minlength=n)
    dev = rho_bar - rho0
    energy += float(np.dot(w[active], c * (dev[active] ** 2 + dev[active] ** 4)))
    gprime = w * c * (2.0 * dev + 4.0 * dev ** 3)
    coef = gprime[drow] * (-b * rho) / rd
    np.add.at(grad, dcol, coef[:, None] * dd_)
    np.add.at(grad, drow, -coef[:, None] * dd_)
    return STATUS_OK, -1, -1, energy, grad


def _bond_blocks(d, r, fp, fpp):
    """2x2 bond Hessian entries (m00, m01, m11) per bond."""
    u0 = d[:, 0] / r
    u1 = d[:, 1] / r
    m00 = fpp * u0 * u0 + fp / r * (1.0 - u0 * u0)
    m01 = fpp * u0 * u1 - fp / r * u0 * u1
    m11 = fpp * u1 * u1 + fp / r * (1.0 - u1 * u1)
    return m00, m01, m11


def _emit_bond_triplets(prow, pcol, m00, m01, m11):
    """Triplets for +M at (xi,xi),(eta,eta) and -M at (xi,eta),(eta,xi)."""
    nb = prow.size
    rows = np.empty(16 * nb, np.int64)
    cols = np.empty(16 * nb, np.int64)
    vals = np.empty(16 * nb)
    k = 0
    for p, q, sgn in ((prow, prow, 1.0), (pcol, pcol, 1.0),
                      (prow, pcol, -1.0), (pcol, prow, -1.0)):
        for ci, cj, mv in ((0, 0, m00), (0, 1, m01), (1, 0, m01), (1, 1, m11)):
            rows[k:k + nb] = 2 * p + ci
            cols[k:k + nb] = 2 * q + cj
            vals[k:k + nb] = sgn * mv
            k += nb
    return rows, cols, vals


def eam_hessian_triplets(pos, active, w, pair_ptr, pair_idx, dens_ptr,
                         dens_idx, a, b, c, rho0):
    n = pos.shape[0]
    prow, pcol, _ = _csr_expand(pair_ptr, pair_idx, active)
    dp, rp = _bond_geometry(pos, prow, pcol)
    e = np.empty(0, np.int64)
    if rp.size and rp.min() == 0.0:
        xi, eta = _first_zero(prow, pcol, rp)
        return STATUS_COINCIDENT, xi, eta, e, e, np.empty(0)
    o = 0.5 * w[prow]
    m00, m01, m11 = _bond_blocks(dp, rp, o * _dphi(rp, a), o * _ddphi(rp, a))
    r1, c1, v1 = _emit_bond_triplets(prow, pcol, m00, m01, m11)

    drow, dcol, counts = _csr_expand(dens_ptr, dens_idx, active)
    dd_, rd = _bond_geometry(pos, drow, dcol)
    if rd.size and rd.min() == 0.0:
        xi, eta = _first_zero(drow, dcol, rd)
        return STATUS_COINCIDENT, xi, eta, e, e, np.empty(0)
    rho = np.exp(-b * rd)
    drho = -b * rho
    ddrho = b * b * rho
    rho_bar = np.bincount(drow, weights=rho, minlength=n)
    dev = rho_bar - rho0
    gprime = c * (2.0 * dev + 4.0 * dev ** 3)
    gsecond = c * (2.0 + 12.0 * dev ** 2)
    ow = w[drow] * gprime[drow]
    m00, m01, m11 = _bond_blocks(dd_, rd, ow * drho, ow * ddrho)
    r2, c2, v2 = _emit_bond_triplets(drow, dcol, m00, m01, m11)

    # embedding outer-product term: per active site, the (d+1)x(d+1) block
    # grid over [site] + density neighbors with vectors s
    svec = (drho / rd)[:, None] * dd_
    sums = np.zeros((n, 2))
    np.add.at(sums, drow, svec)
    # entry list per site: self entry first, then its neighbors
    msz = counts + 1
    ent_site = np.repeat(active, msz)
    total = int(msz.sum())
    csum = np.cumsum(msz)
    within = np.arange(total) - np.repeat(csum - msz, msz)
    ent_id = np.empty(total, np.int64)
    ent_s = np.empty((total, 2))
    self_pos = csum - msz
    ent_id[self_pos] = active
    ent_s[self_pos] = -sums[active]
    nb_mask = np.ones(total, bool)
    nb_mask[self_pos] = False
    ent_id[nb_mask] = dcol
    ent_s[nb_mask] = svec
    # cartesian pairs within each site's entry run
    p2 = msz * msz
    tot2 = int(p2.sum())
    csum2 = np.cumsum(p2)
    within2 = np.arange(tot2) - np.repeat(csum2 - p2, p2)
    mrep = np.repeat(msz, p2)
    base = np.repeat(self_pos, p2)
    ia = base + within2 // mrep
    ib = base + within2 % mrep
    og = np.repeat(w[active] * gsecond[active], p2)
    rows3 = np.empty(4 * tot2, np.int64)
    cols3 = np.empty(4 * tot2, np.int64)
    vals3 = np.empty(4 * tot2)
    k = 0
    for ci in range(2):
        for cj in range(2):
            rows3[k:k + tot2] = 2 * ent_id[ia] + ci
            cols3[k:k + tot2] = 2 * ent_id[ib] + cj
            vals3[k:k + tot2] = og * ent_s[ia, ci] * ent_s[ib, cj]
            k += tot2
    rows = np.concatenate([r1, r2, rows3])
    cols = np.concatenate([c1, c2, cols3])
    vals = np.concatenate([v1, v2, vals3])
    return STATUS_OK, -1, -1, rows, cols, vals


def bfs_hops(n_points, ptr, idx, sources):
    dist = np.full(n_points, -1, np.int32)
    frontier = np.unique(np.asarray(sources, np.int64))
    dist[frontier] = 0
    d = 0
    while frontier.size:
        d += 1
        _, nbr, _ = _csr_expand(ptr, idx, frontier)
        nbr = np.unique(nbr[dist[nbr] < 0])
        dist[nbr] = d
        frontier = nbr
    return dist


def _clip_poly_halfplane(poly, ax, ay, ex, ey):
    out = []
    if not poly:
        return out
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
    return out


def clip_cell_areas(template, site_xy, tri_xy, pair_site, pair_elem):
    n = pair_site.size
    areas = np.zeros(n)
    tmpl = [(float(x), float(y)) for x, y in template]
    for p in range(n):
        s = pair_site[p]
        e = pair_elem[p]
        cx = site_xy[s, 0]
        cy = site_xy[s, 1]
        poly = [(x + cx, y + cy) for x, y in tmpl]
        for j in range(3):
            ax = tri_xy[e, j, 0]
            ay = tri_xy[e, j, 1]
            jn = (j + 1) % 3
            poly = _clip_poly_halfplane(poly, ax, ay,
                                        tri_xy[e, jn, 0] - ax,
                                        tri_xy[e, jn, 1] - ay)
            if not poly:
                break
        if len(poly) >= 3:
            s2 = 0.0
            for i in range(len(poly)):
                x0_, y0_ = poly[i]
                x1_, y1_ = poly[(i + 1) % len(poly)]
                s2 += x0_ * y1_ - x1_ * y0_
            area = 0.5 * s2
            if area > 1e-14:
                areas[p] = area
    return areas


def locate_points(query, tri_xy, grid_ptr, grid_items, x0, y0, inv_h, nx, ny):
    nq = query.shape[0]
    elem = np.full(nq, -1, np.int64)
    bary = np.zeros((nq, 3))
    tol = 1e-9
    cx = np.clip(np.floor((query[:, 0] - x0) * inv_h).astype(np.int64), 0, nx - 1)
    cy = np.clip(np.floor((query[:, 1] - y0) * inv_h).astype(np.int64), 0, ny - 1)
    cells = cy * nx + cx
    p0 = tri_xy[:, 0]
    v0 = tri_xy[:, 1] - p0
    v1 = tri_xy[:, 2] - p0
    det = v0[:, 0] * v1[:, 1] - v0[:, 1] * v1[:, 0]
    for q in range(nq):
        cand = grid_items[grid_ptr[cells[q]]:grid_ptr[cells[q] + 1]]
        if cand.size == 0:
            continue
        w = query[q] - p0[cand]
        d = det[cand]
        l1 = (w[:, 0] * v1[cand, 1] - w[:, 1] * v1[cand, 0]) / d
        l2 = (v0[cand, 0] * w[:, 1] - v0[cand, 1] * w[:, 0]) / d
        l0 = 1.0 - l1 - l2
        lmin = np.minimum(l0, np.minimum(l1, l2))
        lmin[d <= 0] = -np.inf
        k = int(np.argmax(lmin))
        if lmin[k] >= -tol:
            elem[q] = cand[k]
            bary[q] = (l0[k], l1[k], l2[k])
    return elem, bary
