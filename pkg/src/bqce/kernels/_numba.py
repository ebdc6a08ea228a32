"""Numba implementations of the hot kernels.

All kernels are exception-free: EAM evaluators return a status code plus
the offending site pair so the caller can raise a readable error. Loops
run in a fixed order so results are deterministic and bitwise
reproducible run to run.
"""

import numpy as np
from numba import njit

STATUS_OK = 0
STATUS_COINCIDENT = 1


@njit(cache=True)
def eam_energy(pos, active, w, pair_ptr, pair_idx, dens_ptr, dens_idx,
               a, b, c, rho0):
    """Weighted EAM energy sum(w[xi] * E_xi) over the active sites."""
    energy = 0.0
    for s in range(active.size):
        xi = active[s]
        wx = w[xi]
        x0 = pos[xi, 0]
        x1 = pos[xi, 1]
        epair = 0.0
        for k in range(pair_ptr[xi], pair_ptr[xi + 1]):
            eta = pair_idx[k]
            d0 = pos[eta, 0] - x0
            d1 = pos[eta, 1] - x1
            r = np.sqrt(d0 * d0 + d1 * d1)
            if r == 0.0:
                return STATUS_COINCIDENT, xi, eta, 0.0
            t = np.exp(-a * (r - 1.0))
            epair += 0.5 * (t * t - 2.0 * t)
        rho_bar = 0.0
        for k in range(dens_ptr[xi], dens_ptr[xi + 1]):
            eta = dens_idx[k]
            d0 = pos[eta, 0] - x0
            d1 = pos[eta, 1] - x1
            r = np.sqrt(d0 * d0 + d1 * d1)
            if r == 0.0:
                return STATUS_COINCIDENT, xi, eta, 0.0
            rho_bar += np.exp(-b * r)
        dd = rho_bar - rho0
        energy += wx * (epair + c * (dd * dd + dd * dd * dd * dd))
    return STATUS_OK, -1, -1, energy


@njit(cache=True)
def eam_site_energies(pos, sites, pair_ptr, pair_idx, dens_ptr, dens_idx,
                      a, b, c, rho0):
    """Per-site EAM energies for the given site ids (unweighted)."""
    out = np.zeros(sites.size)
    for s in range(sites.size):
        xi = sites[s]
        x0 = pos[xi, 0]
        x1 = pos[xi, 1]
        epair = 0.0
        for k in range(pair_ptr[xi], pair_ptr[xi + 1]):
            eta = pair_idx[k]
            d0 = pos[eta, 0] - x0
            d1 = pos[eta, 1] - x1
            r = np.sqrt(d0 * d0 + d1 * d1)
            if r == 0.0:
                return STATUS_COINCIDENT, xi, eta, out
            t = np.exp(-a * (r - 1.0))
            epair += 0.5 * (t * t - 2.0 * t)
        rho_bar = 0.0
        for k in range(dens_ptr[xi], dens_ptr[xi + 1]):
            eta = dens_idx[k]
            d0 = pos[eta, 0] - x0
            d1 = pos[eta, 1] - x1
            r = np.sqrt(d0 * d0 + d1 * d1)
            if r == 0.0:
                return STATUS_COINCIDENT, xi, eta, out
            rho_bar += np.exp(-b * r)
        dd = rho_bar - rho0
        out[s] = epair + c * (dd * dd + dd * dd * dd * dd)
    return STATUS_OK, -1, -1, out


@njit(cache=True)
def eam_energy_gradient(pos, active, w, pair_ptr, pair_idx, dens_ptr,
                        dens_idx, a, b, c, rho0):
    """Energy and its gradient w.r.t. every site position (full scatter).

    The gradient array covers all sites; the caller masks out constrained
    entries. Contributions of site xi's energy to neighbor positions are
    scattered symmetrically so no second pass is needed.
    """
    n = pos.shape[0]
    grad = np.zeros((n, 2))
    energy = 0.0
    for s in range(active.size):
        xi = active[s]
        wx = w[xi]
        x0 = pos[xi, 0]
        x1 = pos[xi, 1]
        for k in range(pair_ptr[xi], pair_ptr[xi + 1]):
            eta = pair_idx[k]
            d0 = pos[eta, 0] - x0
            d1 = pos[eta, 1] - x1
            r = np.sqrt(d0 * d0 + d1 * d1)
            if r == 0.0:
                return STATUS_COINCIDENT, xi, eta, 0.0, grad
            t = np.exp(-a * (r - 1.0))
            energy += wx * 0.5 * (t * t - 2.0 * t)
            dphi = 2.0 * a * t * (1.0 - t)
            coef = wx * 0.5 * dphi / r
            grad[eta, 0] += coef * d0
            grad[eta, 1] += coef * d1
            grad[xi, 0] -= coef * d0
            grad[xi, 1] -= coef * d1
        rho_bar = 0.0
        for k in range(dens_ptr[xi], dens_ptr[xi + 1]):
            eta = dens_idx[k]
            d0 = pos[eta, 0] - x0
            d1 = pos[eta, 1] - x1
            r = np.sqrt(d0 * d0 + d1 * d1)
            if r == 0.0:
                return STATUS_COINCIDENT, xi, eta, 0.0, grad
            rho_bar += np.exp(-b * r)
        dd = rho_bar - rho0
        energy += wx * c * (dd * dd + dd * dd * dd * dd)
        gprime = wx * c * (2.0 * dd + 4.0 * dd * dd * dd)
        for k in range(dens_ptr[xi], dens_ptr[xi + 1]):
            eta = dens_idx[k]
            d0 = pos[eta, 0] - x0
            d1 = pos[eta, 1] - x1
            r = np.sqrt(d0 * d0 + d1 * d1)
            rho = np.exp(-b * r)
            coef = gprime * (-b * rho) / r
            grad[eta, 0] += coef * d0
            grad[eta, 1] += coef * d1
            grad[xi, 0] -= coef * d0
            grad[xi, 1] -= coef * d1
    return STATUS_OK, -1, -1, energy, grad


@njit(cache=True)
def eam_hessian_triplets(pos, active, w, pair_ptr, pair_idx, dens_ptr,
                         dens_idx, a, b, c, rho0):
    """Second derivative of the weighted energy as COO triplets.

    Row/col indices are 2*site + component. The caller is responsible for
    chunking `active` to bound the triplet buffer, summing duplicates and
    eliminating constrained dofs.
    """
    # worst case per site: 16 entries per pair neighbor, 16 per density
    # neighbor, 4*(d+1)^2 for the embedding outer product
    cap = 0
    for s in range(active.size):
        xi = active[s]
        pd = pair_ptr[xi + 1] - pair_ptr[xi]
        dd_ = dens_ptr[xi + 1] - dens_ptr[xi]
        cap += 16 * pd + 16 * dd_ + 4 * (dd_ + 1) * (dd_ + 1)
    rows = np.empty(cap, np.int64)
    cols = np.empty(cap, np.int64)
    vals = np.empty(cap)
    m = 0
    svec = np.empty((32, 2))
    sidx = np.empty(32, np.int64)
    for s in range(active.size):
        xi = active[s]
        wx = w[xi]
        x0 = pos[xi, 0]
        x1 = pos[xi, 1]
        for k in range(pair_ptr[xi], pair_ptr[xi + 1]):
            eta = pair_idx[k]
            d0 = pos[eta, 0] - x0
            d1 = pos[eta, 1] - x1
            r2 = d0 * d0 + d1 * d1
            r = np.sqrt(r2)
            if r == 0.0:
                return STATUS_COINCIDENT, xi, eta, rows[:0], cols[:0], vals[:0]
            u0 = d0 / r
            u1 = d1 / r
            t = np.exp(-a * (r - 1.0))
            dphi = 2.0 * a * t * (1.0 - t)
            ddphi = 2.0 * a * a * t * (2.0 * t - 1.0)
            o = wx * 0.5
            m00 = o * (ddphi * u0 * u0 + dphi / r * (1.0 - u0 * u0))
            m01 = o * (ddphi * u0 * u1 + dphi / r * (-u0 * u1))
            m11 = o * (ddphi * u1 * u1 + dphi / r * (1.0 - u1 * u1))
            m = _emit_bond(rows, cols, vals, m, xi, eta, m00, m01, m11)
        nd = 0
        rho_bar = 0.0
        sx0 = 0.0
        sx1 = 0.0
        for k in range(dens_ptr[xi], dens_ptr[xi + 1]):
            eta = dens_idx[k]
            d0 = pos[eta, 0] - x0
            d1 = pos[eta, 1] - x1
            r = np.sqrt(d0 * d0 + d1 * d1)
            if r == 0.0:
                return STATUS_COINCIDENT, xi, eta, rows[:0], cols[:0], vals[:0]
            rho = np.exp(-b * r)
            rho_bar += rho
            drho = -b * rho
            g0 = drho * d0 / r
            g1 = drho * d1 / r
            svec[nd + 1, 0] = g0
            svec[nd + 1, 1] = g1
            sidx[nd + 1] = eta
            sx0 -= g0
            sx1 -= g1
            nd += 1
        svec[0, 0] = sx0
        svec[0, 1] = sx1
        sidx[0] = xi
        dd = rho_bar - rho0
        gprime = c * (2.0 * dd + 4.0 * dd * dd * dd)
        gsecond = c * (2.0 + 12.0 * dd * dd)
        for k in range(dens_ptr[xi], dens_ptr[xi + 1]):
            eta = dens_idx[k]
            d0 = pos[eta, 0] - x0
            d1 = pos[eta, 1] - x1
            r = np.sqrt(d0 * d0 + d1 * d1)
            u0 = d0 / r
            u1 = d1 / r
            rho = np.exp(-b * r)
            drho = -b * rho
            ddrho = b * b * rho
            o = wx * gprime
            m00 = o * (ddrho * u0 * u0 + drho / r * (1.0 - u0 * u0))
            m01 = o * (ddrho * u0 * u1 + drho / r * (-u0 * u1))
            m11 = o * (ddrho * u1 * u1 + drho / r * (1.0 - u1 * u1))
            m = _emit_bond(rows, cols, vals, m, xi, eta, m00, m01, m11)
        og = wx * gsecond
        for i in range(nd + 1):
            ai = sidx[i]
            for j in range(nd + 1):
                aj = sidx[j]
                for ci in range(2):
                    for cj in range(2):
                        rows[m] = 2 * ai + ci
                        cols[m] = 2 * aj + cj
                        vals[m] = og * svec[i, ci] * svec[j, cj]
                        m += 1
    return STATUS_OK, -1, -1, rows[:m], cols[:m], vals[:m]


@njit(cache=True)
def _emit_block(rows, cols, vals, m, p, q, sgn, m00, m01, m11):
    rows[m] = 2 * p
    cols[m] = 2 * q
    vals[m] = sgn * m00
    rows[m + 1] = 2 * p
    cols[m + 1] = 2 * q + 1
    vals[m + 1] = sgn * m01
    rows[m + 2] = 2 * p + 1
    cols[m + 2] = 2 * q
    vals[m + 2] = sgn * m01
    rows[m + 3] = 2 * p + 1
    cols[m + 3] = 2 * q + 1
    vals[m + 3] = sgn * m11
    return m + 4


@njit(cache=True)
def _emit_bond(rows, cols, vals, m, xi, eta, m00, m01, m11):
    """Scatter the four 2x2 blocks of a central-force bond Hessian."""
    # (xi,xi) and (eta,eta) get +M, (xi,eta) and (eta,xi) get -M
    m = _emit_block(rows, cols, vals, m, xi, xi, 1.0, m00, m01, m11)
    m = _emit_block(rows, cols, vals, m, eta, eta, 1.0, m00, m01, m11)
    m = _emit_block(rows, cols, vals, m, xi, eta, -1.0, m00, m01, m11)
    m = _emit_block(rows, cols, vals, m, eta, xi, -1.0, m00, m01, m11)
    return m


@njit(cache=True)
def bfs_hops(n_points, ptr, idx, sources):
    """Breadth-first hop counts from a source set over a CSR graph."""
    dist = np.full(n_points, -1, np.int32)
    cur = np.empty(n_points, np.int64)
    nxt = np.empty(n_points, np.int64)
    nc = 0
    for i in range(sources.size):
        s = sources[i]
        if dist[s] < 0:
            dist[s] = 0
            cur[nc] = s
            nc += 1
    d = 0
    while nc > 0:
        d += 1
        nn = 0
        for i in range(nc):
            u = cur[i]
            for k in range(ptr[u], ptr[u + 1]):
                v = idx[k]
                if dist[v] < 0:
                    dist[v] = d
                    nxt[nn] = v
                    nn += 1
        tmp = cur
        cur = nxt
        nxt = tmp
        nc = nn
    return dist


@njit(cache=True)
def clip_cell_areas(template, site_xy, tri_xy, pair_site, pair_elem):
    """Area of (Voronoi cell of site) intersect (triangle) per candidate pair.

    `template` is the cell polygon centered at the origin (CCW); the cell
    of site s is template + site_xy[s]. Successive half-plane clipping
    against the CCW triangle edges; slivers below 1e-14 are dropped.
    """
    n = pair_site.size
    areas = np.zeros(n)
    buf_a = np.empty((16, 2))
    buf_b = np.empty((16, 2))
    for p in range(n):
        s = pair_site[p]
        e = pair_elem[p]
        na = template.shape[0]
        for i in range(na):
            buf_a[i, 0] = template[i, 0] + site_xy[s, 0]
            buf_a[i, 1] = template[i, 1] + site_xy[s, 1]
        for j in range(3):
            if na == 0:
                break
            ax = tri_xy[e, j, 0]
            ay = tri_xy[e, j, 1]
            jn = j + 1 if j < 2 else 0
            ex = tri_xy[e, jn, 0] - ax
            ey = tri_xy[e, jn, 1] - ay
            nb = 0
            px = buf_a[na - 1, 0]
            py = buf_a[na - 1, 1]
            dp = ex * (py - ay) - ey * (px - ax)
            for i in range(na):
                qx = buf_a[i, 0]
                qy = buf_a[i, 1]
                dq = ex * (qy - ay) - ey * (qx - ax)
                if dq >= 0.0:
                    if dp < 0.0:
                        t = dp / (dp - dq)
                        buf_b[nb, 0] = px + t * (qx - px)
                        buf_b[nb, 1] = py + t * (qy - py)
                        nb += 1
                    buf_b[nb, 0] = qx
                    buf_b[nb, 1] = qy
                    nb += 1
                elif dp >= 0.0:
                    t = dp / (dp - dq)
                    buf_b[nb, 0] = px + t * (qx - px)
                    buf_b[nb, 1] = py + t * (qy - py)
                    nb += 1
                px = qx
                py = qy
                dp = dq
            na = nb
            for i in range(nb):
                buf_a[i, 0] = buf_b[i, 0]
                buf_a[i, 1] = buf_b[i, 1]
        if na >= 3:
            s2 = 0.0
            for i in range(na):
                i2 = i + 1 if i + 1 < na else 0
                s2 += buf_a[i, 0] * buf_a[i2, 1] - buf_a[i2, 0] * buf_a[i, 1]
            area = 0.5 * s2
            if area > 1e-14:
                areas[p] = area
    return areas


@njit(cache=True)
def locate_points(query, tri_xy, grid_ptr, grid_items, x0, y0, inv_h, nx, ny):
    """Locate query points in a triangulation via a uniform bbox grid.

    Returns element ids (-1 when outside) and barycentric coordinates.
    Every element is registered with all grid cells its bbox touches, so a
    containing element is always found in the query point's own cell.
    """
    nq = query.shape[0]
    elem = np.full(nq, -1, np.int64)
    bary = np.zeros((nq, 3))
    tol = 1e-9
    for q in range(nq):
        x = query[q, 0]
        y = query[q, 1]
        cx = int(np.floor((x - x0) * inv_h))
        cy = int(np.floor((y - y0) * inv_h))
        if cx < 0:
            cx = 0
        if cx > nx - 1:
            cx = nx - 1
        if cy < 0:
            cy = 0
        if cy > ny - 1:
            cy = ny - 1
        cell = cy * nx + cx
        best = -1.0
        for k in range(grid_ptr[cell], grid_ptr[cell + 1]):
            e = grid_items[k]
            p0x = tri_xy[e, 0, 0]
            p0y = tri_xy[e, 0, 1]
            v0x = tri_xy[e, 1, 0] - p0x
            v0y = tri_xy[e, 1, 1] - p0y
            v1x = tri_xy[e, 2, 0] - p0x
            v1y = tri_xy[e, 2, 1] - p0y
            det = v0x * v1y - v0y * v1x
            if det <= 0.0:
                continue
            wx = x - p0x
            wy = y - p0y
            l1 = (wx * v1y - wy * v1x) / det
            l2 = (v0x * wy - v0y * wx) / det
            l0 = 1.0 - l1 - l2
            lmin = min(l0, min(l1, l2))
            if lmin >= -tol and lmin > best:
                best = lmin
                elem[q] = e
                bary[q, 0] = l0
                bary[q, 1] = l1
                bary[q, 2] = l2
                if lmin >= tol:
                    break
    return elem, bary
