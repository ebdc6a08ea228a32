"""Embedded-atom toy model: pair potential, electron density, embedding
function, site energies and analytic derivatives.

phi(r) = exp(-2a(r-1)) - 2 exp(-a(r-1)), rho(r) = exp(-b r),
G(s) = c[(s - s0)^2 + (s - s0)^4]. Defaults a=4.4, b=3, c=5, s0=6e^-b,
with reference-configuration cutoffs 1.8 (density) and 2.5 (pair).
"""

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import kernels
from .errors import EvaluationError


@dataclass
class EamModel:
    a: float = 4.4
    b: float = 3.0
    c: float = 5.0
    rho_bar_0: float = None
    r_cut_density: float = 1.8
    r_cut_pair: float = 2.5

    def __post_init__(self):
        if self.rho_bar_0 is None:
            self.rho_bar_0 = 6.0 * math.exp(-self.b)

    def pair_phi(self, r):
        """Morse-type pair potential: (value, d/dr, d2/dr2)."""
        r = np.asarray(r, float)
        t = np.exp(-self.a * (r - 1.0))
        return (t * t - 2.0 * t,
                2.0 * self.a * t * (1.0 - t),
                2.0 * self.a ** 2 * t * (2.0 * t - 1.0))

    def density_rho(self, r):
        """Electron density contribution: (value, d/dr, d2/dr2)."""
        r = np.asarray(r, float)
        v = np.exp(-self.b * r)
        return v, -self.b * v, self.b ** 2 * v

    def embed_G(self, rho_bar):
        """Embedding energy: (value, d/ds, d2/ds2)."""
        d = np.asarray(rho_bar, float) - self.rho_bar_0
        return (self.c * (d ** 2 + d ** 4),
                self.c * (2.0 * d + 4.0 * d ** 3),
                self.c * (2.0 + 12.0 * d ** 2))


def _check(status, xi, eta):
    if status == kernels.STATUS_COINCIDENT:
        raise EvaluationError(
            f"coincident atom positions for sites {xi} and {eta}")


def site_energy(model, domain, nbrs, y, xi):
    """EAM site energy of one free site under deformation y."""
    sites = np.array([xi], np.int64)
    status, sa, sb, e = kernels.eam_site_energies(
        np.ascontiguousarray(y, float), sites,
        nbrs.pair_ptr, nbrs.pair_idx, nbrs.dens_ptr, nbrs.dens_idx,
        model.a, model.b, model.c, model.rho_bar_0)
    _check(status, sa, sb)
    return float(e[0])


def site_energies(model, nbrs, y, sites):
    """EAM site energies for an id array of sites."""
    status, sa, sb, e = kernels.eam_site_energies(
        np.ascontiguousarray(y, float), np.asarray(sites, np.int64),
        nbrs.pair_ptr, nbrs.pair_idx, nbrs.dens_ptr, nbrs.dens_idx,
        model.a, model.b, model.c, model.rho_bar_0)
    _check(status, sa, sb)
    return e


def total_atomistic_energy(model, domain, nbrs, y, weights=None, active=None):
    """Sum of (weighted) free-site energies."""
    w, act = _weights_active(domain, weights, active)
    status, sa, sb, e = kernels.eam_energy(
        np.ascontiguousarray(y, float), act, w,
        nbrs.pair_ptr, nbrs.pair_idx, nbrs.dens_ptr, nbrs.dens_idx,
        model.a, model.b, model.c, model.rho_bar_0)
    _check(status, sa, sb)
    return float(e)


def atomistic_gradient(model, domain, nbrs, y, weights=None, active=None):
    """Energy and its exact gradient scattered over every point.

    The returned gradient rows for constrained (halo) points are real
    partial derivatives; callers restrict to the free partition.
    """
    w, act = _weights_active(domain, weights, active)
    status, sa, sb, e, g = kernels.eam_energy_gradient(
        np.ascontiguousarray(y, float), act, w,
        nbrs.pair_ptr, nbrs.pair_idx, nbrs.dens_ptr, nbrs.dens_idx,
        model.a, model.b, model.c, model.rho_bar_0)
    _check(status, sa, sb)
    return float(e), g


def atomistic_hessian(model, domain, nbrs, y, weights=None, active=None,
                      chunk=4096):
    """Sparse symmetric second derivative over all 2*n_points dofs."""
    w, act = _weights_active(domain, weights, active)
    n2 = 2 * domain.n_points
    y = np.ascontiguousarray(y, float)
    h = sp.csr_matrix((n2, n2))
    for lo in range(0, act.size, chunk):
        part = act[lo:lo + chunk]
        status, sa, sb, rows, cols, vals = kernels.eam_hessian_triplets(
            y, part, w, nbrs.pair_ptr, nbrs.pair_idx,
            nbrs.dens_ptr, nbrs.dens_idx,
            model.a, model.b, model.c, model.rho_bar_0)
        _check(status, sa, sb)
        h = h + sp.coo_matrix((vals, (rows, cols)), shape=(n2, n2)).tocsr()
    return h


def _weights_active(domain, weights, active):
    if weights is None:
        weights = domain.free.astype(float)
    if active is None:
        active = np.nonzero(weights > 0)[0].astype(np.int64)
    else:
        active = np.asarray(active, np.int64)
    return np.ascontiguousarray(weights, float), active
