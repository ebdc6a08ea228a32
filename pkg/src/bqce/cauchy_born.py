"""Cauchy-Born strain energy density W(F) and its derivatives.

W(F) is the EAM energy of one interior atom under the homogeneous
deformation y(x) = F x, divided by the Voronoi cell area sqrt(3)/2. Sums
run over the reference-configuration shells, so |vor(0)| * W(F) equals
the interior site energy exactly and the blended energy reproduces the
total energy of a uniformly strained perfect lattice.
"""

from dataclasses import dataclass

import numpy as np

from .errors import EvaluationError
from .lattice import SHELL_OFFSETS, SHELL_RADII, VORONOI_AREA, lattice_positions


def shell_vectors(model):
    """Reference shell vectors within the pair and density cutoffs."""
    groups = [lattice_positions(offs)
              for offs, rad in zip(SHELL_OFFSETS, SHELL_RADII)
              if rad <= model.r_cut_pair + 1e-12]
    pair = np.concatenate(groups, axis=0)
    groups = [lattice_positions(offs)
              for offs, rad in zip(SHELL_OFFSETS, SHELL_RADII)
              if rad <= model.r_cut_density + 1e-12]
    dens = np.concatenate(groups, axis=0)
    return pair, dens


@dataclass
class StrainState:
    F: np.ndarray
    W: float
    dW: np.ndarray       # 2x2 first Piola-Kirchhoff stress
    d2W: np.ndarray      # 2x2x2x2 tangent


def _deformed(Fs, sig):
    """Deformed shell vectors F sigma and their lengths for a batch of F."""
    fv = np.einsum("mij,kj->mki", Fs, sig)
    r = np.linalg.norm(fv, axis=2)
    return fv, r


def cb_energy_batch(model, Fs):
    """W(F) for a batch of deformation gradients (no derivative work)."""
    Fs = np.asarray(Fs, float).reshape(-1, 2, 2)
    _require_orientation(Fs)
    pair, dens = shell_vectors(model)
    _, rp = _deformed(Fs, pair)
    _, rd = _deformed(Fs, dens)
    phi, _, _ = model.pair_phi(rp)
    rho, _, _ = model.density_rho(rd)
    g, _, _ = model.embed_G(rho.sum(axis=1))
    return (0.5 * phi.sum(axis=1) + g) / VORONOI_AREA


def cb_stress_batch(model, Fs):
    """(W, dW) for a batch of deformation gradients."""
    Fs = np.asarray(Fs, float).reshape(-1, 2, 2)
    _require_orientation(Fs)
    pair, dens = shell_vectors(model)
    fvp, rp = _deformed(Fs, pair)
    fvd, rd = _deformed(Fs, dens)
    phi, dphi, _ = model.pair_phi(rp)
    rho, drho, _ = model.density_rho(rd)
    rho_bar = rho.sum(axis=1)
    g, dg, _ = model.embed_G(rho_bar)
    w = (0.5 * phi.sum(axis=1) + g) / VORONOI_AREA
    dw = np.einsum("mk,mki,kj->mij", 0.5 * dphi / rp, fvp, pair)
    dw += dg[:, None, None] * np.einsum("mk,mki,kj->mij", drho / rd, fvd, dens)
    return w, dw / VORONOI_AREA


def cb_tangent_batch(model, Fs):
    """(W, dW, d2W) for a batch of deformation gradients."""
    Fs = np.asarray(Fs, float).reshape(-1, 2, 2)
    _require_orientation(Fs)
    pair, dens = shell_vectors(model)
    w, dw = cb_stress_batch(model, Fs)

    def bond_terms(sig, dval, ddval, r, fv):
        u = fv / r[:, :, None]
        a = np.einsum("mki,kj->mkij", u, sig)
        t1 = np.einsum("mk,mkij,mkpq->mijpq", ddval, a, a)
        eye = np.eye(2)
        proj = eye[None, None] - np.einsum("mki,mkp->mkip", u, u)
        t2 = np.einsum("mk,mkip,kj,kq->mijpq", dval / r, proj, sig, sig)
        return t1 + t2, a

    fvp, rp = _deformed(Fs, pair)
    fvd, rd = _deformed(Fs, dens)
    _, dphi, ddphi = model.pair_phi(rp)
    rho, drho, ddrho = model.density_rho(rd)
    rho_bar = rho.sum(axis=1)
    _, dg, ddg = model.embed_G(rho_bar)
    tp, _ = bond_terms(pair, 0.5 * dphi, 0.5 * ddphi, rp, fvp)
    td, ad = bond_terms(dens, dg[:, None] * drho, dg[:, None] * ddrho,
                        rd, fvd)
    s = np.einsum("mk,mkij->mij", drho, ad)
    touter = np.einsum("m,mij,mpq->mijpq", ddg, s, s)
    d2w = (tp + td + touter) / VORONOI_AREA
    return w, dw, d2w


def cb_density(model, F):
    """Strain state (W, dW, d2W) at one deformation gradient."""
    F = np.asarray(F, float)
    w, dw, d2w = cb_tangent_batch(model, F[None])
    return StrainState(F.copy(), float(w[0]), dw[0], d2w[0])


def _require_orientation(Fs):
    det = Fs[:, 0, 0] * Fs[:, 1, 1] - Fs[:, 0, 1] * Fs[:, 1, 0]
    if (det <= 0).any():
        k = int(np.argmax(det <= 0))
        raise EvaluationError(
            f"degenerate deformation gradient (det = {det[k]:g})")


def find_ground_state(model, bracket=(0.8, 1.2), tol=1e-12, max_iter=200):
    """Ground-state strain F0 = t0 * I minimizing W along the identity ray.

    Safeguarded Newton on g'(t) = trace(dW(t I)) with a bisection
    fallback; requires a sign change of g' over the bracket.
    """
    eye = np.eye(2)

    def gp_gpp(t):
        _, dw, d2w = cb_tangent_batch(model, (t * eye)[None])
        return float(np.einsum("ii->", dw[0])), float(np.einsum("iipp->", d2w[0]))

    lo, hi = bracket
    glo, _ = gp_gpp(lo)
    ghi, _ = gp_gpp(hi)
    if not (glo < 0.0 < ghi):
        raise EvaluationError(
            f"no interior energy minimum in t bracket {bracket}: "
            f"g'({lo}) = {glo:g}, g'({hi}) = {ghi:g}")
    t = 0.5 * (lo + hi)
    for _ in range(max_iter):
        g, gpp = gp_gpp(t)
        if abs(g) < tol:
            break
        if g > 0:
            hi = t
        else:
            lo = t
        t_new = t - g / gpp if gpp > 0 else 0.5 * (lo + hi)
        if not (lo < t_new < hi):
            t_new = 0.5 * (lo + hi)
        t = t_new
    else:
        raise EvaluationError("ground-state search did not converge")
    return t * eye
