"""Region decomposition and blending functions (QCE, linear, smooth).

The atomistic region is the first K0 hopping layers around the defect
set, the blend annulus the next K1 layers, and everything else is
continuum. beta = 0 means pure atomistic, beta = 1 pure continuum. The
smooth blend minimizes the summed squared second differences along the
three nearest-neighbor directions subject to the region constraints.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConstructionError
from .lattice import SHELL_OFFSETS, hopping_distance

LABEL_ATOMISTIC = 0
LABEL_BLEND = 1
LABEL_CONTINUUM = 2
LABEL_NONE = -1


@dataclass
class Regions:
    """Per-site region labels relative to a defect (or nominal center)."""

    K0: int
    K1: int
    source_ids: np.ndarray
    dhop: np.ndarray
    labels: np.ndarray


@dataclass
class BlendField:
    """Per-site blending weights in [0,1] with their region decomposition.

    beta is stored for every lattice point: defect rows carry 0 (they
    belong to the atomistic core), halo rows carry the far-field value 1.
    `clamp_overshoot` records how far the smooth minimizer left [0,1]
    before clamping (a mesh-quality diagnostic; 0 for qce/linear).
    """

    kind: str
    K0: int
    K1: int
    beta: np.ndarray
    labels: np.ndarray
    clamp_overshoot: float = 0.0


def classify_regions(domain, source_ids, K0, K1):
    """Split free sites into atomistic / blend / continuum layers."""
    if K0 < 0 or K1 < 0:
        raise ConstructionError("K0 and K1 must be nonnegative")
    dhop = hopping_distance(domain, source_ids)
    labels = np.full(domain.n_points, LABEL_NONE, np.int8)
    free = domain.free
    labels[free & (dhop <= K0)] = LABEL_ATOMISTIC
    labels[free & (dhop > K0) & (dhop <= K0 + K1)] = LABEL_BLEND
    labels[free & (dhop > K0 + K1)] = LABEL_CONTINUUM
    if not (labels == LABEL_CONTINUUM).any():
        raise ConstructionError(
            f"K0 + K1 = {K0 + K1} layers exceed the domain radius "
            f"(no continuum region is left)")
    return Regions(K0, K1, np.asarray(source_ids, np.int64), dhop, labels)


def beta_qce(domain, regions):
    """Characteristic-function blending: 0 on the atomistic region."""
    if regions.K1 != 0:
        raise ConstructionError("qce blending requires K1 = 0")
    beta = np.ones(domain.n_points)
    beta[regions.labels == LABEL_ATOMISTIC] = 0.0
    beta[domain.is_defect] = 0.0
    return BlendField("qce", regions.K0, 0, beta, regions.labels)


def beta_linear(domain, regions):
    """Linear ramp min(1, d/K1) in the hopping distance from the core."""
    if regions.K1 < 1:
        raise ConstructionError("linear blending requires K1 >= 1")
    d = regions.dhop - regions.K0
    beta = np.clip(d / regions.K1, 0.0, 1.0)
    beta[domain.is_defect] = 0.0
    beta[domain.is_halo] = 1.0
    beta[regions.labels == LABEL_ATOMISTIC] = 0.0
    return BlendField("linear", regions.K0, regions.K1, beta, regions.labels)


def second_difference_cost(domain, beta):
    """Phi(beta): summed squared second differences over the free sites.

    Stencil values off the free set use the constraint-side values: 0 on
    defect sites (atomistic core), 1 outside the domain (far field).
    """
    vals = np.asarray(beta, float).copy()
    vals[domain.is_defect] = 0.0
    vals[domain.is_halo] = 1.0
    total = 0.0
    free = domain.free_ids
    for off in SHELL_OFFSETS[0][:3]:
        plus = domain.lookup(domain.lat[free] + off)
        minus = domain.lookup(domain.lat[free] - off)
        vp = np.where(plus >= 0, vals[np.clip(plus, 0, None)], 1.0)
        vm = np.where(minus >= 0, vals[np.clip(minus, 0, None)], 1.0)
        d2 = vp - 2.0 * vals[free] + vm
        total += float(np.dot(d2, d2))
    return total


def beta_smooth(domain, regions, rtol=1e-10):
    """Constrained minimizer of the second-difference cost on the annulus.

    Solves the stationarity system of the quadratic program exactly (to
    the linear-solver tolerance), then clamps overshoot into [0,1].
    """
    if regions.K1 < 2:
        raise ConstructionError("smooth blending requires K1 >= 2")
    var_ids = np.nonzero(regions.labels == LABEL_BLEND)[0]
    if var_ids.size == 0:
        raise ConstructionError("empty blend interior: nothing to optimize")
    var_of = np.full(domain.n_points, -1, np.int64)
    var_of[var_ids] = np.arange(var_ids.size)

    fixed = np.ones(domain.n_points)
    fixed[regions.labels == LABEL_ATOMISTIC] = 0.0
    fixed[domain.is_defect] = 0.0

    free = domain.free_ids
    nrow = 0
    rows_i = []
    cols_i = []
    vals_i = []
    rhs_rows = []
    for off in SHELL_OFFSETS[0][:3]:
        plus = domain.lookup(domain.lat[free] + off)
        minus = domain.lookup(domain.lat[free] - off)
        row_ids = nrow + np.arange(free.size)
        nrow += free.size
        const = np.zeros(free.size)
        for ids, coef in ((plus, 1.0), (free, -2.0), (minus, 1.0)):
            ids = np.asarray(ids)
            present = ids >= 0
            v = np.where(present, var_of[np.clip(ids, 0, None)], -1)
            isvar = v >= 0
            rows_i.append(row_ids[isvar])
            cols_i.append(v[isvar])
            vals_i.append(np.full(int(isvar.sum()), coef))
            fx = np.where(present, fixed[np.clip(ids, 0, None)], 1.0)
            const += coef * np.where(isvar, 0.0, fx)
        rhs_rows.append(const)
    d = sp.coo_matrix(
        (np.concatenate(vals_i),
         (np.concatenate(rows_i), np.concatenate(cols_i))),
        shape=(nrow, var_ids.size)).tocsr()
    const = np.concatenate(rhs_rows)
    a = (d.T @ d).tocsc()
    b = -d.T @ const
    x = spla.spsolve(a, b)
    resid = np.linalg.norm(a @ x - b)
    scale = np.linalg.norm(b) if np.linalg.norm(b) > 0 else 1.0
    if not np.isfinite(x).all() or resid > rtol * scale:
        raise ConstructionError(
            f"smooth blend stationarity solve failed (relative residual "
            f"{resid / scale:g})")
    overshoot = max(0.0, float(-x.min()), float(x.max() - 1.0))
    x = np.clip(x, 0.0, 1.0)
    beta = fixed.copy()
    beta[var_ids] = x
    beta[domain.is_halo] = 1.0
    return BlendField("smooth", regions.K0, regions.K1, beta, regions.labels,
                      clamp_overshoot=overshoot)


@dataclass
class ParameterPlan:
    """Approximation-parameter choices from the complexity analysis."""

    alpha: float
    p: float
    K0: int
    K1: int
    gamma: float
    mesh_exponent: float
    rule: str
    mu: float = field(default=float("nan"))


def select_parameters(alpha, p, K0, N, rule="table"):
    """Blend width K1 and mesh grading exponent for given decay and norm.

    gamma = alpha*p/(p+2) (gamma = alpha for p = inf). Table rule:
    gamma > 1 -> K1 = K0; gamma = 1 -> K1 = K0 * ln(N/K0)^(1/2);
    gamma < 1 -> K1 = K0^gamma * N^(1-gamma). The mu rule (valid for
    gamma > 1, alpha > 2, p > 1) sets K1 = K0^mu with
    mu = (alpha - 2/p) / (2 - 2/p).
    """
    if alpha <= 0:
        raise ConstructionError("alpha must be positive")
    if K0 < 1 or N <= K0:
        raise ConstructionError("need 1 <= K0 < N")
    pval = float("inf") if p in ("inf", math.inf) else p
    if pval not in (1, 2, float("inf")):
        raise ConstructionError(f"p must be 1, 2 or inf, got {p!r}")
    gamma = alpha if math.isinf(pval) else alpha * pval / (pval + 2.0)
    mu = float("nan")
    if rule == "mu":
        if not (gamma > 1 and alpha > 2 and pval > 1):
            raise ConstructionError(
                "the mu rule applies only for gamma > 1, alpha > 2, p > 1")
        mu = (alpha - 2.0 / pval) / (2.0 - 2.0 / pval)
        K1 = int(math.ceil(K0 ** mu))
    elif rule == "table":
        if gamma > 1:
            K1 = K0
        elif gamma == 1:
            K1 = int(math.ceil(K0 * math.sqrt(math.log(N / K0))))
        else:
            K1 = int(math.ceil(K0 ** gamma * N ** (1.0 - gamma)))
    else:
        raise ConstructionError(f"unknown parameter rule {rule!r}")
    return ParameterPlan(alpha, pval, K0, K1, gamma, gamma, rule, mu)
