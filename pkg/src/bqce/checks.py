"""Self-contained property suites behind `bqce check --suite ...`.

Each suite prints one line per property and returns overall success;
they are desk-scale versions of the test-suite invariants so a built
installation can be validated without pytest.
"""

import numpy as np

from .assembly import BqceSystem, ghost_force_norm
from .blending import (BlendField, classify_regions, beta_linear, beta_qce,
                       beta_smooth, select_parameters)
from .cauchy_born import cb_stress_batch, find_ground_state
from .eam import (EamModel, atomistic_gradient, total_atomistic_energy)
from .lattice import VORONOI_AREA, generate_domain, neighbor_shells
from .mesh import build_graded_mesh, effective_volumes, micro_mesh


def _report(name, ok, detail=""):
    print(f"{'PASS' if ok else 'FAIL'}  {name}{'  (' + detail + ')' if detail else ''}")
    return ok


def _zero_blend(domain):
    # beta = 0 on the halo too: the reduction target is the atomistic
    # functional including the halo energy differences
    beta = np.zeros(domain.n_points)
    labels = np.full(domain.n_points, -1, np.int8)
    labels[domain.free] = 0
    return BlendField("qce", domain.N, 0, beta, labels)


def suite_gradients():
    ok = True
    model = EamModel()
    F0 = find_ground_state(model)
    F = np.array([[1.0, 0.03], [0.0, 1.03]]) @ F0
    domain = generate_domain(10, "divacancy")
    nbrs = neighbor_shells(domain)
    rng = np.random.default_rng(0)
    y = domain.pos @ F.T + 0.02 * rng.standard_normal((domain.n_points, 2))
    _, g = atomistic_gradient(model, domain, nbrs, y)
    h = 1e-5
    worst = 0.0
    for k in rng.choice(domain.free_ids, 8, replace=False):
        for c in range(2):
            yp = y.copy()
            yp[k, c] += h
            ym = y.copy()
            ym[k, c] -= h
            fd = (total_atomistic_energy(model, domain, nbrs, yp)
                  - total_atomistic_energy(model, domain, nbrs, ym)) / (2 * h)
            worst = max(worst, abs(fd - g[k, c]) / max(1.0, abs(fd)))
    ok &= _report("atomistic gradient vs central differences", worst < 1e-6,
                  f"rel {worst:.2e}")

    dW = cb_stress_batch(model, F[None])[1][0]
    hq = 1e-6
    worst = 0.0
    from .cauchy_born import cb_energy_batch

    for i in range(2):
        for j in range(2):
            Fp = F.copy()
            Fp[i, j] += hq
            Fm = F.copy()
            Fm[i, j] -= hq
            fd = (cb_energy_batch(model, Fp[None])[0]
                  - cb_energy_batch(model, Fm[None])[0]) / (2 * hq)
            worst = max(worst, abs(fd - dW[i, j]) / max(1.0, abs(fd)))
    ok &= _report("Cauchy-Born stress vs central differences", worst < 1e-7,
                  f"rel {worst:.2e}")
    return ok


def suite_invariants():
    ok = True
    model = EamModel()
    F0 = find_ground_state(model)
    domain = generate_domain(20)
    nbrs = neighbor_shells(domain)
    origin = int(domain.lookup(np.array([[0, 0]]))[0])
    plan = select_parameters(3, 2, 4, 20)
    for kind, K1 in (("qce", 0), ("linear", 4), ("smooth", 4)):
        regions = classify_regions(domain, [origin], 4, K1)
        blend = {"qce": beta_qce, "linear": beta_linear,
                 "smooth": beta_smooth}[kind](domain, regions)
        mesh = build_graded_mesh(domain, regions, plan)
        v = effective_volumes(mesh, blend, domain)
        target = VORONOI_AREA * blend.beta[domain.free_ids].sum()
        rel = abs(v.sum() - target) / target
        ok &= _report(f"effective-volume identity ({kind})", rel < 1e-10,
                      f"rel {rel:.2e}")
        system = BqceSystem(model, domain, nbrs, mesh, blend, F0)
        e_b = system.energy(mesh.node_xy @ F0.T)
        e_a = total_atomistic_energy(model, domain, nbrs, domain.pos @ F0.T)
        rel = abs(e_b - e_a) / abs(e_a)
        ok &= _report(f"homogeneous exactness ({kind})", rel < 1e-10,
                      f"rel {rel:.2e}")
    dd = generate_domain(12, "divacancy")
    nbd = neighbor_shells(dd)
    mm = micro_mesh(dd)
    blend0 = _zero_blend(dd)
    F = np.array([[1.03, 0.03], [0.0, 1.03]]) @ F0
    from .solver import AtomisticProblem

    system = BqceSystem(model, dd, nbd, mm, blend0, F)
    e_b = system.energy(mm.node_xy @ F.T)
    e_a = AtomisticProblem(model, dd, nbd, F).value(
        np.zeros(2 * dd.free_ids.size))
    rel = abs(e_b - e_a) / max(abs(e_a), 1.0)
    ok &= _report("beta=0 reduction to the atomistic energy", rel < 1e-12,
                  f"rel {rel:.2e}")
    return ok


def suite_ghostforce():
    ok = True
    model = EamModel()
    F0 = find_ground_state(model)
    domain = generate_domain(40)
    nbrs = neighbor_shells(domain)
    origin = int(domain.lookup(np.array([[0, 0]]))[0])

    def sup_for(kind, K0, K1):
        regions = classify_regions(domain, [origin], K0, K1)
        blend = {"qce": beta_qce, "linear": beta_linear,
                 "smooth": beta_smooth}[kind](domain, regions)
        plan = select_parameters(3, 2, K0, 40)
        mesh = build_graded_mesh(domain, regions, plan)
        effective_volumes(mesh, blend, domain)
        return ghost_force_norm(model, domain, nbrs, mesh, blend, F0)[0]

    sups = [sup_for("smooth", 4, k1) for k1 in (4, 8, 16)]
    ratios = [sups[1] / sups[0], sups[2] / sups[1]]
    ok &= _report("smooth ghost-force decay ~ K1^-2",
                  all(0.15 <= r <= 0.5 for r in ratios),
                  "ratios " + ", ".join(f"{r:.3f}" for r in ratios))
    sups = [sup_for("linear", 4, k1) for k1 in (4, 8, 16)]
    ratios = [sups[1] / sups[0], sups[2] / sups[1]]
    ok &= _report("linear ghost-force decay ~ K1^-1",
                  all(0.35 <= r <= 0.75 for r in ratios),
                  "ratios " + ", ".join(f"{r:.3f}" for r in ratios))
    sups = [sup_for("qce", k0, 0) for k0 in (4, 8, 16)]
    ratios = [sups[1] / sups[0], sups[2] / sups[1]]
    ok &= _report("qce ghost force does not decay",
                  all(0.5 <= r <= 1.5 for r in ratios),
                  "ratios " + ", ".join(f"{r:.3f}" for r in ratios))
    mm = micro_mesh(domain)
    sup0, _ = ghost_force_norm(model, domain, nbrs, mm, _zero_blend(domain),
                               F0)
    ok &= _report("beta=0 interior forces vanish", sup0 < 1e-10,
                  f"sup {sup0:.2e}")
    return ok


def run_suite(name):
    return {"gradients": suite_gradients,
            "invariants": suite_invariants,
            "ghostforce": suite_ghostforce}[name]()
