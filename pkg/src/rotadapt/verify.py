"""Named verification checks behind the ``verify`` CLI command.

The ``fast`` suite is a quick smoke pass over the load-bearing properties;
``full`` adds the acceptance-scale checks (large Monte Carlo comparisons and
full training runs). Each check returns (ok, detail) and is independent of
the others.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import analysis, datagen, egop, linalg, loss, model, optim

EMP_PARAMS = datagen.MixtureParams(omega=2.0 * (1.0 + np.sqrt(2.0)), mu=1.15, sigma=1.0)
EMP_ETA = 0.01
EMP_STEPS = 1000
EMP_WIDTH = 200
EMP_N = 10_000
EMP_INIT_SCALE = 0.1
THETA2_ANGLES = (np.pi / 32, np.pi / 4, 7 * np.pi / 8)


@dataclass
class CheckResult:
    name: str
    ok: bool
    detail: str
    seconds: float


def _mc_indicator_moments(ds: datagen.Dataset, w_bar: np.ndarray):
    """Per-coordinate mean and stderr of -y * x * 1{<w_bar, x> >= 0}."""
    active = (ds.features @ w_bar >= 0.0)[:, None]
    terms = -ds.labels[:, None] * ds.features * active
    n = len(ds)
    return terms.mean(axis=0), terms.std(axis=0, ddof=1) / np.sqrt(n)


def _rademacher(rng, m):
    return rng.integers(0, 2, m) * 2.0 - 1.0


def _fixed_outer_net(m=EMP_WIDTH, a_seed=11, init_seed=12, init_scale=EMP_INIT_SCALE):
    rng = np.random.default_rng(a_seed)
    a = _rademacher(rng, m)
    return model.make_fixed_outer_two_layer(2, m, a, init_seed, init_scale)


def _train(opt_name, dataset, arch, theta0, eta=EMP_ETA, steps=EMP_STEPS, **kw):
    oracle = loss.make_sample_loss_oracle(dataset, arch)
    if opt_name == "gd":
        return optim.gd_run(oracle, theta0, eta, steps, kw.get("momentum", 0.0))
    if opt_name == "signgd":
        return optim.signgd_run(oracle, theta0, eta, kw.get("eps", 0.0), steps)
    if opt_name == "adam":
        return optim.adam_run(
            oracle, theta0, eta, kw.get("beta1", 0.9999), kw.get("beta2", 0.9999),
            kw.get("eps", 1e-8), steps,
        )
    raise ValueError(opt_name)


def _predictor(arch, theta, basis=None):
    final = theta if basis is None else basis @ theta

    def predict(points):
        return model.forward_batch(arch, final, np.atleast_2d(points))

    return predict


def _uniform_probes(count, seed, half_width=8.0):
    rng = np.random.Generator(np.random.Philox(key=seed))
    return half_width * (2.0 * rng.random((count, 2)) - 1.0)


# --------------------------------------------------------------------------
# acceptance criteria


def crit_01_closed_form_vs_mc(
    n_samples: int = 10**6, n_dirs: int = 20, se_budget: float = 4.0
):
    """Closed-form population gradient against the sampling estimator."""
    rng = np.random.default_rng(101)
    worst = 0.0
    for gi, gamma in enumerate((0.0, np.pi / 32, np.pi / 4)):
        ds = datagen.sample(EMP_PARAMS, gamma, n_samples, seed=500 + gi)
        for _ in range(n_dirs):
            w = rng.normal(size=2)
            w /= np.linalg.norm(w)
            mean, se = _mc_indicator_moments(ds, w)
            for a_k in (1.0, -1.0):
                closed = loss.population_grad_row(EMP_PARAMS, gamma, a_k, w)
                dev = np.abs(a_k * mean - closed) / se
                worst = max(worst, float(dev.max()))
    ok = worst <= se_budget
    return ok, f"max deviation {worst:.2f} standard errors (budget {se_budget})"


def crit_02_sign_pattern(trials: int = 200, m: int = 20):
    gamma = np.pi / 4
    satisfied, slack = datagen.check_assumption2(EMP_PARAMS, gamma)
    if not satisfied:
        return False, f"precondition failed: slack {slack:.4f}"
    rng = np.random.default_rng(202)
    failures = 0
    for _ in range(trials):
        a = _rademacher(rng, m)
        w = rng.normal(size=(m, 2))
        if not loss.sign_pattern_holds(EMP_PARAMS, gamma, a, w):
            failures += 1
    return failures == 0, f"{failures}/{trials} random weight matrices violated"


def crit_03_diagonal_convergence():
    """SignGD at pi/4 drives all rows to the signed diagonal."""
    gamma = np.pi / 4
    arch, theta0 = _fixed_outer_net()
    ds = datagen.sample(EMP_PARAMS, gamma, EMP_N, seed=303)
    traj = _train("signgd", ds, arch, theta0, eps=0.0)
    min_cos = analysis.row_direction_convergence(traj, arch)[-1]
    boundary = analysis.extract_boundary(_predictor(arch, traj.final))
    if boundary.segments.shape[0] == 0:
        return False, "no boundary traced"
    pts = boundary.points
    max_dist = float(np.abs(pts.sum(axis=1)).max() / np.sqrt(2.0))
    limit = 2.0 * boundary.cell_size
    ok = min_cos >= 0.999 and max_dist <= limit
    return ok, (
        f"final min cosine {min_cos:.6f} (need >= 0.999); "
        f"max distance to diagonal {max_dist:.4f} vs {limit:.4f}"
    )


def _coupled_runs(opt_name, gamma, arch, theta0, n=2048, seed=404, steps=100, **kw):
    ds0 = datagen.sample(EMP_PARAMS, 0.0, n, seed)
    dsg = datagen.sample(EMP_PARAMS, gamma, n, seed)
    q = linalg.param_rotation(linalg.rotation_matrix(gamma), arch)
    base = _train(opt_name, ds0, arch, theta0, steps=steps, **kw)
    rot = _train(opt_name, dsg, arch, q.T @ theta0, steps=steps, **kw)
    return base, rot, q


def crit_04_gd_equivariance(tol: float = 1e-9):
    arch, theta0 = model.make_full_two_layer(2, 16, seed=41)
    worst = 0.0
    for gamma in THETA2_ANGLES:
        for momentum in (0.0, 0.9):
            base, rot, q = _coupled_runs("gd", gamma, arch, theta0, momentum=momentum)
            worst = max(worst, analysis.equivariance_residual(rot, base, q))
    return worst <= tol, f"max residual {worst:.3e} (tol {tol:.0e})"


def crit_05_adaptive_witness(n_mc: int = 10**5):
    gamma = np.pi / 32
    arch, theta0 = _fixed_outer_net()
    base, rot, q = _coupled_runs(
        "signgd", gamma, arch, theta0, n=EMP_N, seed=505, steps=EMP_STEPS, eps=1e-8
    )
    residual = analysis.equivariance_residual(rot, base, q)
    ds = datagen.sample(EMP_PARAMS, gamma, EMP_N, seed=506)
    sign_traj = _train("signgd", ds, arch, theta0, eps=1e-8)
    gd_traj = _train("gd", ds, arch, theta0)
    diff, se = analysis.paired_risk_difference(
        _predictor(arch, sign_traj.final),
        _predictor(arch, gd_traj.final),
        EMP_PARAMS,
        gamma,
        n_mc,
        seed=507,
    )
    ok = residual >= 1e-2 and diff >= 5.0 * se
    return ok, (
        f"residual {residual:.3e} (need >= 1e-2); risk gap {diff:.5f} "
        f"= {diff / se:.1f} paired standard errors (need >= 5)"
    )


def crit_06_egop_invariance(
    steps: int = 200, m: int = 10, n: int = 2000, tol_iter: float = 1e-9,
    tol_boundary: float = 1e-8,
):
    arch, theta0 = _fixed_outer_net(m=m, a_seed=61, init_seed=62, init_scale=None)
    probes = _uniform_probes(1000, seed=63)
    opts = (
        ("gd", {}),
        ("adam", {"beta1": 0.9999, "beta2": 0.9999, "eps": 3.0}),
        ("signgd", {"eps": 3.0}),
    )
    worst_iter, worst_boundary = 0.0, 0.0
    for scale in (0.1, 1.0):
        ds0 = datagen.sample(EMP_PARAMS, 0.0, n, seed=640)
        oracle0 = loss.make_sample_loss_oracle(ds0, arch)
        spec = egop.SamplingSpec(scale=scale, seed=641)
        v0 = egop.egop_basis(egop.estimate_egop(oracle0, spec, count=2 * m))
        rep0 = egop.reparameterized_oracle(oracle0, v0)
        for gamma in THETA2_ANGLES:
            q = linalg.param_rotation(linalg.rotation_matrix(gamma), arch)
            vg = egop.coupled_basis(v0, q)
            dsg = datagen.sample(EMP_PARAMS, gamma, n, seed=640)
            repg = egop.reparameterized_oracle(
                loss.make_sample_loss_oracle(dsg, arch), vg
            )
            for name, kw in opts:
                runs = {}
                for tag, oracle in (("base", rep0), ("rot", repg)):
                    if name == "gd":
                        runs[tag] = optim.gd_run(oracle, theta0, EMP_ETA, steps)
                    elif name == "adam":
                        runs[tag] = optim.adam_run(
                            oracle, theta0, EMP_ETA, kw["beta1"], kw["beta2"],
                            kw["eps"], steps,
                        )
                    else:
                        runs[tag] = optim.signgd_run(
                            oracle, theta0, EMP_ETA, kw["eps"], steps
                        )
                num = np.linalg.norm(
                    runs["rot"].thetas - runs["base"].thetas, axis=1
                )
                den = 1.0 + np.linalg.norm(runs["base"].thetas, axis=1)
                worst_iter = max(worst_iter, float((num / den).max()))
                worst_boundary = max(
                    worst_boundary,
                    analysis.boundary_equivariance_check(
                        _predictor(arch, runs["rot"].final, vg),
                        _predictor(arch, runs["base"].final, v0),
                        gamma,
                        probes,
                    ),
                )
    ok = worst_iter <= tol_iter and worst_boundary <= tol_boundary
    return ok, (
        f"max iterate residual {worst_iter:.3e} (tol {tol_iter:.0e}); "
        f"max forward-map residual {worst_boundary:.3e} (tol {tol_boundary:.0e})"
    )


def crit_07_shampoo_equivariance(tol: float = 1e-8):
    arch, theta0 = model.make_full_two_layer(2, 6, seed=71)
    layout = arch.layout()
    gamma = np.pi / 4
    ds0 = datagen.sample(EMP_PARAMS, 0.0, 1024, seed=72)
    dsg = datagen.sample(EMP_PARAMS, gamma, 1024, seed=72)
    q = linalg.param_rotation(linalg.rotation_matrix(gamma), arch)

    def run(ds, theta, include_step0):
        oracle = loss.make_sample_loss_oracle(ds, arch)
        return optim.shampoo_run(
            oracle, layout, theta, eta=EMP_ETA, eps=1e-4, steps=20,
            include_step0_root=include_step0,
        )

    base = run(ds0, theta0, True)
    rot = run(dsg, q.T @ theta0, True)
    residual = analysis.equivariance_residual(rot, base, q)
    base_skip = run(ds0, theta0, False)
    rot_skip = run(dsg, q.T @ theta0, False)
    residual_skip = analysis.equivariance_residual(rot_skip, base_skip, q)
    ok = residual <= tol and residual_skip > tol
    return ok, (
        f"residual {residual:.3e} (tol {tol:.0e}); "
        f"negative control without the step-0 root {residual_skip:.3e} (must exceed)"
    )


def crit_08_component_mass_bound(trials: int = 1000):
    rng = np.random.default_rng(808)
    violations = 0
    worst = np.inf
    for _ in range(trials):
        params = datagen.MixtureParams(
            omega=1.0 + rng.uniform(0.05, 5.0),
            mu=rng.uniform(0.05, 3.0),
            sigma=rng.uniform(0.2, 2.0),
        )
        gamma = rng.uniform(0.0, 2.0 * np.pi)
        w = rng.normal(size=2)
        while np.linalg.norm(w) == 0.0:
            w = rng.normal(size=2)
        t = loss.p_gamma_terms(params, gamma, w)
        margin = t.p_plus + t.p_pm + 2.0 * t.p_minus - datagen.c_mu(params)
        worst = min(worst, margin)
        if margin < -1e-12:
            violations += 1
    return violations == 0, f"{violations}/{trials} violations; worst margin {worst:.3e}"


def _smooth_point(arch, rng, min_gap=1e-6):
    """Draw (theta, x) keeping every pre-activation away from the ReLU kink."""
    for _ in range(200):
        theta = rng.normal(size=arch.n_params())
        x = rng.normal(size=arch.dims[0])
        weights, biases = model.unpack(arch, theta)
        h = x
        clear = True
        for j in range(arch.n_layers - 1):
            z = weights[j] @ h + (biases[j] if biases[j] is not None else 0.0)
            if np.abs(z).min() < min_gap:
                clear = False
                break
            h = np.maximum(z, 0.0)
        if clear:
            return theta, x
    raise RuntimeError("could not find a smooth probe point")


def crit_09_gradient_check(points_per_family: int = 34, h: float = 1e-6):
    rng = np.random.default_rng(909)
    a = _rademacher(rng, 4)
    families = [
        model.make_fixed_outer_two_layer(2, 4, a, seed=90)[0],
        model.make_full_two_layer(2, 4, seed=91)[0],
        model.make_mlp((3, 5, 4, 1), seed=92)[0],
    ]
    worst = 0.0
    for arch in families:
        for _ in range(points_per_family):
            theta, x = _smooth_point(arch, rng)
            grad = model.grad_theta(arch, theta, x)
            fd = np.empty_like(grad)
            for i in range(len(theta)):
                up = theta.copy()
                dn = theta.copy()
                up[i] += h
                dn[i] -= h
                fd[i] = (model.forward(arch, up, x) - model.forward(arch, dn, x)) / (
                    2.0 * h
                )
            rel = np.abs(fd - grad).max() / max(np.abs(grad).max(), 1e-12)
            worst = max(worst, float(rel))
    return worst <= 1e-5, f"max relative error {worst:.3e} (tol 1e-5)"


def crit_10_assumption_instances():
    sat_q, slack_q = datagen.check_assumption2(EMP_PARAMS, np.pi / 4)
    sat_s, slack_s = datagen.check_assumption2(EMP_PARAMS, np.pi / 32)
    ok = sat_q and not sat_s
    return ok, (
        f"pi/4 satisfied={sat_q} (slack {slack_q:.4f}); "
        f"pi/32 satisfied={sat_s} (slack {slack_s:.4f})"
    )


def crit_11_egop_estimator():
    c = np.array([3.0, -1.0, 0.5])
    lin = optim.GradOracle(dim=3, fn=lambda theta: (c @ theta, c.copy()))
    est = egop.estimate_egop(lin, egop.SamplingSpec(scale=1.0, seed=111), count=8)
    dev_lin = np.abs(est.matrix - np.outer(c, c)).max()
    quad = optim.GradOracle(
        dim=4, fn=lambda theta: (0.5 * float(theta @ theta), theta.copy())
    )
    est_q = egop.estimate_egop(quad, egop.SamplingSpec(scale=1.0, seed=112), count=10**4)
    dev_quad = np.abs(est_q.matrix - np.eye(4)).max()
    limit = 5.0 / np.sqrt(10**4)
    ok = dev_lin <= 1e-13 and dev_quad <= limit
    return ok, (
        f"constant-gradient deviation {dev_lin:.2e}; "
        f"quadratic deviation {dev_quad:.4f} (limit {limit})"
    )


# --------------------------------------------------------------------------
# fast smoke checks


def check_eig_reconstruction():
    rng = np.random.default_rng(1)
    worst = 0.0
    for n in (3, 8, 20):
        a = rng.normal(size=(n, n))
        a = 0.5 * (a + a.T)
        eig = linalg.sym_eig(a)
        v = eig.eigenvectors
        recon = (v * eig.eigenvalues) @ v.T
        worst = max(
            worst,
            float(np.abs(a - recon).max() / (1.0 + np.abs(a).max())),
        )
    return worst <= 1e-8, f"max reconstruction residual {worst:.3e}"


def check_eig_sign_convention():
    rng = np.random.default_rng(2)
    for n in (3, 9, 15):
        a = rng.normal(size=(n, n))
        a = 0.5 * (a + a.T)
        v = linalg.sym_eig(a).eigenvectors
        idx = np.abs(v).argmax(axis=0)
        lead = v[idx, np.arange(n)]
        if (lead <= 0.0).any():
            return False, "a column's largest-magnitude entry is not positive"
        vals = linalg.sym_eig(a).eigenvalues
        if (np.diff(vals) > 1e-12).any():
            return False, "eigenvalues are not sorted descending"
    return True, "largest-magnitude entries positive, eigenvalues descending"


def check_rotation_inverse():
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(100):
        g = rng.uniform(-10.0, 10.0)
        dev = np.abs(
            linalg.rotation_matrix(g) @ linalg.rotation_matrix(-g) - np.eye(2)
        ).max()
        worst = max(worst, float(dev))
    return worst <= 1e-12, f"max deviation from identity {worst:.3e}"


def check_dataset_equivariance():
    worst = 0.0
    for gamma in (np.pi / 7, 2.0, 5.5):
        base = datagen.sample(EMP_PARAMS, 0.0, 4096, seed=44)
        rot = datagen.sample(EMP_PARAMS, gamma, 4096, seed=44)
        mapped = base.features @ linalg.rotation_matrix(gamma).T
        worst = max(worst, float(np.abs(rot.features - mapped).max()))
        if not np.array_equal(base.labels, rot.labels):
            return False, "labels changed under rotation"
    return worst <= 1e-12, f"max coordinate deviation {worst:.3e}"


def check_adam_null_first_step():
    oracle = optim.GradOracle(
        dim=3, fn=lambda theta: (float(theta @ theta), 2.0 * theta)
    )
    theta0 = np.array([1.0, -2.0, 0.5])
    traj = optim.adam_run(oracle, theta0, 0.1, 0.9, 0.999, 1e-8, steps=3)
    dev = np.abs(traj.thetas[1] - theta0).max()
    return dev == 0.0, f"first step displacement {dev:.3e}"


def check_closed_form_small():
    ok, detail = crit_01_closed_form_vs_mc(n_samples=10**5, n_dirs=4, se_budget=5.0)
    return ok, detail


def check_gd_equivariance_small():
    arch, theta0 = model.make_full_two_layer(2, 8, seed=51)
    worst = 0.0
    for momentum in (0.0, 0.9):
        base, rot, q = _coupled_runs(
            "gd", np.pi / 5, arch, theta0, n=256, steps=30, momentum=momentum
        )
        worst = max(worst, analysis.equivariance_residual(rot, base, q))
    return worst <= 1e-9, f"max residual {worst:.3e}"


def check_egop_invariance_small():
    ok, detail = crit_06_egop_invariance(steps=50, m=6, n=512)
    return ok, detail


def check_coupled_basis_diagnostic():
    """Both eigendecomposition routes agree columnwise up to sign and both
    respect the deterministic sign convention."""
    rng = np.random.default_rng(7)
    p = 6
    base_mat = rng.normal(size=(p, p))
    a_quad = base_mat @ base_mat.T + np.diag(np.linspace(0.5, 3.0, p))
    oracle0 = optim.GradOracle(
        dim=p, fn=lambda theta: (0.5 * float(theta @ a_quad @ theta), a_quad @ theta)
    )
    rot = rng.normal(size=(p, p))
    q_full, _ = np.linalg.qr(rot)
    oracle_rot = optim.GradOracle(
        dim=p,
        fn=lambda theta: (
            0.5 * float((q_full @ theta) @ a_quad @ (q_full @ theta)),
            q_full.T @ (a_quad @ (q_full @ theta)),
        ),
    )
    spec = egop.SamplingSpec(scale=1.0, seed=77)
    points = egop.sample_probe_points(spec, 400, p)
    est0 = egop.EgopEstimate(egop.egop_from_points(oracle0, points), 400, spec)
    estr = egop.EgopEstimate(
        egop.egop_from_points(oracle_rot, points @ q_full), 400, spec
    )
    v0 = egop.egop_basis(est0)
    vr = egop.egop_basis(estr)
    coupled = egop.coupled_basis(v0, q_full)
    dots = np.abs((vr * coupled).sum(axis=0))
    if np.abs(dots - 1.0).max() > 1e-10:
        return False, f"column alignment broke: worst |dot| {dots.min():.12f}"
    for v in (v0, vr):
        idx = np.abs(v).argmax(axis=0)
        if (v[idx, np.arange(p)] <= 0.0).any():
            return False, "sign convention violated in an eigenbasis"
    return True, f"worst column alignment {dots.min():.12f}"


def check_shampoo_fast():
    return crit_07_shampoo_equivariance()


CHECKS_FAST = [
    ("eig-reconstruction", check_eig_reconstruction),
    ("eig-sign-convention", check_eig_sign_convention),
    ("rotation-inverse", check_rotation_inverse),
    ("dataset-equivariance", check_dataset_equivariance),
    ("assumption-instances", crit_10_assumption_instances),
    ("closed-form-vs-mc-small", check_closed_form_small),
    ("adam-null-first-step", check_adam_null_first_step),
    ("gd-equivariance-small", check_gd_equivariance_small),
    ("egop-invariance-small", check_egop_invariance_small),
    ("coupled-basis-diagnostic", check_coupled_basis_diagnostic),
    ("shampoo-equivariance", check_shampoo_fast),
    ("component-mass-bound", crit_08_component_mass_bound),
    ("egop-estimator-sanity", crit_11_egop_estimator),
]

CHECKS_FULL_EXTRA = [
    ("closed-form-vs-mc", crit_01_closed_form_vs_mc),
    ("sign-pattern", crit_02_sign_pattern),
    ("diagonal-convergence", crit_03_diagonal_convergence),
    ("gd-equivariance", crit_04_gd_equivariance),
    ("adaptive-witness", crit_05_adaptive_witness),
    ("egop-invariance", crit_06_egop_invariance),
    ("gradient-check", crit_09_gradient_check),
]


def run_suite(name: str) -> list[CheckResult]:
    if name == "fast":
        checks = CHECKS_FAST
    elif name == "full":
        checks = CHECKS_FAST + CHECKS_FULL_EXTRA
    else:
        raise ValueError(f"unknown suite {name!r}; expected 'fast' or 'full'")
    results = []
    for label, fn in checks:
        start = time.perf_counter()
        try:
            ok, detail = fn()
        except Exception as exc:  # a crashed check is a failed check
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        results.append(CheckResult(label, ok, detail, time.perf_counter() - start))
    return results
