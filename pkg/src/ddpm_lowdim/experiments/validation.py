"""Self-check suite behind ``ddpm-lowdim validate``.

Every check runs at fixed seeds and reports the measured quantity, so two
runs produce identical reports.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .. import analytic
from ..covering import PointCloud, greedy_epsilon_net, grid_cloud, intrinsic_dim_estimate, is_cover
from ..metrics import mc_tv_diag_gaussians
from ..sampler import ReverseRunConfig, block_moment_stderr, empirical_block_moments, run_reverse
from ..schedules import build_linear_schedule, build_paper_schedule, perturbed_design, simple_design, star_design
from ..seeding import mix, rng
from ..targets import DegenerateGaussian, PointMixture, exact_oracle, forward_marginal_sample
from . import config as cfgmod
from .csvio import rows_to_csv
from .sweeps import run_figure1_sweep, run_theorem2_grid


@dataclass
class Check:
    module: str
    name: str
    passed: bool
    measured: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  [{self.module}] {self.name}: {self.measured}"


# -- schedules ---------------------------------------------------------------


def _check_alpha_bar_logspace():
    worst = 0.0
    for T in (2, 100, 1000, 1600):
        for s in (build_paper_schedule(T), build_linear_schedule(T)):
            rel = np.abs(s.alpha_bar_logspace() - s.alpha_bar) / s.alpha_bar
            worst = max(worst, float(rel.max()))
    return worst < 1e-12, f"max relative gap {worst:.3g} (< 1e-12)"


def _check_step_size_bounds():
    ok, worst_ratio = True, 0.0
    for T in (100, 200, 500, 1000, 1600):
        c1 = 4.0
        s = build_paper_schedule(T, 2.0, c1)
        h = c1 * math.log(T) / T
        ok &= bool(np.all(s.alpha >= 1 - h)) and 1 - h >= 0.5
        ratio = s.beta[1:] / (s.alpha[1:] * s.one_minus_alpha_bar[:-1])
        worst_ratio = max(worst_ratio, float(np.max(ratio) / (8 * h)))
    ok &= worst_ratio <= 1.0
    return ok, f"max (1-a_t)/(a_t-ab_t) / (8 c1 log T / T) = {worst_ratio:.3g} (<= 1), alpha_t >= 1 - c1 log T/T >= 1/2"


def _check_star_below_simple():
    worst = -math.inf
    for s in (build_paper_schedule(1000), build_linear_schedule(100), build_linear_schedule(1000)):
        gap = star_design(s).sigma2[1:] - s.beta[1:]
        worst = max(worst, float(gap.max()))
    return worst < 0, f"max_t>=2 (sigma*^2 - (1 - a_t)) = {worst:.3g} (< 0)"


def _check_perturbed_identity():
    s = build_paper_schedule(500)
    base = star_design(s)
    same = perturbed_design(base, 0.0, 1.0)
    ok = np.array_equal(same.eta, base.eta) and np.array_equal(same.sigma2, base.sigma2)
    return ok, "bitwise equal" if ok else "arrays differ"


# -- targets -----------------------------------------------------------------


def _fd_grad(f, x, h=1e-5):
    out = np.empty_like(x)
    for j in range(x.shape[1]):
        e = np.zeros(x.shape[1])
        e[j] = h
        out[:, j] = (f(x + e) - f(x - e)) / (2 * h)
    return out


def _rel_err(a, b):
    return np.linalg.norm(a - b, axis=1) / np.maximum(np.linalg.norm(b, axis=1), 1e-300)


def _mixture(seed, m=5, d=8):
    g = rng(seed)
    w = g.uniform(0.5, 1.5, m)
    return PointMixture(g.standard_normal((m, d)), w / w.sum())


def _check_score_fd(seed):
    s = build_linear_schedule(100)
    worst = 0.0
    pm = _mixture(mix(seed, "pm"))
    dg = DegenerateGaussian(3, 8)
    for t in (2, s.T // 2, s.T):
        x = forward_marginal_sample(pm, s, t, 100, mix(seed, t))
        fd = _fd_grad(lambda z: pm.log_density(s, t, z), x)
        worst = max(worst, float(_rel_err(pm.exact_score(s, t, x), fd).max()))
        y = forward_marginal_sample(dg, s, t, 100, mix(seed, 100 + t))
        fd = _fd_grad(lambda z: dg.log_density(s, t, z), y)[:, 3:]
        worst = max(worst, float(_rel_err(dg.exact_score(s, t, y)[:, 3:], fd).max()))
    return worst < 1e-5, f"max relative error {worst:.3g} (< 1e-5)"


def _check_posterior_identity(seed):
    s = build_linear_schedule(100)
    pm = _mixture(mix(seed, "pm"))
    worst = 0.0
    for t in (2, 50, 100):
        x = forward_marginal_sample(pm, s, t, 200, mix(seed, t))
        via_mean = -(x - math.sqrt(s.ab(t)) * pm.posterior_mean(s, t, x)) / s.omab(t)
        worst = max(worst, float(np.max(np.abs(via_mean - pm.exact_score(s, t, x)) / (1 + np.abs(via_mean)))))
    return worst < 1e-12, f"max scaled gap {worst:.3g} (< 1e-12)"


def _check_tweedie_single_atom(seed):
    s = build_linear_schedule(100)
    atom = rng(seed).standard_normal(6)
    pm = PointMixture(atom[None, :], [1.0])
    ok = True
    for t in (1, 37, 100):
        x = rng(mix(seed, t)).standard_normal((50, 6))
        expect = -(x - math.sqrt(s.ab(t)) * atom) / s.omab(t)
        ok &= np.array_equal(pm.exact_score(s, t, x), expect)
    return ok, "exact equality" if ok else "mismatch"


def _check_forward_moments(seed):
    s = build_linear_schedule(100)
    tg = DegenerateGaussian(3, 7)
    worst = 0.0
    n = 100_000
    for t in (2, 50, 100):
        x = forward_marginal_sample(tg, s, t, n, mix(seed, t))
        v = np.array([1.0] * 3 + [s.omab(t)] * 4)
        m2 = np.mean(x * x, axis=0)
        se = np.std(x * x, axis=0) / math.sqrt(n)
        worst = max(worst, float(np.max(np.abs(m2 - v) / se)))
    return worst < 5, f"max |second moment - implied| = {worst:.3g} stderr (< 5)"


# -- sampler -----------------------------------------------------------------


def _gauss_run(seed, n=100_000, d=16, k=4, T=100, design=star_design, threads=1, chunk_size=8192):
    s = build_linear_schedule(T)
    tg = DegenerateGaussian(k, d)
    cfg = ReverseRunConfig(s, design(s), exact_oracle(tg, s), n, 1, seed, chunk_size=chunk_size, threads=threads)
    return s, run_reverse(cfg).samples


def _check_sampler_determinism(seed):
    _, a = _gauss_run(seed, n=3000, chunk_size=1000)
    _, b = _gauss_run(seed, n=3000, chunk_size=1000)
    _, c = _gauss_run(seed, n=3000, chunk_size=1000, threads=3)
    ok = np.array_equal(a, b) and np.array_equal(a, c)
    return ok, "bitwise identical across reruns and thread counts" if ok else "ensembles differ"


def _check_step_count(seed):
    s = build_linear_schedule(50)
    tg = DegenerateGaussian(2, 5)
    base = exact_oracle(tg, s)
    calls = []

    class Counting:
        d = base.d

        def __call__(self, t, x):
            calls.append((t, x.shape[0]))
            return base(t, x)

    run_reverse(ReverseRunConfig(s, star_design(s), Counting(), 700, 10, seed, chunk_size=256))
    per_traj = sum(m for _, m in calls) / 700
    ok = per_traj == s.T - 10 and sorted({t for t, _ in calls}) == list(range(11, s.T + 1))
    return ok, f"{per_traj:g} score evaluations per trajectory (expected {s.T - 10})"


def _check_mc_vs_analytic(seed):
    s, y = _gauss_run(seed)
    law = analytic.propagate_reverse_law(s, star_design(s), 4, 16, 1)
    mom = empirical_block_moments(y, 4)
    se = block_moment_stderr(y, 4)
    z_on = abs(mom.on_var - law.on_var) / se.on_var
    z_off = abs(mom.off_var - law.off_var) / se.off_var
    z_cross = mom.cross_max / se.cross_max
    ok = z_on < 5 and z_off < 5 and z_cross < 5
    return ok, f"on {z_on:.2f} se, off {z_off:.2f} se, cross {z_cross:.2f} se (each < 5)"


# -- analytic ----------------------------------------------------------------


def _check_star_off_support_exact():
    worst = 0.0
    for s in (build_paper_schedule(1000), build_linear_schedule(100), build_linear_schedule(1000)):
        des = star_design(s)
        ts = np.arange(2, s.T + 1)
        i = ts - 1
        a, omab, omab_prev = s.alpha[i], s.one_minus_alpha_bar[i], s.one_minus_alpha_bar[i - 1]
        rho = omab_prev / omab
        mean_y = (1 - des.eta[i] / omab) / np.sqrt(a)
        mean_x = np.sqrt(a) * rho
        var_y = des.sigma2[i] / a
        var_x = s.beta[i] * rho  # 1 - a_t loses digits when beta_t ~ 1e-8
        worst = max(worst, float(np.max(np.abs(mean_y / mean_x - 1))), float(np.max(np.abs(var_y / var_x - 1))))
    return worst < 1e-10, f"max relative mismatch {worst:.3g} (< 1e-10)"


def theorem2_dominance(T=1000, d=64, k=8, schedule="paper"):
    """Smallest (step KL - lower bound) over the default grid, and the star-point terms."""
    cfg = cfgmod.parse_config_text(f"T = {T}\nd = {d}\nk = {k}\nschedule = {schedule}", cfgmod.THEOREM2)
    _, rows = run_theorem2_grid(cfg)
    if any(r.get("error") for r in rows):
        raise ArithmeticError("grid point failed: " + next(r["error"] for r in rows if r.get("error")))
    worst = min(r["difference"] for r in rows)
    star = [r for r in rows if r["eta_shift"] == 0.0 and r["sigma_scale"] == 1.0]
    if not star:
        raise ValueError("grid does not contain the star point")
    star_lb = max(abs(r["lower_bound"]) for r in star)
    star_off = max(abs(r["step_kl_off"]) for r in star)
    return worst, star_lb, star_off


def _check_theorem2():
    worst, star_lb, star_off = theorem2_dominance()
    ok = worst >= -1e-12 and star_lb <= 1e-12 and star_off <= 1e-12
    return ok, f"min(step KL - bound) = {worst:.3g}; at star: bound {star_lb:.3g}, off-support KL {star_off:.3g}"


def _check_g_inequality():
    z = np.logspace(-6, 6, 10_000)
    slack = (z - np.log(z) - 1) - 0.1 * np.minimum(1.0, (z - 1) ** 2)
    return bool(slack.min() >= 0), f"min slack {slack.min():.3g} (>= 0)"


def _check_chain_decomposition():
    worst = math.inf
    for T in (100, 1000):
        for d in (16, 256):
            for k in (4, 8):
                for sched in (build_linear_schedule(T), build_paper_schedule(T)):
                    for design in (star_design, simple_design):
                        des = design(sched)
                        bound = analytic.chain_kl_upper_bound(sched, des, k, d)
                        worst = min(worst, bound.total - analytic.terminal_kl(sched, des, k, d))
    return worst >= 0, f"min(bound - KL(q1||p1)) = {worst:.3g} (>= 0)"


# -- metrics -----------------------------------------------------------------


def tv_quadrature_1d(v1, v2):
    """0.5 * integral |p - q| for zero-mean 1-d Gaussians, split at the crossings."""
    s = 20 * math.sqrt(max(v1, v2))
    p = lambda x: math.exp(-x * x / (2 * v1)) / math.sqrt(2 * math.pi * v1)
    q = lambda x: math.exp(-x * x / (2 * v2)) / math.sqrt(2 * math.pi * v2)
    pts = []
    if v1 != v2:
        c = math.sqrt(v1 * v2 * math.log(v1 / v2) / (v1 - v2))
        pts = [-c, c]
    val, _ = integrate.quad(lambda x: abs(p(x) - q(x)), -s, s, points=pts, epsabs=1e-10, epsrel=1e-10, limit=200)
    return 0.5 * val


def _check_tv_quadrature(seed):
    g = rng(seed)
    worst = 0.0
    for i in range(20):
        v1, v2 = np.exp(g.uniform(-1.5, 1.5, 2))
        p = analytic.DiagGaussianLaw(1, 1, float(v1), 1.0)
        q = analytic.DiagGaussianLaw(1, 1, float(v2), 1.0)
        est = mc_tv_diag_gaussians(p, q, 20_000, mix(seed, i))
        worst = max(worst, abs(est.value - tv_quadrature_1d(v1, v2)) / est.stderr)
    return worst < 4, f"max |MC - quadrature| = {worst:.2f} stderr (< 4)"


def _check_tv_block_swap(seed):
    p = analytic.DiagGaussianLaw(3, 10, 1.3, 0.7)
    q = analytic.DiagGaussianLaw(3, 10, 1.0, 1.0)
    a = mc_tv_diag_gaussians(p, q, 100_000, seed)
    b = mc_tv_diag_gaussians(p.swapped(), q.swapped(), 100_000, seed)
    z = abs(a.value - b.value) / math.hypot(a.stderr, b.stderr)
    return z < 4, f"|TV - TV(swapped)| = {z:.2f} combined stderr (< 4)"


def _check_tv_stderr_scaling(seed):
    p = analytic.DiagGaussianLaw(2, 6, 1.5, 0.5)
    q = analytic.DiagGaussianLaw(2, 6, 1.0, 1.0)
    ses = [mc_tv_diag_gaussians(p, q, n, seed).stderr for n in (1000, 10_000, 100_000)]
    ratios = [ses[0] / ses[1] / math.sqrt(10), ses[1] / ses[2] / math.sqrt(10)]
    ok = all(0.5 <= r <= 2 for r in ratios)
    return ok, f"stderr ratio / sqrt(10) = {ratios[0]:.3f}, {ratios[1]:.3f} (within [0.5, 2])"


# -- covering ----------------------------------------------------------------


def _check_cover_validity(seed):
    g = rng(seed)
    clouds = [grid_cloud(2, 37, 20), PointCloud(g.uniform(size=(3000, 3)) @ g.standard_normal((3, 30)))]
    ok = True
    for cloud in clouds:
        for eps in (0.05, 0.2, 0.7):
            ok &= is_cover(cloud, greedy_epsilon_net(cloud, eps), eps)
    return ok, "every net covers its cloud" if ok else "a net failed to cover"


def _check_net_monotone(seed):
    cloud = PointCloud(rng(seed).uniform(size=(4000, 2)))
    sizes = [greedy_epsilon_net(cloud, e).size for e in (0.02, 0.05, 0.1, 0.2, 0.5, 1.0)]
    ok = all(a >= b for a, b in zip(sizes, sizes[1:]))
    return ok, f"sizes {sizes} (non-increasing in eps)"


def _check_embedding_invariance(seed):
    base = rng(seed).uniform(size=(2000, 3))
    a = PointCloud(base)
    b = PointCloud(np.hstack([base, np.zeros((2000, 47))]))
    na, nb = greedy_epsilon_net(a, 0.1), greedy_epsilon_net(b, 0.1)
    ka, kb = intrinsic_dim_estimate(a, 10), intrinsic_dim_estimate(b, 10)
    ok = np.array_equal(na, nb) and ka == kb
    return ok, f"net sizes {na.size} vs {nb.size}, estimates {ka:.4f} vs {kb:.4f}"


# -- experiments -------------------------------------------------------------


def _small_figure1(order):
    cfg = cfgmod.parse_config_text("", cfgmod.FIGURE1)
    cfg.update(d=[10, 50][::order], T=[100], tv_samples=2000, timing=False)
    return run_figure1_sweep(cfg, master_seed=11)


def _check_sweep_determinism():
    a = rows_to_csv(*_small_figure1(1))
    b = rows_to_csv(*_small_figure1(1))
    return a == b, "identical CSV bytes" if a == b else "CSV output differs between runs"


def _check_seed_order_independence():
    _, fwd = _small_figure1(1)
    _, rev = _small_figure1(-1)
    key = lambda r: (r["design_name"], r["T"], r["d"])
    ok = sorted(fwd, key=key) == sorted(rev, key=key)
    return ok, "rows unchanged by grid order" if ok else "rows depend on grid order"


def run_validate(seed: int = 20240611) -> list[Check]:
    checks = [
        ("schedules", "alpha_bar log-space vs product", _check_alpha_bar_logspace),
        ("schedules", "step-size bounds (log-growth schedule, T >= 100)", _check_step_size_bounds),
        ("schedules", "star variance strictly below 1 - alpha_t", _check_star_below_simple),
        ("schedules", "perturbed_design(d, 0, 1) == d", _check_perturbed_identity),
        ("targets", "score matches finite-difference gradient", lambda: _check_score_fd(seed)),
        ("targets", "posterior-mean identity", lambda: _check_posterior_identity(seed)),
        ("targets", "single-atom score is exact", lambda: _check_tweedie_single_atom(seed)),
        ("targets", "forward sample second moments", lambda: _check_forward_moments(seed)),
        ("sampler", "determinism and partition independence", lambda: _check_sampler_determinism(seed)),
        ("sampler", "step-count contract", lambda: _check_step_count(seed)),
        ("sampler", "MC moments vs propagated law", lambda: _check_mc_vs_analytic(seed)),
        ("analytic", "star design off-support exactness", _check_star_off_support_exact),
        ("analytic", "per-step KL dominates the d-linear lower bound", _check_theorem2),
        ("analytic", "z - log z - 1 >= 0.1 min(1, (z-1)^2)", _check_g_inequality),
        ("analytic", "chain-rule bound >= KL(q1||p1)", _check_chain_decomposition),
        ("metrics", "MC TV vs 1-d quadrature", lambda: _check_tv_quadrature(seed)),
        ("metrics", "TV invariant under block swap", lambda: _check_tv_block_swap(seed)),
        ("metrics", "stderr scales as 1/sqrt(n)", lambda: _check_tv_stderr_scaling(seed)),
        ("covering", "nets cover at their eps", lambda: _check_cover_validity(seed)),
        ("covering", "net size non-increasing in eps", lambda: _check_net_monotone(seed)),
        ("covering", "zero-padding leaves nets unchanged", lambda: _check_embedding_invariance(seed)),
        ("experiments", "sweep CSV determinism", _check_sweep_determinism),
        ("experiments", "seed derivation independent of grid order", _check_seed_order_independence),
    ]
    report = []
    for module, name, fn in checks:
        try:
            passed, measured = fn()
        except Exception as exc:
            passed, measured = False, f"raised {type(exc).__name__}: {exc}"
        report.append(Check(module, name, bool(passed), measured))
    return report
