"""Experiment sweeps. Each returns ``(columns, rows)`` ready for CSV.

Every grid point gets the child seed ``mix(master_seed, label)`` where
``label`` spells out the point's parameters, so reordering or trimming a
grid leaves every remaining row unchanged. Rows come back in grid order
whatever the number of worker threads.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields

import numpy as np

from .. import analytic
from ..analytic import DiagGaussianLaw
from ..covering import PointCloud, cover_radius, greedy_epsilon_net, grid_cloud, intrinsic_dim_estimate, is_cover
from ..metrics import mc_tv_diag_gaussians
from ..sampler import ReverseRunConfig, run_reverse
from ..schedules import DESIGNS, build_linear_schedule, build_paper_schedule, perturbed_design
from ..seeding import mix
from ..targets import DegenerateGaussian, forward_marginal_sample, make_perturbed_oracle
from .config import ConfigError
from .csvio import read_points_csv


def make_schedule(cfg, T):
    name = cfg["schedule"]
    if name == "linear":
        return build_linear_schedule(T, cfg["beta_min"], cfg["beta_max"])
    if name == "paper":
        return build_paper_schedule(T, cfg["c0"], cfg["c1"])
    raise ConfigError(f"unknown schedule {name!r} (use 'linear' or 'paper')")


def make_design(name, schedule):
    try:
        return DESIGNS[name](schedule)
    except KeyError:
        raise ConfigError(f"unknown design {name!r} (use 'star' or 'simple')") from None


def _pmap(fn, items, threads):
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _error_text(exc):
    return f"{type(exc).__name__}: {exc}"


@dataclass
class SweepRecord:
    design_name: str
    schedule_name: str
    T: int
    d: int
    k: int
    eps_score: float
    seed: int
    kl_exact: float = math.nan
    tv_estimate: float = math.nan
    tv_stderr: float = math.nan
    step_kl_sum: float = math.nan
    init_kl: float = math.nan
    runtime_ms: float = 0.0
    error: str = ""


SWEEP_COLUMNS = [f.name for f in fields(SweepRecord)]


def _gaussian_record(cfg, design_name, T, d, k, master_seed, tag):
    label = f"{tag}|design={design_name}|schedule={cfg['schedule']}|T={T}|d={d}|k={k}"
    rec = SweepRecord(design_name, cfg["schedule"], T, d, k, 0.0, mix(master_seed, label))
    start = time.perf_counter()
    try:
        s = make_schedule(cfg, T)
        des = make_design(design_name, s)
        q1 = analytic.forward_marginal_law(s, 1, k, d)
        p1 = analytic.propagate_reverse_law(s, des, k, d, 1)
        rec.kl_exact = analytic.diag_gaussian_kl(q1, p1)
        bound = analytic.chain_kl_upper_bound(s, des, k, d)
        rec.init_kl, rec.step_kl_sum = bound.init_kl, bound.step_sum
        if cfg["tv_samples"] > 0:
            tv = mc_tv_diag_gaussians(q1, p1, cfg["tv_samples"], rec.seed)
            rec.tv_estimate, rec.tv_stderr = tv.value, tv.stderr
    except ConfigError:
        raise
    except Exception as exc:  # recorded per row; the sweep continues
        rec.error = _error_text(exc)
    if cfg.get("timing", False):
        rec.runtime_ms = (time.perf_counter() - start) * 1e3
    return rec


def run_figure1_sweep(cfg, master_seed=0, threads=1):
    """Exact KL(q_1 || p_1), MC TV and the chain-rule terms over designs x T x d."""
    grid = [(des, T, d) for des in cfg["designs"] for T in cfg["T"] for d in cfg["d"]]
    recs = _pmap(lambda p: _gaussian_record(cfg, p[0], p[1], p[2], cfg["k"], master_seed, "figure1"), grid, threads)
    return SWEEP_COLUMNS, [asdict(r) for r in recs]


def loglog_slope(x, y) -> float:
    """Least-squares slope of log y against log x."""
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])


def run_rate_sweep(cfg, master_seed=0, threads=1):
    """Exact KL(q_1 || p_1) against T; also returns the log-log slope."""
    recs = _pmap(
        lambda T: _gaussian_record(cfg, cfg["design"], T, cfg["d"], cfg["k"], master_seed, "rate"), cfg["T"], threads
    )
    ok = [r for r in recs if not r.error and r.kl_exact > 0]
    slope = loglog_slope([r.T for r in ok], [r.kl_exact for r in ok]) if len(ok) >= 2 else math.nan
    return SWEEP_COLUMNS, [asdict(r) for r in recs], slope


THEOREM2_COLUMNS = [
    "schedule_name",
    "T",
    "d",
    "k",
    "t",
    "eta_shift",
    "sigma_scale",
    "step_kl",
    "step_kl_on",
    "step_kl_off",
    "lower_bound",
    "difference",
    "error",
]


def theorem2_steps(cfg):
    T = cfg["T"]
    ts = [t for t in cfg["t"] if t != 0]
    return ts or [2, T // 2, T]


def _with_anchor(axis, anchor):
    """Snap the grid value nearest ``anchor`` onto it, or insert it if the range covers it."""
    axis = np.array(axis, dtype=float)
    i = int(np.argmin(np.abs(axis - anchor)))
    if abs(axis[i] - anchor) <= 1e-12 * max(1.0, abs(anchor)):
        axis[i] = anchor
    elif axis.min() < anchor < axis.max():
        axis = np.sort(np.append(axis, anchor))
    return axis


def run_theorem2_grid(cfg, master_seed=0, threads=1):
    """Per-step expected KL against the d-linear lower bound on a coefficient grid."""
    T, d, k = cfg["T"], cfg["d"], cfg["k"]
    if 2 * k > d:
        raise ConfigError("the lower bound is only claimed for k <= d/2")
    s = make_schedule(cfg, T)
    star = make_design("star", s)
    if not 0 < cfg["sigma_scale_min"] <= cfg["sigma_scale_max"]:
        raise ConfigError("need 0 < sigma_scale_min <= sigma_scale_max")
    shifts = _with_anchor(np.linspace(cfg["eta_shift_min"], cfg["eta_shift_max"], cfg["eta_shift_points"]), 0.0)
    # scale factors are spaced geometrically, so [0.5, 2] is symmetric about 1
    scales = _with_anchor(np.geomspace(cfg["sigma_scale_min"], cfg["sigma_scale_max"], cfg["sigma_scale_points"]), 1.0)
    grid = [(t, float(a), float(b)) for t in theorem2_steps(cfg) for a in shifts for b in scales]

    def point(p):
        t, shift, scale = p
        row = {"schedule_name": s.name, "T": T, "d": d, "k": k, "t": t, "eta_shift": shift, "sigma_scale": scale}
        try:
            des = perturbed_design(star, shift, scale)
            terms = analytic.step_kl_terms(s, des, k, d, t)
            lb = analytic.theorem2_lower_bound(s, des, t, d)
            row.update(step_kl=terms.total, step_kl_on=terms.on, step_kl_off=terms.off, lower_bound=lb)
            row["difference"] = terms.total - lb
        except Exception as exc:
            row["error"] = _error_text(exc)
        return row

    return THEOREM2_COLUMNS, _pmap(point, grid, threads)


PERTURB_COLUMNS = [
    "eps",
    "model",
    "design_name",
    "schedule_name",
    "T",
    "d",
    "k",
    "seed",
    "eps_score_mc",
    "tv_fit",
    "tv_fit_stderr",
    "kl_fit",
    "fit_residual",
    "tv_exact_law",
    "runtime_ms",
    "error",
]


def fit_block_law(samples, k) -> tuple[DiagGaussianLaw, float]:
    """Per-coordinate mean plus one variance per block.

    The residual is the largest relative deviation of a coordinate's own
    variance from its block variance.
    """
    mu = samples.mean(axis=0)
    c = samples - mu
    var = np.mean(c * c, axis=0)
    on, off = float(var[:k].mean()), float(var[k:].mean())
    blocks = np.where(np.arange(var.size) < k, on, off)
    resid = float(np.max(np.abs(var - blocks) / blocks))
    return DiagGaussianLaw(k, samples.shape[1], on, off, mu), resid


def run_perturbation_sweep(cfg, master_seed=0, threads=1, trajectory_n=0):
    """TV between q_1 and a block-Gaussian fit to Y_1 under a biased score.

    All eps values share the reverse-run seed and the bias directions, so
    the rows differ only through eps. Returns ``(columns, rows, trajectory)``
    where ``trajectory`` is a recorded run of ``trajectory_n`` chains at the
    first eps (None when ``trajectory_n`` is 0).
    """
    T, d, k = cfg["T"], cfg["d"], cfg["k"]
    s = make_schedule(cfg, T)
    des = make_design(cfg["design"], s)
    target = DegenerateGaussian(k, d)
    q1 = analytic.forward_marginal_law(s, 1, k, d)
    tag = f"perturb|design={des.name}|schedule={s.name}|T={T}|d={d}|k={k}|model={cfg['model']}"
    run_seed, oracle_seed, tv_seed = (mix(master_seed, f"{tag}|{part}") for part in ("run", "oracle", "tv"))
    exact_tv = math.nan
    if cfg["tv_samples"] > 0:
        exact_tv = mc_tv_diag_gaussians(q1, analytic.propagate_reverse_law(s, des, k, d, 1), cfg["tv_samples"], tv_seed).value
    rows = []
    for eps in cfg["eps"]:
        row = {"eps": eps, "model": cfg["model"], "design_name": des.name, "schedule_name": s.name,
               "T": T, "d": d, "k": k, "seed": run_seed, "tv_exact_law": exact_tv}
        start = time.perf_counter()
        try:
            oracle = make_perturbed_oracle(target, s, eps, cfg["model"], oracle_seed)
            run = ReverseRunConfig(s, des, oracle, cfg["n"], 1, run_seed, chunk_size=cfg["chunk_size"], threads=threads)
            y1 = run_reverse(run).samples
            row["eps_score_mc"] = _score_error_mc(target, s, oracle, cfg["n"], mix(master_seed, f"{tag}|score"))
            fit, row["fit_residual"] = fit_block_law(y1, k)
            row["kl_fit"] = analytic.diag_gaussian_kl(q1, fit)
            if cfg["tv_samples"] > 0:
                tv = mc_tv_diag_gaussians(fit, q1, cfg["tv_samples"], tv_seed, threads=threads)
                row["tv_fit"], row["tv_fit_stderr"] = tv.value, tv.stderr
        except Exception as exc:
            row["error"] = _error_text(exc)
        if cfg.get("timing", False):
            row["runtime_ms"] = (time.perf_counter() - start) * 1e3
        rows.append(row)
    traj = None
    if trajectory_n > 0:
        oracle = make_perturbed_oracle(target, s, cfg["eps"][0], cfg["model"], oracle_seed)
        traj = run_reverse(ReverseRunConfig(s, des, oracle, trajectory_n, 1, run_seed, record_trajectory=True))
    return PERTURB_COLUMNS, rows, traj


def _score_error_mc(target, s, oracle, n, seed, steps=None):
    """Root of the step-averaged E||s_t - s_t*||^2 over x ~ q_t, by Monte Carlo.

    Uses at most 2000 points per step and a handful of steps.
    """
    steps = steps or sorted({1, max(1, s.T // 4), max(1, s.T // 2), s.T})
    m = min(n, 2000)
    acc = 0.0
    for t in steps:
        x = forward_marginal_sample(target, s, t, m, mix(seed, t))
        e = oracle(t, x) - target.exact_score(s, t, x)
        acc += float(np.mean(np.sum(e * e, axis=1)))
    return math.sqrt(acc / len(steps))


COVERING_COLUMNS = ["n", "d", "radius", "T", "c_eps", "C_cover", "eps", "net_size", "cover_radius", "covers", "k_estimate"]


def run_covering(cfg, master_seed=0, threads=1):
    """Greedy eps-net of a CSV or synthetic grid cloud and its dimension estimate.

    Returns ``(columns, rows, net_indices)``.
    """
    if cfg["points"]:
        cloud = PointCloud(read_points_csv(cfg["points"]))
    else:
        cloud = grid_cloud(cfg["grid_r"], cfg["grid_per_side"], cfg["grid_d"], cfg["grid_side"])
    T, c_eps, C_cover = cfg["T"], cfg["c_eps"], cfg["C_cover"]
    eps = float(T) ** (-c_eps)
    net = greedy_epsilon_net(cloud, eps)
    row = {
        "n": cloud.n,
        "d": cloud.points.shape[1],
        "radius": cloud.radius,
        "T": T,
        "c_eps": c_eps,
        "C_cover": C_cover,
        "eps": eps,
        "net_size": net.size,
        "cover_radius": cover_radius(cloud, net),
        "covers": is_cover(cloud, net, eps),
        "k_estimate": intrinsic_dim_estimate(cloud, T, c_eps, C_cover),
    }
    return COVERING_COLUMNS, [row], net
