"""Exact-oracle laboratory for DDPM coefficient design on low-dimensional targets."""

from .analytic import (
    DiagGaussianLaw,
    chain_kl_upper_bound,
    conditional_step_kl,
    diag_gaussian_kl,
    forward_marginal_law,
    propagate_reverse_law,
    terminal_kl,
    theorem2_lower_bound,
)
from .covering import PointCloud, greedy_epsilon_net, intrinsic_dim_estimate
from .kernels import BACKEND
from .metrics import TvEstimate, mc_tv_diag_gaussians
from .sampler import ReverseRunConfig, empirical_block_moments, run_reverse
from .schedules import (
    CoefficientDesign,
    Schedule,
    build_linear_schedule,
    build_paper_schedule,
    perturbed_design,
    simple_design,
    star_design,
)
from .targets import DegenerateGaussian, PointMixture, exact_oracle, make_perturbed_oracle

__version__ = "0.1.0"
