"""Minibatch sliced-Wasserstein training with explicit a.e. gradients.

Core pieces: discrete measures and sphere sampling (`measures`), a bounded
recursive network class with hand-written parameter Jacobians (`network`),
sorting-based projected Wasserstein losses and their gradients (`swloss`),
plain and projected-noised fixed-step SGD (`sgd`), continuous-time trajectory
diagnostics (`trajectory`), independent brute-force / finite-difference
oracles (`oracle`), and a batch experiment CLI (`cli`).
"""

from .measures import DiscreteMeasure, SampleBatch, project, sample_batch, sample_unit_sphere
from .network import NetworkSpec, forward, jacobian_u, smooth_indicator
from .swloss import (
    alpha_zero,
    assignment_sigma,
    estimate_F,
    estimate_grad_F,
    estimate_K_F,
    grad_phi,
    grad_phi_2,
    grad_w_theta,
    grad_w_theta_2,
    lipschitz_K_f,
    lipschitz_K_w,
    sample_loss_f,
    sorting_permutation,
    w_theta_2,
    w_theta_p,
)
from .sgd import DivergenceError, SGDConfig, Trajectory, project_ball, run, step_plain, step_projected_noised
from .trajectory import InterpolatedPath, criticality_gap, distance_d_c, interpolate, reference_flow

__all__ = [
    "DiscreteMeasure",
    "SampleBatch",
    "project",
    "sample_batch",
    "sample_unit_sphere",
    "NetworkSpec",
    "forward",
    "jacobian_u",
    "smooth_indicator",
    "sorting_permutation",
    "assignment_sigma",
    "w_theta_p",
    "w_theta_2",
    "grad_w_theta",
    "grad_w_theta_2",
    "sample_loss_f",
    "grad_phi",
    "grad_phi_2",
    "estimate_F",
    "estimate_grad_F",
    "lipschitz_K_w",
    "lipschitz_K_f",
    "estimate_K_F",
    "alpha_zero",
    "SGDConfig",
    "Trajectory",
    "DivergenceError",
    "project_ball",
    "run",
    "step_plain",
    "step_projected_noised",
    "InterpolatedPath",
    "interpolate",
    "distance_d_c",
    "reference_flow",
    "criticality_gap",
]
