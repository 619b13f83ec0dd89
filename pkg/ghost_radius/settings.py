# -*- coding: utf-8 -*-
import os
from importlib import import_module
from types import SimpleNamespace


def _load_user_settings():
    # GHOST_SETTINGS_MODULE plays the part of DJANGO_SETTINGS_MODULE: a
    # dotted module path whose GHOST_* attributes override the defaults below.
    module_name = os.environ.get('GHOST_SETTINGS_MODULE')
    if not module_name:
        return SimpleNamespace()
    return import_module(module_name)


user_settings = _load_user_settings()

# Complex zero search
ZERO_SEARCH_MAX_IMAG_MULTIPLIER = getattr(user_settings, 'GHOST_ZERO_SEARCH_MAX_IMAG_MULTIPLIER', 4.0)
ZERO_SEARCH_GRID_DENSITY = getattr(user_settings, 'GHOST_ZERO_SEARCH_GRID_DENSITY', 16)
ZERO_SEARCH_NEWTON_TOL = getattr(user_settings, 'GHOST_ZERO_SEARCH_NEWTON_TOL', 1e-12)
ZERO_SEARCH_MAX_NEWTON_ITERS = getattr(user_settings, 'GHOST_ZERO_SEARCH_MAX_NEWTON_ITERS', 60)
ZERO_SEARCH_MAX_SEEDS = getattr(user_settings, 'GHOST_ZERO_SEARCH_MAX_SEEDS', 200000)
ZERO_SEARCH_MAX_EXPANSIONS = getattr(user_settings, 'GHOST_ZERO_SEARCH_MAX_EXPANSIONS', 3)
CONTOUR_SAMPLES = getattr(user_settings, 'GHOST_CONTOUR_SAMPLES', 2048)
CONTOUR_MAX_REFINEMENTS = getattr(user_settings, 'GHOST_CONTOUR_MAX_REFINEMENTS', 48)

# Radius estimation
RADIUS_BATCH_CAP = getattr(user_settings, 'GHOST_RADIUS_BATCH_CAP', 256)
RADIUS_FD_STEP = getattr(user_settings, 'GHOST_RADIUS_FD_STEP', 1e-4)
CURVATURE_STEP_FRACTION = getattr(user_settings, 'GHOST_CURVATURE_STEP_FRACTION', 1e-3)
KINK_QUANTILE = getattr(user_settings, 'GHOST_KINK_QUANTILE', 0.01)

# Controller
ETA_MAX = getattr(user_settings, 'GHOST_ETA_MAX', 1.0)
RHO_EVERY = getattr(user_settings, 'GHOST_RHO_EVERY', 1)
GRAD_CLIP_THRESHOLD = getattr(user_settings, 'GHOST_GRAD_CLIP_THRESHOLD', 1.0)

# Experiments
DEFAULT_SEEDS = getattr(user_settings, 'GHOST_DEFAULT_SEEDS', (0, 1, 2, 3, 4))
CONVERGED_LOSS = getattr(user_settings, 'GHOST_CONVERGED_LOSS', 0.1)
CONVERGED_MAX_STEPS = getattr(user_settings, 'GHOST_CONVERGED_MAX_STEPS', 2000)
COLLAPSE_THRESHOLD = getattr(user_settings, 'GHOST_COLLAPSE_THRESHOLD', 2.0)
DIVERGENCE_LOSS = getattr(user_settings, 'GHOST_DIVERGENCE_LOSS', 10.0)
SPIKE_STEP = getattr(user_settings, 'GHOST_SPIKE_STEP', 50)
SPIKE_HOLD = getattr(user_settings, 'GHOST_SPIKE_HOLD', 150)

ARCHITECTURES = getattr(user_settings, 'GHOST_ARCHITECTURES', {
    'linear': 'ghost_radius.autonet.linear_spec',
    'mlp_tanh': 'ghost_radius.autonet.mlp_tanh_spec',
    'mlp_relu': 'ghost_radius.autonet.mlp_relu_spec',
    'deep_mlp': 'ghost_radius.autonet.deep_mlp_spec',
    'mlp_ln': 'ghost_radius.autonet.mlp_ln_spec',
    'wide_mlp': 'ghost_radius.autonet.wide_mlp_spec',
    'mlp_gelu': 'ghost_radius.autonet.mlp_gelu_spec',
    'mlp_ria': 'ghost_radius.autonet.mlp_ria_spec',
    'mlp_gaussglu': 'ghost_radius.autonet.mlp_gaussglu_spec',
    'mlp_swiglu': 'ghost_radius.autonet.mlp_swiglu_spec',
})
PHASE_SWEEP_ARCHITECTURES = getattr(user_settings, 'GHOST_PHASE_SWEEP_ARCHITECTURES', (
    'linear', 'mlp_tanh', 'mlp_relu', 'deep_mlp', 'mlp_ln', 'wide_mlp',
))

STEP_POLICIES = getattr(user_settings, 'GHOST_STEP_POLICIES', {
    'plain': 'ghost_radius.controller.PlainPolicy',
    'grad_clip': 'ghost_radius.controller.GradClipPolicy',
    'rho_controller': 'ghost_radius.controller.RadiusClipPolicy',
    'rho_controller_all': 'ghost_radius.controller.NetworkRadiusClipPolicy',
    'target_r': 'ghost_radius.controller.TargetRPolicy',
    'fixed_lr': 'ghost_radius.controller.FixedLRPolicy',
})
