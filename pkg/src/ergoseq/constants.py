"""Numerical tolerances shared across the package.

Kept in one place so tests and callers can reference the same values.
"""

# linalg kernels
SOLVE_RESIDUAL_TOL = 1e-9
CONDITION_LIMIT = 1e12
SPECTRAL_NORM_RTOL = 1e-8
POWER_MAX_ITER = 10_000
QR_MAX_SWEEPS_PER_EIG = 60
CHI2_ABS_TOL = 1e-10
PSD_PIVOT_TOL = -1e-10

# detector
COV_REGULARIZATION = 1e-9
BELIEF_CLAMP = 1e-12
NORMAL_TOL = 1e-9

# region graph / chains
WEIGHT_FLOOR = 1e-6
ZERO_ENTROPY_TOL = 1e-12
STOCHASTIC_TOL = 1e-8
STATIONARY_TOL = 1e-7
DEFLATE_STATIONARY_TOL = 1e-6
NEGATIVE_CLAMP = -1e-10
SLEM_SLACK = 1e-8
DETAILED_BALANCE_TOL = 1e-7
