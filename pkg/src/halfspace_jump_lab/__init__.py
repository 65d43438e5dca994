"""Quadrature and Monte Carlo tools for jump processes on the half-space whose
jump kernel degenerates (or blows up) near the boundary.

Modules:
    kernel        model kernel, envelope, domains
    quad          adaptive Gauss-Kronrod engine
    profiles      one-variable test functions of the height coordinate
    nonlocal_ops  constant C(alpha, p), principal-value operator, Dirichlet form
    sim           path simulator (thinning + absorption)
    potential     estimators built on the simulator
    verify        acceptance checks
    cli           command-line front end
"""

from __future__ import annotations

__version__ = "0.1.0"

from .errors import (CoincidentPoints, ConstraintViolation, DegenerateSample, DivergentIntegrand,  # noqa: F401
                     EmptyFunction, EnvelopeSearchFailure, LabError, NonIntegrableProfile,
                     ParameterOutOfRange, ToleranceNotMet, UsageError)
from .kernel import BoxDomain, KernelParams, jump_kernel, kernel_envelope, model_B  # noqa: F401
from .nonlocal_ops import (constant_C, dirichlet_energy, hardy_ratio, pv_apply,  # noqa: F401
                           truncated_op)
from .profiles import PowerProfile, smooth_bump, triangle_bump  # noqa: F401
from .quad import QuadSpec  # noqa: F401
from .sim import SimConfig, estimate, run_until_exit, simulate  # noqa: F401
