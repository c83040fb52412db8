"""Model-adaptive lack-of-fit tests for errors-in-variables regression with validation data."""

from .data import PrimarySample, ValidationSample, load_primary, load_validation, save_primary, save_validation
from .dgp import ModelSpec, generate
from .errors import EivError, InputError, NumericalError
from .estimators import CUBIC, LINEAR, estimate_beta
from .kernels import QUARTIC, BandwidthPlan, KernelSpec
from .mc import McConfig, McResult, bandwidth_sweep, power_curve, run_mc
from .sdr import estimate_B
from .teststat import TestOutcome, fit_null, run_test

__version__ = "0.1.0"

__all__ = [
    "BandwidthPlan", "CUBIC", "EivError", "InputError", "KernelSpec", "LINEAR", "McConfig", "McResult",
    "ModelSpec", "NumericalError", "PrimarySample", "QUARTIC", "TestOutcome", "ValidationSample",
    "bandwidth_sweep", "estimate_B", "estimate_beta", "fit_null", "generate", "load_primary",
    "load_validation", "power_curve", "run_mc", "run_test", "save_primary", "save_validation",
]
