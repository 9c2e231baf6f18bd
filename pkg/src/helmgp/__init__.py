"""Gaussian-process reconstruction of 2D currents with Helmholtz-structured priors."""
from .errors import (ConfigError, DataError, HelmGPError, NumericalError,
                     OutOfDomainError, SingularKernelError)
from .se import DerivMultiIndex, ScalarKernelParams, se_eval, se_partial
from .kernels import Family, MatrixKernel, PriorSpec, helmholtz_kernel, velocity_kernel
from .gp import (FieldPosterior, VelocityDataset, log_marginal_likelihood,
                 posterior_derived, posterior_velocity, predict, z_values)

__version__ = "0.1.0"
