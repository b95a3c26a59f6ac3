"""Exact first- and second-order statistics of linear Hawkes processes.

Submodules: ``kernel`` (excitation kernels), ``resolvent`` (Psi and Volterra
solves), ``moments`` (closed-form means and covariances), ``simulate``
(exact simulation and Monte Carlo), ``malliavin`` (finite-configuration
functionals and chaos coefficients), ``cli``.
"""

from .errors import (ConsistencyError, HawkesError, HorizonError, NumericalError,
                     StabilityError, UnsupportedKernelError)
from .kernel import (ExponentialKernel, Kernel, ModelParams, PowerLawKernel, TabulatedKernel,
                     kernel_from_dict, load_kernel, zero_kernel)
from .resolvent import Grid, ResolventTable, resolvent, solve_volterra

__version__ = "0.1.0"
