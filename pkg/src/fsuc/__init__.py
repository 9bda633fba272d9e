"""Frequency-secure unit commitment toolkit.

Builds day-ahead unit-commitment MILPs with RoCoF, quasi-steady-state and
frequency-nadir security constraints, optimizes primary-frequency-control
droop gains, and sizes secondary-frequency-control reserve from historical
data with copula models under a Wasserstein distributionally robust chance
constraint.
"""

__version__ = "0.1.0"


class FsucError(Exception):
    """Base class for all domain errors raised by this package."""


from .kernels import BACKEND as KERNEL_BACKEND  # noqa: E402

__all__ = ["FsucError", "KERNEL_BACKEND", "__version__"]
