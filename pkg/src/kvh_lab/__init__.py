"""Koopman-van Hove phase-space wavefunction laboratory."""

from . import _backend  # noqa: F401,E402  (sets numba threading defaults)
