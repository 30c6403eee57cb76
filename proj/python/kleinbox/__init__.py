"""Quantized Klein tunneling lab.

Continuum Dirac box with a potential step, its dimer-chain analog, synthetic
reflection spectroscopy and the parameter fits that invert it.
"""

from ._kleinbox import *  # noqa: F401,F403
from ._kleinbox import (  # noqa: F401
    ConfigError,
    ConvergenceError,
    DomainError,
    KleinboxError,
    LevelCountMismatch,
)

__version__ = "0.1.0"
