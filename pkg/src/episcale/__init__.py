"""Critical SIS/SIR epidemic chains, their branching envelope and diffusion limits."""

from .analytics import (
    EmpiricalDistribution,
    SurvivalCurve,
    harmonic_mean_duration,
    ks_distance,
    ou_survival,
)
from .ctmc import (
    EpidemicOutcome,
    EpidemicParams,
    JumpPath,
    simulate_coupled,
    simulate_envelope,
    simulate_sir,
    simulate_sis,
)
from .diffusion import DiffusionPath, DiffusionSpec, first_passage, integrate, size_of, time_change
from .errors import DomainError, ParameterError, UsageError

__version__ = "0.1.0"

__all__ = [
    "DiffusionPath",
    "DiffusionSpec",
    "DomainError",
    "EmpiricalDistribution",
    "EpidemicOutcome",
    "EpidemicParams",
    "JumpPath",
    "ParameterError",
    "SurvivalCurve",
    "UsageError",
    "first_passage",
    "harmonic_mean_duration",
    "integrate",
    "ks_distance",
    "ou_survival",
    "simulate_coupled",
    "simulate_envelope",
    "simulate_sir",
    "simulate_sis",
    "size_of",
    "time_change",
]
