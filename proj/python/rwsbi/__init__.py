"""Random walks with self-blocking immigration.

Thin wrapper around the compiled ``_rwsbi`` extension.
"""

from ._rwsbi import (
    ConfigError,
    DomainError,
    InvalidSpec,
    JumpKernel,
    KernelNotSymmetric,
    KTooLarge,
    RhoSolution,
    RwsbiError,
    UnrealizableSpec,
    VacancySpec,
    asymptotic_R,
    asymptotic_rho0,
    available_suites,
    correlation_exact,
    correlation_montecarlo,
    correlation_series,
    coupling_success_prob,
    kernel,
    reflection_couple,
    run_suite,
    simulate_rwsbi,
    solve_rho,
    ssrw,
    tilde_rho,
    time_grid,
)

__all__ = [name for name in dir() if not name.startswith("_")]
