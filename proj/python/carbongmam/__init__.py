"""Most probable transition paths and quasi-potentials for the upper-ocean carbonate model."""

from ._core import (
    CarbonSystem,
    ConfigError,
    ConvergenceError,
    DomainError,
    DoubleWellSystem,
    Error,
    GmamConfig,
    LinearSystem,
    ModelParams,
    NoCycleError,
    SimConfig,
    StochasticSystem,
    __version__,
    buffer,
    diffusion,
    drift,
    euler_maruyama,
    find_fixed_point,
    find_limit_cycle,
    geometric_action,
    load_params,
    parse_config,
    parse_params,
    run_transition,
    scan_regimes,
    sigmoid,
    solve,
)

__all__ = [name for name in dir() if not name.startswith("_")] + ["__version__"]
