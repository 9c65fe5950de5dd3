"""dpcsim: deterministic direct-power-control simulation for a three-phase
PWM rectifier.

Averaged d-q model of a voltage-source PWM rectifier under two
direct-power controllers — a backstepping voltage/reactive-power tracker
and its adaptive extension with online load estimation — integrated with
fixed-step forward Euler.  Everything is deterministic: identical inputs
give bit-identical traces on either arithmetic backend (compiled kernels
via numba, or pure Python; select with the ``DPCSIM_NUMBA`` environment
variable before import).

Layout: :mod:`~dpcsim.model` (plant, coefficients, disturbances),
:mod:`~dpcsim.frames` (abc/dq transforms, powers, duty recovery),
:mod:`~dpcsim.controllers` (control laws, adaptation),
:mod:`~dpcsim.engine` (scenarios, runs, traces), :mod:`~dpcsim.metrics`
(step response, Lyapunov decrease, estimate convergence),
:mod:`~dpcsim.config`/:mod:`~dpcsim.cli` (INI configs, ``dpcsim``
command), :mod:`~dpcsim.trace_io` (exact-round-trip CSV).
"""
from ._accel import BACKEND, HAS_NUMBA, active_backend
from ._kernel import COLUMNS
from .config import (BUNDLED_CONFIGS, SWEEP_PARAMETERS, apply_sweep_value,
                     load_bundled, load_config, load_config_text)
from .controllers import (ADAPTATION_VARIANTS, DIST_MODES, ESTIMATE_SOURCES,
                          AdaptiveEstimate, ControllerGains,
                          ReactiveTrackingState, VoltageTrackingState,
                          adaptive_voltage_step, bsc_reactive_step,
                          bsc_voltage_step, estimate_is_physical,
                          estimate_load, with_frozen_estimate)
from .engine import (CONTROLLER_KINDS, ComparisonResult, ScenarioProfile,
                     SimConfig, Trace, TraceRecord, run_comparison,
                     run_simulation)
from .frames import (AbcTriple, DqPair, PowerPair, abc_to_dq, balanced_triple,
                     dq_to_abc, instantaneous_power, recover_duty_cycles,
                     virtual_controls_from_duties)
from .metrics import (ComparisonRow, ConvergenceResult, LyapunovReport,
                      MetricUnavailable, StepEvent, StepMetrics,
                      comparison_table, estimate_convergence,
                      events_from_scenario, format_comparison_table,
                      lyapunov_check, step_metrics, trace_step_metrics)
from .model import (ConfigError, DerivedCoefficients, DisturbanceSpec,
                    DivergenceError, DomainError, PlantState, RectifierParams,
                    SingularOperatingPoint, derive_coefficients,
                    equilibrium_active_power, equilibrium_duties,
                    lumped_disturbances, plant_derivative,
                    virtual_to_state_derivatives)
from .trace_io import read_trace_csv, write_trace_csv

__version__ = "0.1.0"

__all__ = [
    "ADAPTATION_VARIANTS", "BACKEND", "BUNDLED_CONFIGS", "COLUMNS",
    "CONTROLLER_KINDS", "DIST_MODES", "ESTIMATE_SOURCES", "HAS_NUMBA",
    "SWEEP_PARAMETERS", "AbcTriple", "AdaptiveEstimate", "ComparisonResult",
    "ComparisonRow", "ConfigError", "ControllerGains", "ConvergenceResult",
    "DerivedCoefficients", "DisturbanceSpec", "DivergenceError", "DomainError",
    "DqPair", "LyapunovReport", "MetricUnavailable", "PlantState", "PowerPair",
    "ReactiveTrackingState", "RectifierParams", "ScenarioProfile", "SimConfig",
    "SingularOperatingPoint", "StepEvent", "StepMetrics", "Trace",
    "TraceRecord", "VoltageTrackingState", "abc_to_dq", "active_backend",
    "adaptive_voltage_step", "apply_sweep_value", "balanced_triple",
    "bsc_reactive_step", "bsc_voltage_step", "comparison_table",
    "derive_coefficients", "dq_to_abc", "equilibrium_active_power",
    "equilibrium_duties", "estimate_convergence", "estimate_is_physical",
    "estimate_load", "events_from_scenario", "format_comparison_table",
    "instantaneous_power", "load_bundled", "load_config", "load_config_text",
    "lumped_disturbances", "lyapunov_check", "plant_derivative",
    "read_trace_csv", "recover_duty_cycles", "run_comparison",
    "run_simulation", "step_metrics", "trace_step_metrics",
    "virtual_controls_from_duties", "virtual_to_state_derivatives",
    "with_frozen_estimate", "write_trace_csv",
]
