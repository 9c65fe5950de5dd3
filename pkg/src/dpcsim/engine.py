"""Simulation engine: scenario description, fixed-step runs, trace container.

A scenario is a set of piecewise-constant profiles (voltage reference,
reactive-power reference, load resistance), each given as ``((t0, v0),
(t1, v1), ...)`` with t0 == 0 and strictly increasing times.  Profiles are
left-continuous in the sense that a breakpoint landing exactly on a sample
instant takes effect *at* that sample.

Runs are forward Euler at a fixed step ``step_size`` over ``duration``
seconds, producing ``n + 1`` records at t = k*step_size.  The run is fully
deterministic: same config, same trace, bit for bit, on either arithmetic
backend.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from . import _kernel
from ._accel import active_backend
from .controllers import ControllerGains
from .model import (ConfigError, DerivedCoefficients, DisturbanceSpec,
                    DivergenceError, DomainError, RectifierParams,
                    derive_coefficients)

CONTROLLER_KINDS = ("bsc", "adaptive")

ProfilePoints = tuple[tuple[float, float], ...]

#: relative slack (in units of one step) used when snapping profile
#: breakpoints to the sample grid, absorbing float noise in t = k*h
_GRID_SNAP = 1e-6


def _as_profile(points) -> ProfilePoints:
    out = tuple((float(t), float(v)) for t, v in points)
    if not out:
        raise ConfigError("profile must have at least one (time, value) point")
    return out


def _check_profile(name: str, points: ProfilePoints, positive: bool) -> None:
    if points[0][0] != 0.0:
        raise ConfigError(f"{name} profile must start at t=0 (got t={points[0][0]!r})")
    times = [t for t, _ in points]
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ConfigError(f"{name} profile times must be strictly increasing")
    for t, v in points:
        if not math.isfinite(t) or not math.isfinite(v):
            raise ConfigError(f"{name} profile contains a non-finite entry at t={t!r}")
        if positive and v <= 0.0:
            raise ConfigError(f"{name} profile values must be positive (got {v!r} at t={t!r})")


@dataclass(frozen=True)
class ScenarioProfile:
    """Time grid plus piecewise-constant reference and load profiles."""

    duration: float = 2.5
    step_size: float = 1e-4
    v_ref: ProfilePoints = ((0.0, 1000.0), (1.25, 800.0))
    q_ref: ProfilePoints = ((0.0, 0.0),)
    load: ProfilePoints = ((0.0, 200.0),)

    def __post_init__(self):
        object.__setattr__(self, "v_ref", _as_profile(self.v_ref))
        object.__setattr__(self, "q_ref", _as_profile(self.q_ref))
        object.__setattr__(self, "load", _as_profile(self.load))

    def validate(self) -> None:
        if not (math.isfinite(self.duration) and self.duration >= 0.0):
            raise ConfigError(f"duration must be a finite non-negative time (got {self.duration!r})")
        if not (math.isfinite(self.step_size) and self.step_size > 0.0):
            raise ConfigError(f"step_size must be a finite positive time (got {self.step_size!r})")
        q = self.duration / self.step_size
        if abs(q - round(q)) > max(4.0 * math.ulp(q), 1e-9):
            raise ConfigError(
                f"duration {self.duration!r} is not a whole number of steps of {self.step_size!r}")
        _check_profile("v_ref", self.v_ref, positive=True)
        _check_profile("q_ref", self.q_ref, positive=False)
        _check_profile("load", self.load, positive=True)
        for name, pts in (("v_ref", self.v_ref), ("q_ref", self.q_ref), ("load", self.load)):
            last = pts[-1][0]
            if last > self.duration:
                raise ConfigError(
                    f"{name} profile breakpoint at t={last!r} lies beyond duration {self.duration!r}")

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.step_size))

    def sample(self, points: ProfilePoints) -> np.ndarray:
        """Per-sample values of a piecewise-constant profile on the run grid.

        Breakpoints within ``_GRID_SNAP`` steps of a sample instant snap to
        it; otherwise a breakpoint strictly between samples takes effect at
        the first sample after it.
        """
        n = self.n_steps
        values = np.empty(n + 1)
        starts = []
        for t, _ in points:
            q = t / self.step_size
            r = round(q)
            idx = int(r) if abs(q - r) <= _GRID_SNAP else int(math.ceil(q))
            starts.append(min(max(idx, 0), n + 1))
        values[:starts[0]] = points[0][1]
        for (s, (_, v)), e in zip(zip(starts, points), starts[1:] + [n + 1]):
            values[s:e] = v
        return values

    def value_at(self, points: ProfilePoints, t: float) -> float:
        """Left-continuous profile value at an arbitrary time."""
        if t < points[0][0]:
            raise DomainError(f"time {t!r} precedes the first profile entry "
                              f"at t = {points[0][0]!r}")
        value = points[0][1]
        for tk, v in points:
            if tk <= t:
                value = v
            else:
                break
        return value


@dataclass(frozen=True)
class SimConfig:
    """Everything a run needs: plant, gains, scenario, disturbance, controller."""

    plant: RectifierParams = field(default_factory=RectifierParams)
    gains: ControllerGains = field(default_factory=ControllerGains)
    scenario: ScenarioProfile = field(default_factory=ScenarioProfile)
    disturbance: DisturbanceSpec = field(default_factory=DisturbanceSpec)
    controller: str = "bsc"
    initial_state: tuple[float, float, float] = (0.0, 0.0, 0.0)
    initial_estimate: float | None = None

    def validate(self) -> None:
        if self.controller not in CONTROLLER_KINDS:
            raise ConfigError(
                f"controller must be one of {CONTROLLER_KINDS} (got {self.controller!r})")
        self.plant.validate()
        self.gains.validate(adaptive=self.controller == "adaptive")
        self.scenario.validate()
        x_p0 = self.initial_state[0]
        if x_p0 < 0.0:
            raise ConfigError(f"initial x_p must be non-negative (got {x_p0!r})")
        if self.initial_estimate is not None and not math.isfinite(self.initial_estimate):
            raise ConfigError("initial_estimate must be finite when given")

    def with_controller(self, controller: str, **gain_overrides) -> "SimConfig":
        gains = replace(self.gains, **gain_overrides) if gain_overrides else self.gains
        return replace(self, controller=controller, gains=gains)


class TraceRecord(NamedTuple):
    t: float
    V_o: float
    x_p: float
    P: float
    Q: float
    v_ref: float
    q_ref: float
    load: float
    u_p: float
    u_q: float
    e_v: float
    e_s: float
    e_q: float
    a_hat: float
    R_est: float
    V2: float
    V4: float
    w1: float
    g: float


assert TraceRecord._fields == _kernel.COLUMNS


class Trace:
    """Column-oriented record of one run.

    Wraps an ``(n+1, 19)`` float64 array; supports ``len``, indexing into
    :class:`TraceRecord` views, and per-column ``ndarray`` properties.
    """

    columns = _kernel.COLUMNS

    def __init__(self, data: np.ndarray, config: SimConfig, diag: np.ndarray,
                 backend: str):
        self.data = data
        self.config = config
        self.backend = backend
        self.w1_bound_violations = int(diag[_kernel.DIAG_W1_VIOLATIONS])
        self.g_bound_violations = int(diag[_kernel.DIAG_G_VIOLATIONS])
        self.first_w1_violation_step = (
            int(diag[_kernel.DIAG_FIRST_W1_STEP])
            if diag[_kernel.DIAG_FIRST_W1_STEP] >= 0 else None)
        self.first_g_violation_step = (
            int(diag[_kernel.DIAG_FIRST_G_STEP])
            if diag[_kernel.DIAG_FIRST_G_STEP] >= 0 else None)
        self.estimate_nonphysical_steps = int(diag[_kernel.DIAG_ESTIMATE_NONPHYSICAL])

    def __len__(self) -> int:
        return self.data.shape[0]

    def __getitem__(self, k) -> TraceRecord:
        if isinstance(k, slice):
            raise TypeError("Trace supports integer indexing only; slice trace.data instead")
        return TraceRecord(*self.data[k])

    def __iter__(self) -> Iterator[TraceRecord]:
        for row in self.data:
            yield TraceRecord(*row)

    def column(self, name: str) -> np.ndarray:
        return self.data[:, self.columns.index(name)]

    def __getattr__(self, name: str) -> np.ndarray:
        # column access: trace.V_o, trace.e_v, ... (regular attributes win)
        if name in _kernel.COLUMNS:
            return self.data[:, _kernel.COLUMNS.index(name)]
        raise AttributeError(f"{type(self).__name__} has no attribute {name!r}")

    def at_time(self, t: float) -> TraceRecord:
        """Record at the sample instant nearest to ``t``."""
        h = self.config.scenario.step_size
        k = int(round(t / h))
        k = min(max(k, 0), len(self) - 1)
        return self[k]

    def equals_bitwise(self, other: "Trace") -> bool:
        return (self.data.shape == other.data.shape
                and self.data.tobytes() == other.data.tobytes())


def _mode_code(mode: str) -> int:
    return {"none": _kernel.MODE_NONE,
            "oracle": _kernel.MODE_ORACLE,
            "robust-bound": _kernel.MODE_ROBUST}[mode]


def run_simulation(config: SimConfig) -> Trace:
    """Integrate one closed-loop run and return its trace.

    Raises :class:`DivergenceError` (carrying the first bad step, the time,
    and the offending signal) if any state leaves the finite, physically
    meaningful range; raises :class:`ConfigError` for invalid configs.
    """
    config.validate()
    coeffs = derive_coefficients(config.plant)
    scen = config.scenario
    n = scen.n_steps
    v_ref = scen.sample(scen.v_ref)
    q_ref = scen.sample(scen.q_ref)
    load = scen.sample(scen.load)

    adaptive = config.controller == "adaptive"
    gains = config.gains
    dist = config.disturbance
    a_hat0 = config.initial_estimate if config.initial_estimate is not None else coeffs.a_pn

    out = np.full((n + 1, _kernel.NCOL), np.nan)
    diag = np.full(8, -1, dtype=np.int64)
    diag[_kernel.DIAG_W1_VIOLATIONS] = 0
    diag[_kernel.DIAG_G_VIOLATIONS] = 0
    diag[_kernel.DIAG_ESTIMATE_NONPHYSICAL] = 0

    _kernel._sim_loop(
        n, scen.step_size, v_ref, q_ref, load,
        config.plant.C, coeffs.r_s / coeffs.L_s, coeffs.b_pn, coeffs.c_pn,
        coeffs.d_qn, coeffs.a_pn,
        gains.k_v, gains.k_s, gains.k_q, gains.gamma,
        dist.delta_a, dist.delta_b, dist.delta_c, dist.delta_d,
        dist.g_uses_rate,
        gains.rho_p, gains.rho_q,
        adaptive, gains.adaptation_variant == "code",
        gains.up_estimate_source == "estimate-tilde",
        _mode_code(gains.disturbance_mode), gains.freeze_estimate,
        float(config.initial_state[0]), float(config.initial_state[1]),
        float(config.initial_state[2]), float(a_hat0),
        out, diag)

    if diag[_kernel.DIAG_FAULT_STEP] >= 0:
        step = int(diag[_kernel.DIAG_FAULT_STEP])
        signal = _kernel.FAULT_SIGNALS[int(diag[_kernel.DIAG_FAULT_SIGNAL])]
        raise DivergenceError(step=step, time=step * scen.step_size, signal=signal)

    return Trace(out, config, diag, active_backend())


@dataclass
class ComparisonResult:
    """Paired runs of the non-adaptive and adaptive controllers on one scenario."""

    bsc: Trace | None
    adaptive: Trace | None
    bsc_error: DivergenceError | None = None
    adaptive_error: DivergenceError | None = None

    @property
    def both_completed(self) -> bool:
        return self.bsc is not None and self.adaptive is not None

    def table(self, band_pct: float = 1.0):
        """Per-event metric rows for the pair (requires both runs completed)."""
        from .metrics import MetricUnavailable, comparison_table

        if not self.both_completed:
            missing = "bsc" if self.bsc is None else "adaptive"
            raise MetricUnavailable(f"comparison table needs both traces; "
                                    f"the {missing} run diverged")
        return comparison_table(self.bsc, self.adaptive, band_pct)


def run_comparison(config_bsc: SimConfig, config_adaptive: SimConfig) -> ComparisonResult:
    """Run both controllers on a shared scenario.

    The two configs must agree on scenario, plant, and disturbance so the
    comparison is like for like; a divergence in either run is captured in
    the result rather than raised, so one controller's failure still leaves
    the other's trace available.
    """
    if config_bsc.scenario != config_adaptive.scenario:
        raise ConfigError("comparison requires both configs to share one scenario")
    if config_bsc.plant != config_adaptive.plant:
        raise ConfigError("comparison requires both configs to share one plant")
    if config_bsc.disturbance != config_adaptive.disturbance:
        raise ConfigError("comparison requires both configs to share one disturbance spec")
    if config_bsc.controller != "bsc":
        raise ConfigError("first config of a comparison must use the bsc controller")
    if config_adaptive.controller != "adaptive":
        raise ConfigError("second config of a comparison must use the adaptive controller")

    bsc = adaptive = None
    bsc_err = adaptive_err = None
    try:
        bsc = run_simulation(config_bsc)
    except DivergenceError as exc:
        bsc_err = exc
    try:
        adaptive = run_simulation(config_adaptive)
    except DivergenceError as exc:
        adaptive_err = exc
    return ComparisonResult(bsc=bsc, adaptive=adaptive,
                            bsc_error=bsc_err, adaptive_error=adaptive_err)
