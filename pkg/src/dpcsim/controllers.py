"""Backstepping direct-power controllers for the rectifier voltage model.

Voltage loop (second-order plant d2x_p/dt2 = a*dx_p/dt + b*u_p + c*z + w1):

    e_v = x_p - x_p_ref                tracking error
    alpha = dx_p_ref/dt - k_v*e_v      virtual control for dx_p/dt
    e_s = dx_p/dt - alpha              virtual-control error
    u_p = (1/b)*(-a*dx_p/dt - c*z - w1_comp + dalpha/dt - k_s*e_s - e_v)

which closes the loop to de_v/dt = e_s - k_v*e_v, de_s/dt = -k_s*e_s - e_v
when the compensation w1_comp matches the true w1.  The adaptive variant
replaces the known a with an estimate a_hat driven by one of two update
rules (both integrate the estimate state a_hat; a_tilde = a_pn - a_hat):

    derived:  da_hat/dt = +gamma * dx_p/dt * e_s
    code:     da_hat/dt = +gamma * e_v

The candidate functions V2 = (e_v^2 + e_s^2)/2 and
V4 = V2 + a_tilde^2/(2*gamma) decay along disturbance-free closed-loop
trajectories (dV/dt = -k_v*e_v^2 - k_s*e_s^2).

Reactive loop (first-order unstable plant dx_q/dt = d*x_q + u_q + g):

    e_q = x_q - x_q_ref
    u_q = -d*x_q - k_q*e_q + dx_q_ref/dt - g_comp

closing the loop to de_q/dt = -k_q*e_q (+ g - g_comp).

Disturbance compensation modes: ``none`` (w1_comp = g_comp = 0), ``oracle``
(caller supplies the exact values), ``robust-bound``
(rho*sat(e/eps) with boundary layer eps = 1e-3*rho).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from ._accel import maybe_njit
from .model import ConfigError, DerivedCoefficients, DomainError

DIST_MODES = ("none", "oracle", "robust-bound")
ADAPTATION_VARIANTS = ("derived", "code")
ESTIMATE_SOURCES = ("estimate-hat", "estimate-tilde")

# boundary layer of the robust saturation, as a fraction of the bound
ROBUST_LAYER_FRACTION = 1e-3


@dataclass(frozen=True)
class ControllerGains:
    """Controller gains, bounds, and mode switches."""

    k_v: float = 500.0              # voltage-error gain, 1/s
    k_s: float = 500.0              # virtual-error gain, 1/s
    k_q: float = 500.0              # reactive-error gain, 1/s
    gamma: float = 1e-3             # adaptation gain
    rho_p: float = 0.5              # declared |w1| bound
    rho_q: float = 0.5              # declared |g| bound
    disturbance_mode: str = "none"
    adaptation_variant: str = "code"
    up_estimate_source: str = "estimate-hat"
    freeze_estimate: bool = False   # hold a_hat constant (equivalence tests)

    def validate(self, adaptive: bool = False) -> "ControllerGains":
        for name in ("k_v", "k_s", "k_q"):
            if not getattr(self, name) > 0.0:
                raise ConfigError(f"gain {name} must be strictly positive")
        if adaptive and not self.freeze_estimate and not self.gamma > 0.0:
            raise ConfigError("gain gamma must be strictly positive for adaptive runs")
        if self.gamma < 0.0:
            raise ConfigError("gain gamma must not be negative")
        for name in ("rho_p", "rho_q"):
            if getattr(self, name) < 0.0:
                raise ConfigError(f"bound {name} must not be negative")
        if self.disturbance_mode not in DIST_MODES:
            raise ConfigError(
                f"disturbance_mode must be one of {DIST_MODES}, got {self.disturbance_mode!r}")
        if self.disturbance_mode == "robust-bound" and not (self.rho_p > 0.0 and self.rho_q > 0.0):
            raise ConfigError("robust-bound compensation needs positive rho_p and rho_q")
        if self.adaptation_variant not in ADAPTATION_VARIANTS:
            raise ConfigError(
                f"adaptation_variant must be one of {ADAPTATION_VARIANTS}, "
                f"got {self.adaptation_variant!r}")
        if self.up_estimate_source not in ESTIMATE_SOURCES:
            raise ConfigError(
                f"up_estimate_source must be one of {ESTIMATE_SOURCES}, "
                f"got {self.up_estimate_source!r}")
        return self


@dataclass(frozen=True)
class VoltageTrackingState:
    """Voltage-loop errors for one control step."""

    e_v: float     # x_p tracking error, V^2
    alpha: float   # virtual control for dx_p/dt
    e_s: float     # virtual-control error


@dataclass(frozen=True)
class ReactiveTrackingState:
    """Reactive-loop error for one control step."""

    e_q: float     # x_q tracking error, var


@dataclass
class AdaptiveEstimate:
    """Adaptation state for the voltage-loop a-coefficient.

    ``a_tilde`` is a diagnostic slot the harness may fill with
    a_true - a_hat when it knows the true coefficient; the controller
    itself never reads it.
    """

    a_hat: float
    a_tilde: float = field(default=math.nan)


# --- scalar control laws (shared by the public ops and the sim loop) ---

@maybe_njit
def _sat(x):
    if x > 1.0:
        return 1.0
    if x < -1.0:
        return -1.0
    return x


@maybe_njit
def _voltage_errors(x_p, xdot_p, x_p_ref, xdot_p_ref, k_v):
    e_v = x_p - x_p_ref
    alpha = xdot_p_ref - k_v * e_v
    e_s = xdot_p - alpha
    return e_v, alpha, e_s


@maybe_njit
def _voltage_law(xdot_p, z, e_v, e_s, alpha_dot, a_coef, b_coef, c_coef, k_s, w1_comp):
    return (-a_coef * xdot_p - c_coef * z - w1_comp + alpha_dot
            - k_s * e_s - e_v) / b_coef


@maybe_njit
def _reactive_law(x_q, e_q, xdot_q_ref, d_coef, k_q, g_comp):
    return -d_coef * x_q - k_q * e_q + xdot_q_ref - g_comp


@maybe_njit
def _robust_term(err, rho):
    # rho*sat(err/eps), boundary layer eps = ROBUST_LAYER_FRACTION*rho
    return rho * _sat(err / (1e-3 * rho))


@maybe_njit
def _adaptation_rate(variant_is_code, gamma, xdot_p, e_s, e_v):
    # estimate state is a_hat; both rules are written for da_hat/dt
    if variant_is_code:
        return gamma * e_v
    return gamma * xdot_p * e_s


def _compensation_w1(gains: ControllerGains, e_s: float, w1_oracle) -> float:
    if gains.disturbance_mode == "none":
        return 0.0
    if gains.disturbance_mode == "oracle":
        if w1_oracle is None:
            raise ConfigError("disturbance_mode 'oracle' needs a w1 oracle value")
        return float(w1_oracle)
    return _robust_term(e_s, gains.rho_p)


def bsc_voltage_step(x_p: float, xdot_p: float, x_p_ref: float,
                     xdot_p_ref: float, xddot_p_ref: float, z: float,
                     coeffs: DerivedCoefficients, gains: ControllerGains,
                     w1_oracle: float | None = None) -> tuple[float, VoltageTrackingState]:
    """One voltage-loop control step with the known nominal coefficient."""
    e_v, alpha, e_s = _voltage_errors(x_p, xdot_p, x_p_ref, xdot_p_ref, gains.k_v)
    alpha_dot = xddot_p_ref - gains.k_v * (xdot_p - xdot_p_ref)
    w1_comp = _compensation_w1(gains, e_s, w1_oracle)
    u_p = _voltage_law(xdot_p, z, e_v, e_s, alpha_dot,
                       coeffs.a_pn, coeffs.b_pn, coeffs.c_pn, gains.k_s, w1_comp)
    return u_p, VoltageTrackingState(e_v=e_v, alpha=alpha, e_s=e_s)


def adaptive_voltage_step(x_p: float, xdot_p: float, x_p_ref: float,
                          xdot_p_ref: float, xddot_p_ref: float, z: float,
                          coeffs: DerivedCoefficients, gains: ControllerGains,
                          estimate: AdaptiveEstimate,
                          w1_oracle: float | None = None,
                          ) -> tuple[float, VoltageTrackingState, float]:
    """One adaptive voltage-loop step; returns the estimate rate as well.

    The caller integrates a_hat with the same step as the plant.  With
    ``gains.freeze_estimate`` the returned rate is 0 and u_p computed at
    a_hat = a_pn is bit-identical to :func:`bsc_voltage_step`.
    """
    e_v, alpha, e_s = _voltage_errors(x_p, xdot_p, x_p_ref, xdot_p_ref, gains.k_v)
    alpha_dot = xddot_p_ref - gains.k_v * (xdot_p - xdot_p_ref)
    if gains.up_estimate_source == "estimate-tilde":
        a_used = coeffs.a_pn - estimate.a_hat
    else:
        a_used = estimate.a_hat
    w1_comp = _compensation_w1(gains, e_s, w1_oracle)
    u_p = _voltage_law(xdot_p, z, e_v, e_s, alpha_dot,
                       a_used, coeffs.b_pn, coeffs.c_pn, gains.k_s, w1_comp)
    if gains.freeze_estimate:
        a_hat_dot = 0.0
    else:
        a_hat_dot = _adaptation_rate(gains.adaptation_variant == "code",
                                     gains.gamma, xdot_p, e_s, e_v)
    return u_p, VoltageTrackingState(e_v=e_v, alpha=alpha, e_s=e_s), a_hat_dot


def bsc_reactive_step(x_q: float, x_q_ref: float, xdot_q_ref: float,
                      coeffs: DerivedCoefficients, gains: ControllerGains,
                      g_oracle: float | None = None) -> tuple[float, ReactiveTrackingState]:
    """One reactive-loop control step."""
    e_q = x_q - x_q_ref
    if gains.disturbance_mode == "none":
        g_comp = 0.0
    elif gains.disturbance_mode == "oracle":
        if g_oracle is None:
            raise ConfigError("disturbance_mode 'oracle' needs a g oracle value")
        g_comp = float(g_oracle)
    else:
        g_comp = _robust_term(e_q, gains.rho_q)
    u_q = _reactive_law(x_q, e_q, xdot_q_ref, coeffs.d_qn, gains.k_q, g_comp)
    return u_q, ReactiveTrackingState(e_q=e_q)


def estimate_is_physical(a_hat: float) -> bool:
    """Whether a_hat maps to a positive load resistance (a_hat < 0)."""
    return a_hat < 0.0


def estimate_load(a_hat: float, C: float) -> float:
    """Load resistance implied by the estimate: R = -2/(a_hat*C).

    A non-negative a_hat has no physical load behind it; the result is NaN
    and the caller treats it as a flagged, non-fatal signal.
    """
    if C <= 0.0:
        raise DomainError("C must be strictly positive")
    if not estimate_is_physical(a_hat):
        return math.nan
    return -2.0 / (a_hat * C)


def with_frozen_estimate(gains: ControllerGains) -> ControllerGains:
    """Copy of the gains with the estimate held constant."""
    return replace(gains, freeze_estimate=True)
