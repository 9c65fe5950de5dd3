"""Averaged d-q model of a three-phase boost-type PWM rectifier.

The plant state is x = (x_p, P, Q) where x_p = V_o^2 is the squared DC-bus
voltage, P the instantaneous active power and Q the instantaneous reactive
power drawn from the grid.  With L_s = L/(sqrt(3)*E), r_s = r_L/(sqrt(3)*E)
and w = 2*pi*f the averaged dynamics are

    dx_p/dt = -2*x_p/(R_l*C) + (3/C)*P
    dP/dt   = -(r_s/L_s)*P - w*Q + e_d/L_s - (D_d/L_s)*V_o
    dQ/dt   =  w*P + (r_s/L_s)*Q + (D_q/L_s)*V_o

where (D_d, D_q) are the averaged duty-cycle components.  Grouping the
duty-cycle terms into virtual controls decouples the power axes:

    dP/dt = -(r_s/L_s)*P + u_p      u_p = (e_d - L_s*w*Q - D_d*V_o)/L_s
    dQ/dt = +(r_s/L_s)*Q + u_q      u_q = (L_s*w*P + D_q*V_o)/L_s

Differentiating the x_p row and substituting the P row gives the
second-order voltage dynamics used by the voltage controller,

    d2x_p/dt2 = a_pn*dx_p/dt + b_pn*u_p + c_pn*z + w1,   z = P

with nominal coefficients a_pn = -2/(R_l*C), b_pn = 3/C and
c_pn = -3*r_s/(L_s*C); w1 lumps the coefficient variations
w1 = da*dx_p/dt + db*u_p + dc*z.  The reactive axis is first order,

    dx_q/dt = d_qn*x_q + u_q + g,   d_qn = r_s/L_s = r_L/L,   g = dd*x_q

(the alternative rate-form lumping g = dd*dx_q/dt is kept behind a flag;
it does not cancel exactly against the realized plant and the residual is
deliberate).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from ._accel import maybe_njit

SQRT3 = math.sqrt(3.0)


class DomainError(ValueError):
    """A physical parameter is outside its admissible domain."""


class SingularOperatingPoint(ValueError):
    """An operation was requested at a point where it is undefined (V_o <= 0)."""


class ConfigError(ValueError):
    """A configuration value or combination is invalid; message names it."""


class DivergenceError(RuntimeError):
    """The integration produced a non-finite or negative-x_p state.

    Carries the first offending step index, its time, and the signal name.
    """

    def __init__(self, step: int, time: float, signal: str):
        self.step = step
        self.time = time
        self.signal = signal
        super().__init__(
            f"simulation diverged at step {step} (t = {time:.6g} s): "
            f"signal {signal!r} became invalid")


@dataclass(frozen=True)
class RectifierParams:
    """Physical plant parameters.

    All values strictly positive; ``validate`` raises :class:`DomainError`
    naming the offending field otherwise.
    """

    E: float = 311.0        # grid phase-voltage amplitude, V
    f: float = 60.0         # grid frequency, Hz
    L: float = 0.012        # line inductance, H
    r_L: float = 0.1        # line resistance, ohm
    C: float = 3.3e-3       # DC-bus capacitance, F
    R_l: float = 200.0      # nominal load resistance, ohm

    def validate(self) -> "RectifierParams":
        for name in ("E", "f", "L", "r_L", "C", "R_l"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value)):
                raise DomainError(f"plant parameter {name} must be a finite number")
            if value <= 0.0:
                raise DomainError(f"plant parameter {name} must be strictly positive")
        return self


@dataclass(frozen=True)
class DerivedCoefficients:
    """Model coefficients derived from :class:`RectifierParams`."""

    L_s: float        # scaled inductance L/(sqrt(3)*E), s
    r_s: float        # scaled resistance r_L/(sqrt(3)*E)
    omega: float      # grid angular frequency, rad/s
    a_pn: float       # voltage-loop damping -2/(R_l*C), 1/s
    b_pn: float       # voltage-loop input gain 3/C, 1/(s*W) per V^2
    c_pn: float       # voltage-loop power coupling -3*r_s/(L_s*C), 1/s^2
    d_qn: float       # reactive-loop (unstable) pole r_s/L_s = r_L/L, 1/s


def derive_coefficients(params: RectifierParams) -> DerivedCoefficients:
    """Compute the derived model coefficients for a validated parameter set."""
    params.validate()
    scale = SQRT3 * params.E
    L_s = params.L / scale
    r_s = params.r_L / scale
    return DerivedCoefficients(
        L_s=L_s,
        r_s=r_s,
        omega=2.0 * math.pi * params.f,
        a_pn=-2.0 / (params.R_l * params.C),
        b_pn=3.0 / params.C,
        c_pn=-3.0 * r_s / (L_s * params.C),
        d_qn=r_s / L_s,
    )


@dataclass(frozen=True)
class PlantState:
    """Instantaneous plant state."""

    x_p: float   # squared DC-bus voltage, V^2
    P: float     # active power, W
    Q: float     # reactive power, var

    @property
    def V_o(self) -> float:
        """DC-bus voltage; x_p < 0 is an integration fault, not a state."""
        if self.x_p < 0.0:
            raise DomainError("x_p is negative: integration fault")
        return math.sqrt(self.x_p)


@dataclass(frozen=True)
class DisturbanceSpec:
    """Additive coefficient variations and their declared bounds.

    ``delta_a``, ``delta_b``, ``delta_c`` perturb the second-order voltage
    dynamics; ``delta_d`` perturbs the reactive pole.  ``rho_p``/``rho_q``
    bound the lumped disturbances |w1| < rho_p, |g| < rho_q; the engine
    flags runtime violations when the bounds are positive.
    ``g_uses_rate`` switches the *reported/compensated* g from dd*x_q
    (exact for the realized plant) to the rate form dd*dx_q/dt.
    """

    delta_a: float = 0.0
    delta_b: float = 0.0
    delta_c: float = 0.0
    delta_d: float = 0.0
    g_uses_rate: bool = False

    def any_active(self) -> bool:
        return (self.delta_a != 0.0 or self.delta_b != 0.0
                or self.delta_c != 0.0 or self.delta_d != 0.0)


# --- scalar dynamics kernels (shared by the public ops and the sim loop) ---

@maybe_njit
def _voltage_rate(x_p, P, R_l_true, C, delta_a):
    # dx_p/dt with the true load; +delta_a*x_p realizes the a-coefficient
    # variation exactly (its time derivative contributes delta_a*dx_p/dt
    # to the second-order form).
    return (-2.0 / (R_l_true * C) + delta_a) * x_p + (3.0 / C) * P


@maybe_njit
def _power_rates(P, Q, rs_over_ls, d_q_true, u_p, u_q, xi_p):
    # Decoupled virtual-control form; xi_p = (db*u_p + dc*z)/b_pn injects
    # the b/c coefficient variations so the composed second-order dynamics
    # carry exactly b_pn+db and c_pn+dc.
    dP = -rs_over_ls * P + u_p + xi_p
    dQ = d_q_true * Q + u_q
    return dP, dQ


def plant_derivative(state: PlantState, duties: tuple[float, float],
                     coeffs: DerivedCoefficients, params: RectifierParams,
                     R_l_true: float | None = None) -> tuple[float, float, float]:
    """Full state derivative under duty-cycle inputs (D_d, D_q).

    Kept for the duty-recovery round trip; the simulation loop integrates
    the decoupled virtual-control form instead.
    """
    if R_l_true is None:
        R_l_true = params.R_l
    if R_l_true <= 0.0:
        raise DomainError("R_l_true must be strictly positive")
    D_d, D_q = duties
    V_o = state.V_o
    dx_p = -2.0 * state.x_p / (R_l_true * params.C) + (3.0 / params.C) * state.P
    dP = (-(coeffs.r_s / coeffs.L_s) * state.P - coeffs.omega * state.Q
          + params.E / coeffs.L_s - (D_d / coeffs.L_s) * V_o)
    dQ = (coeffs.omega * state.P + (coeffs.r_s / coeffs.L_s) * state.Q
          + (D_q / coeffs.L_s) * V_o)
    return dx_p, dP, dQ


def virtual_to_state_derivatives(state: PlantState, u_p: float, u_q: float,
                                 coeffs: DerivedCoefficients, params: RectifierParams,
                                 R_l_true: float | None = None) -> tuple[float, float, float]:
    """State derivative under the decoupled virtual controls (u_p, u_q)."""
    if R_l_true is None:
        R_l_true = params.R_l
    if R_l_true <= 0.0:
        raise DomainError("R_l_true must be strictly positive")
    dx_p = _voltage_rate(state.x_p, state.P, R_l_true, params.C, 0.0)
    dP, dQ = _power_rates(state.P, state.Q, coeffs.r_s / coeffs.L_s,
                          coeffs.d_qn, u_p, u_q, 0.0)
    return dx_p, dP, dQ


def lumped_disturbances(spec: DisturbanceSpec, xdot_p: float, u_p: float,
                        z: float, x_q: float, xdot_q: float = 0.0) -> tuple[float, float]:
    """Lumped disturbance values (w1, g) for the given signals.

    w1 = da*dx_p/dt + db*u_p + dc*z always; g is dd*x_q by default or
    dd*dx_q/dt when ``spec.g_uses_rate`` (the caller supplies xdot_q then).
    """
    w1 = spec.delta_a * xdot_p + spec.delta_b * u_p + spec.delta_c * z
    g = spec.delta_d * (xdot_q if spec.g_uses_rate else x_q)
    return w1, g


def equilibrium_active_power(x_p: float, R_l_true: float, C: float) -> float:
    """Active power holding x_p constant: P* = 2*x_p/(3*R_l).

    Built from the same float expressions as the integrator's voltage rate
    so that the rate evaluates to exactly 0.0 at (x_p, P*).
    """
    if R_l_true <= 0.0:
        raise DomainError("R_l_true must be strictly positive")
    if C <= 0.0:
        raise DomainError("C must be strictly positive")
    return (2.0 / (R_l_true * C)) * x_p / (3.0 / C)


def equilibrium_duties(x_p: float, Q: float, params: RectifierParams,
                       coeffs: DerivedCoefficients) -> tuple[float, float]:
    """Duty cycles (D_d, D_q) holding (x_p, P*, Q) stationary."""
    if x_p <= 0.0:
        raise SingularOperatingPoint("equilibrium duties need x_p > 0")
    P = equilibrium_active_power(x_p, params.R_l, params.C)
    V_o = math.sqrt(x_p)
    D_d = (params.E - coeffs.L_s * coeffs.omega * Q - coeffs.r_s * P) / V_o
    D_q = -(coeffs.L_s * coeffs.omega * P + coeffs.r_s * Q) / V_o
    return D_d, D_q
