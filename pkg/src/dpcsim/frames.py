"""Reference-frame transforms, instantaneous power, and duty recovery.

The Park transform used throughout is amplitude-invariant: a balanced
phase-a-cosine triple of amplitude A maps to (d, q) = (A, 0) when the
transform angle theta tracks the phase-a peak (theta = w*t).

Instantaneous power in the d-q frame:

    P = e_d*i_d + e_q*i_q
    Q = e_q*i_d - e_d*i_q

Duty-cycle recovery inverts the virtual-control grouping at V_o > 0:

    D_d = (e_d - L_s*w*Q - L_s*u_p)/V_o
    D_q = (L_s*u_q - L_s*w*P)/V_o
"""
from __future__ import annotations

import math
from typing import NamedTuple

from .model import DerivedCoefficients, SingularOperatingPoint

_TWO_THIRDS_PI = 2.0 * math.pi / 3.0


class AbcTriple(NamedTuple):
    a: float
    b: float
    c: float


class DqPair(NamedTuple):
    d: float
    q: float


class PowerPair(NamedTuple):
    P: float   # active power, W
    Q: float   # reactive power, var


def balanced_triple(amplitude: float, theta: float) -> AbcTriple:
    """Balanced three-phase sample at angle theta (phase a peaks at 0)."""
    return AbcTriple(
        amplitude * math.cos(theta),
        amplitude * math.cos(theta - _TWO_THIRDS_PI),
        amplitude * math.cos(theta + _TWO_THIRDS_PI),
    )


def abc_to_dq(triple: AbcTriple, theta: float) -> DqPair:
    """Amplitude-invariant Park transform at angle theta."""
    a, b, c = triple
    cos0 = math.cos(theta)
    cosm = math.cos(theta - _TWO_THIRDS_PI)
    cosp = math.cos(theta + _TWO_THIRDS_PI)
    sin0 = math.sin(theta)
    sinm = math.sin(theta - _TWO_THIRDS_PI)
    sinp = math.sin(theta + _TWO_THIRDS_PI)
    d = (2.0 / 3.0) * (a * cos0 + b * cosm + c * cosp)
    q = -(2.0 / 3.0) * (a * sin0 + b * sinm + c * sinp)
    return DqPair(d, q)


def dq_to_abc(pair: DqPair, theta: float) -> AbcTriple:
    """Inverse Park transform; exact inverse on zero-sequence-free triples."""
    d, q = pair
    return AbcTriple(
        d * math.cos(theta) - q * math.sin(theta),
        d * math.cos(theta - _TWO_THIRDS_PI) - q * math.sin(theta - _TWO_THIRDS_PI),
        d * math.cos(theta + _TWO_THIRDS_PI) - q * math.sin(theta + _TWO_THIRDS_PI),
    )


def instantaneous_power(e: DqPair, i: DqPair) -> PowerPair:
    """Instantaneous active/reactive power from voltage and current d-q pairs."""
    return PowerPair(e.d * i.d + e.q * i.q, e.q * i.d - e.d * i.q)


def recover_duty_cycles(u_p: float, u_q: float, P: float, Q: float, V_o: float,
                        e_d: float, coeffs: DerivedCoefficients) -> tuple[float, float]:
    """Duty cycles realizing the virtual controls at the operating point.

    Raises :class:`SingularOperatingPoint` at V_o <= 0 where the mapping
    is undefined.  Duties are returned unclamped; physical modulation
    limits are the caller's concern.
    """
    if V_o <= 0.0:
        raise SingularOperatingPoint("duty recovery requires V_o > 0")
    D_d = (e_d - coeffs.L_s * coeffs.omega * Q - coeffs.L_s * u_p) / V_o
    D_q = (coeffs.L_s * u_q - coeffs.L_s * coeffs.omega * P) / V_o
    return D_d, D_q


def virtual_controls_from_duties(D_d: float, D_q: float, P: float, Q: float,
                                 V_o: float, e_d: float,
                                 coeffs: DerivedCoefficients) -> tuple[float, float]:
    """Virtual controls produced by duty cycles (inverse of duty recovery)."""
    u_p = (e_d - coeffs.L_s * coeffs.omega * Q - D_d * V_o) / coeffs.L_s
    u_q = (coeffs.L_s * coeffs.omega * P + D_q * V_o) / coeffs.L_s
    return u_p, u_q
