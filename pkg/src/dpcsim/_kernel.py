"""Fixed-step closed-loop integration kernel.

One source of truth for the per-step arithmetic, shared between the numba
and pure-Python backends via :func:`dpcsim._accel.maybe_njit`; the public
per-step controller/model operations call the same scalar helpers, so a
step-by-step re-simulation through those operations reproduces the kernel
trace bit for bit (guarded by the engine tests).

Forward Euler with step h; sample times are k*h (never accumulated by
repeated addition).  State and controls recorded at step k are the values
*before* the k -> k+1 update; the final row's controls are computed but
never applied.
"""
from __future__ import annotations

import math

from ._accel import maybe_njit
from .controllers import (_adaptation_rate, _reactive_law, _robust_term,
                          _voltage_errors, _voltage_law)
from .model import _power_rates, _voltage_rate

COLUMNS = ("t", "V_o", "x_p", "P", "Q", "v_ref", "q_ref", "load",
           "u_p", "u_q", "e_v", "e_s", "e_q", "a_hat", "R_est",
           "V2", "V4", "w1", "g")
NCOL = len(COLUMNS)

# disturbance-compensation mode codes
MODE_NONE = 0
MODE_ORACLE = 1
MODE_ROBUST = 2

# diag slots
DIAG_FAULT_STEP = 0       # -1 when the run stayed finite
DIAG_FAULT_SIGNAL = 1     # 0 x_p, 1 P, 2 Q, 3 a_hat
DIAG_W1_VIOLATIONS = 2
DIAG_G_VIOLATIONS = 3
DIAG_FIRST_W1_STEP = 4
DIAG_FIRST_G_STEP = 5
DIAG_ESTIMATE_NONPHYSICAL = 6

FAULT_SIGNALS = ("x_p", "P", "Q", "a_hat")


@maybe_njit
def _sim_loop(n, h, v_ref, q_ref, load,
              C, rs_over_ls, b_pn, c_pn, d_qn, a_nom,
              k_v, k_s, k_q, gamma,
              da, db, dc, dd, g_rate_form,
              rho_p, rho_q,
              adaptive, variant_code, source_tilde, dist_mode, freeze,
              x_p0, P0, Q0, a_hat0,
              out, diag):
    x_p = x_p0
    P = P0
    Q = Q0
    a_hat = a_hat0
    for k in range(n + 1):
        t = h * k
        R_true = load[k]
        xp_ref = v_ref[k] * v_ref[k]
        xdot_p = _voltage_rate(x_p, P, R_true, C, da)
        e_v, alpha, e_s = _voltage_errors(x_p, xdot_p, xp_ref, 0.0, k_v)
        alpha_dot = 0.0 - k_v * (xdot_p - 0.0)
        z = P

        if adaptive:
            if source_tilde:
                a_used = a_nom - a_hat
            else:
                a_used = a_hat
        else:
            a_used = a_nom

        if dist_mode == MODE_ORACLE:
            # exact compensation of w1 = da*xdot_p + db*u_p + dc*z solved
            # in closed form (w1 contains u_p itself)
            u_p = _voltage_law(xdot_p, z, e_v, e_s, alpha_dot,
                               a_used + da, b_pn + db, c_pn + dc, k_s, 0.0)
        elif dist_mode == MODE_ROBUST:
            u_p = _voltage_law(xdot_p, z, e_v, e_s, alpha_dot,
                               a_used, b_pn, c_pn, k_s, _robust_term(e_s, rho_p))
        else:
            u_p = _voltage_law(xdot_p, z, e_v, e_s, alpha_dot,
                               a_used, b_pn, c_pn, k_s, 0.0)

        e_q = Q - q_ref[k]
        d_true = d_qn + dd
        if dist_mode == MODE_ORACLE:
            if g_rate_form:
                # g = dd*dx_q/dt also contains u_q; closed-form solve
                base = _reactive_law(Q, e_q, 0.0, d_qn, k_q, 0.0)
                u_q = (base - dd * (d_true * Q)) / (1.0 + dd)
            else:
                u_q = _reactive_law(Q, e_q, 0.0, d_true, k_q, 0.0)
        elif dist_mode == MODE_ROBUST:
            u_q = _reactive_law(Q, e_q, 0.0, d_qn, k_q, _robust_term(e_q, rho_q))
        else:
            u_q = _reactive_law(Q, e_q, 0.0, d_qn, k_q, 0.0)

        if adaptive and not freeze:
            a_hat_dot = _adaptation_rate(variant_code, gamma, xdot_p, e_s, e_v)
        else:
            a_hat_dot = 0.0

        # diagnostics
        w1 = da * xdot_p + db * u_p + dc * z
        xdot_q = d_true * Q + u_q
        if g_rate_form:
            g = dd * xdot_q
        else:
            g = dd * Q
        if rho_p > 0.0 and abs(w1) >= rho_p:
            diag[DIAG_W1_VIOLATIONS] += 1
            if diag[DIAG_FIRST_W1_STEP] < 0:
                diag[DIAG_FIRST_W1_STEP] = k
        if rho_q > 0.0 and abs(g) >= rho_q:
            diag[DIAG_G_VIOLATIONS] += 1
            if diag[DIAG_FIRST_G_STEP] < 0:
                diag[DIAG_FIRST_G_STEP] = k

        V2 = 0.5 * (e_v * e_v + e_s * e_s)
        if adaptive:
            a_true = -2.0 / (R_true * C) + da
            if gamma > 0.0:
                a_til = a_true - a_hat
                V4 = V2 + a_til * a_til / (2.0 * gamma)
            else:
                V4 = math.nan
            if a_hat < 0.0:
                R_est = -2.0 / (a_hat * C)
            else:
                R_est = math.nan
                diag[DIAG_ESTIMATE_NONPHYSICAL] += 1
            a_hat_rec = a_hat
        else:
            V4 = math.nan
            R_est = math.nan
            a_hat_rec = math.nan

        out[k, 0] = t
        out[k, 1] = math.sqrt(x_p)
        out[k, 2] = x_p
        out[k, 3] = P
        out[k, 4] = Q
        out[k, 5] = v_ref[k]
        out[k, 6] = q_ref[k]
        out[k, 7] = R_true
        out[k, 8] = u_p
        out[k, 9] = u_q
        out[k, 10] = e_v
        out[k, 11] = e_s
        out[k, 12] = e_q
        out[k, 13] = a_hat_rec
        out[k, 14] = R_est
        out[k, 15] = V2
        out[k, 16] = V4
        out[k, 17] = w1
        out[k, 18] = g

        if k == n:
            break

        xi_p = (db * u_p + dc * z) / b_pn
        dP, dQ = _power_rates(P, Q, rs_over_ls, d_true, u_p, u_q, xi_p)
        x_p = x_p + h * xdot_p
        P = P + h * dP
        Q = Q + h * dQ
        if adaptive:
            a_hat = a_hat + h * a_hat_dot

        bad = -1
        if not (math.isfinite(x_p) and x_p >= 0.0):
            bad = 0
        elif not math.isfinite(P):
            bad = 1
        elif not math.isfinite(Q):
            bad = 2
        elif adaptive and not math.isfinite(a_hat):
            bad = 3
        if bad >= 0:
            diag[DIAG_FAULT_STEP] = k + 1
            diag[DIAG_FAULT_SIGNAL] = bad
            return
