"""Step-response, comparison, and stability metrics over simulation traces.

Definitions (fixed; tests pin them):

* A :class:`StepEvent` is one breakpoint of a scenario profile, assessed on
  an output signal: reference steps on their tracked output, load steps on
  the output voltage (regulation events, ``from_value == to_value``).  Each
  event's window runs from its instant to the next event on any channel
  (or the end of the run).
* ``settling_time`` is the first instant from which ``|y - to| <=
  band_pct/100 * |to|`` holds for the remainder of the window, measured
  from the event instant (scan from the window's end).  A window whose
  final sample is out of band is *not settled*.
* ``overshoot_pct`` is the largest excursion past the target in the step's
  direction of travel, as a percentage of the step magnitude ``|to -
  from|`` (of ``|to|`` for zero-magnitude regulation events, where the
  excursion is two-sided).  ``undershoot_pct`` is the largest excursion
  back past the target *after* the response first reaches it; the approach
  itself is not undershoot.
* ``steady_state_error`` is the signed ``y - to`` at the window's final
  sample.
* :func:`lyapunov_check` forward-differences the stored Lyapunov column
  (``V2``, or ``V4`` on adaptive runs) and compares it with the analytic
  decrease rate ``-k_v e_v^2 - k_s e_s^2``.  On a forward-Euler trace the
  forward difference carries a structural bias of relative size ``h*k/2``
  (the discrete map's second-order term), so match quality is resolution-
  limited by the trace's own step size, not by the implementation.
  Difference windows spanning a profile breakpoint mix two regimes and are
  excluded (windows ``k-1`` and ``k`` at each event index ``k``).
* :func:`estimate_convergence` opens its window at the last load-profile
  step and reports the first instant from which the load estimate stays
  within ``band_frac`` of the target (default: the true load over that
  window) for the rest of the run.  Non-physical estimates (``a_hat >=
  0``) count as out of band.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .controllers import ControllerGains
from .engine import ScenarioProfile, Trace


class MetricUnavailable(ValueError):
    """The requested metric is undefined for this trace (e.g. estimate
    convergence on a non-adaptive run)."""


class StepEvent(NamedTuple):
    time: float
    end_time: float
    channel: str      # "v_ref" | "q_ref" | "load"
    signal: str       # trace column assessed: "V_o" | "Q"
    from_value: float
    to_value: float


@dataclass(frozen=True)
class StepMetrics:
    event: StepEvent
    band_pct: float
    settled: bool
    settling_time: float        # seconds from the event; nan when not settled
    overshoot_pct: float
    undershoot_pct: float
    steady_state_error: float


def events_from_scenario(scenario: ScenarioProfile, *, initial_v: float = 0.0,
                         initial_q: float = 0.0) -> tuple[StepEvent, ...]:
    """All step events of a scenario, windows bounded by the global event list.

    ``initial_v``/``initial_q`` are the outputs' values at t=0 (the square
    root of the initial ``x_p`` and the initial ``Q``), used as the startup
    events' ``from_value``.
    """
    raw: list[tuple[float, str, str, float, float]] = []
    prev = initial_v
    for t, v in scenario.v_ref:
        raw.append((t, "v_ref", "V_o", prev, v))
        prev = v
    prev = initial_q
    for t, q in scenario.q_ref:
        raw.append((t, "q_ref", "Q", prev, q))
        prev = q
    for t, _ in scenario.load[1:]:
        v_now = scenario.value_at(scenario.v_ref, t)
        raw.append((t, "load", "V_o", v_now, v_now))

    order = {"v_ref": 0, "q_ref": 1, "load": 2}
    raw.sort(key=lambda r: (r[0], order[r[1]]))
    times = sorted({t for t, *_ in raw})
    events = []
    for t, channel, signal, frm, to in raw:
        later = [u for u in times if u > t]
        end = later[0] if later else scenario.duration
        events.append(StepEvent(t, end, channel, signal, frm, to))
    return tuple(events)


def _window(t: np.ndarray, event: StepEvent) -> tuple[int, int]:
    if len(t) < 2:
        return 0, len(t)
    h = t[1] - t[0]
    i0 = int(np.searchsorted(t, event.time - 0.5 * h))
    if event.end_time >= t[-1] - 0.5 * h:
        i1 = len(t)
    else:
        i1 = int(np.searchsorted(t, event.end_time - 0.5 * h))
    return i0, max(i1, i0 + 1)


def step_metrics(t: np.ndarray, y: np.ndarray, event: StepEvent,
                 band_pct: float = 1.0) -> StepMetrics:
    """Assess one step event on the samples ``(t, y)``."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    i0, i1 = _window(t, event)
    tw = t[i0:i1]
    yw = y[i0:i1]
    if yw.size == 0:
        raise MetricUnavailable(
            f"event at t = {event.time:g} s has no samples in its window")
    to = event.to_value
    span = abs(to - event.from_value)
    band = band_pct / 100.0 * abs(to)

    out_of_band = ~(np.abs(yw - to) <= band)   # nan-safe: nan counts as out
    if not out_of_band.any():
        settled, settling_time = True, 0.0
    else:
        last_bad = int(np.flatnonzero(out_of_band)[-1])
        if last_bad == len(yw) - 1:
            settled, settling_time = False, math.nan
        else:
            settled, settling_time = True, float(tw[last_bad + 1] - event.time)

    dev = yw - to
    if span > 0.0:
        dirn = 1.0 if to > event.from_value else -1.0
        over = float(np.nanmax(dev * dirn, initial=0.0))
        overshoot = max(over, 0.0) / span * 100.0
        crossed = np.flatnonzero(dev * dirn >= 0.0)
        if crossed.size:
            back = float(np.nanmax(-dev[crossed[0]:] * dirn, initial=0.0))
            undershoot = max(back, 0.0) / span * 100.0
        else:
            undershoot = 0.0
    else:
        peak = float(np.nanmax(np.abs(dev), initial=0.0))
        if peak == 0.0:
            overshoot = 0.0
        elif to != 0.0:
            overshoot = peak / abs(to) * 100.0
        else:
            overshoot = math.nan
        undershoot = 0.0

    return StepMetrics(event=event, band_pct=band_pct, settled=settled,
                       settling_time=settling_time, overshoot_pct=overshoot,
                       undershoot_pct=undershoot,
                       steady_state_error=float(yw[-1] - to))


def trace_step_metrics(trace: Trace, band_pct: float = 1.0) -> tuple[StepMetrics, ...]:
    """Step metrics for every scenario event of a completed run."""
    x_p0, _, q0 = trace.config.initial_state
    events = events_from_scenario(trace.config.scenario,
                                  initial_v=math.sqrt(x_p0), initial_q=q0)
    return tuple(step_metrics(trace.t, trace.column(ev.signal), ev, band_pct)
                 for ev in events)


@dataclass(frozen=True)
class LyapunovReport:
    function: str               # "V2" or "V4"
    samples: int                # difference windows evaluated
    max_fd: float               # largest forward difference seen (<= floor when clean)
    decrease_violations: int
    first_violation_step: int | None
    decrease_floor: float
    match_relative_error: float  # worst |fd - analytic| / |fd| where |fd| is resolvable
    match_samples: int
    match_floor: float

    @property
    def nonincreasing(self) -> bool:
        return self.decrease_violations == 0


def _event_indices(scenario: ScenarioProfile) -> list[int]:
    h = scenario.step_size
    idx = []
    for pts in (scenario.v_ref, scenario.q_ref, scenario.load):
        for t, _ in pts:
            if t > 0.0:
                q = t / h
                r = round(q)
                idx.append(int(r) if abs(q - r) <= 1e-6 else int(math.ceil(q)))
    return sorted(set(idx))


def lyapunov_check(trace: Trace, gains: ControllerGains | None = None, *,
                   decrease_floor_frac: float = 1e-9,
                   match_floor_frac: float = 1e-6) -> LyapunovReport:
    """Verify the stored Lyapunov function decreases at the analytic rate.

    Uses ``V4`` for adaptive runs and ``V2`` otherwise; the analytic rate
    is evaluated with ``gains`` (default: the gains the trace was run
    with).  Floors are fractions of the largest difference magnitude:
    differences above ``decrease_floor`` count as decrease violations, and
    the analytic-rate match is evaluated only where the difference is
    resolvable above ``match_floor`` (tiny differences are float-
    quantization noise of the stored function, not dynamics).
    """
    adaptive = trace.config.controller == "adaptive"
    name = "V4" if adaptive else "V2"
    V = trace.column(name)
    if not np.isfinite(V).all():
        raise MetricUnavailable(
            f"{name} is not finite on this trace (adaptive runs need gamma > 0 for V4)")
    scen = trace.config.scenario
    h = scen.step_size
    n = len(V) - 1
    if n < 1:
        raise MetricUnavailable("trace too short for difference analysis")
    fd = np.diff(V) / h

    if gains is None:
        gains = trace.config.gains
    e_v = trace.e_v
    e_s = trace.e_s
    expected = -(gains.k_v * e_v * e_v + gains.k_s * e_s * e_s)[:-1]

    mask = np.ones(n, dtype=bool)
    for ev in _event_indices(scen):
        for k in (ev - 1, ev):
            if 0 <= k < n:
                mask[k] = False

    fdm = fd[mask]
    if fdm.size == 0:
        raise MetricUnavailable("no difference windows left after event exclusion")
    scale = float(np.max(np.abs(fdm)))
    decrease_floor = decrease_floor_frac * scale
    bad = fdm > decrease_floor
    violations = int(bad.sum())
    first = None
    if violations:
        orig = np.flatnonzero(mask)
        first = int(orig[np.flatnonzero(bad)[0]])

    match_floor = match_floor_frac * scale
    resolvable = mask & (np.abs(fd) > match_floor)
    if resolvable.any():
        rel = np.abs(fd[resolvable] - expected[resolvable]) / np.abs(fd[resolvable])
        match_err = float(rel.max())
        match_n = int(resolvable.sum())
    else:
        match_err, match_n = 0.0, 0

    return LyapunovReport(function=name, samples=int(fdm.size),
                          max_fd=float(fdm.max()),
                          decrease_violations=violations,
                          first_violation_step=first,
                          decrease_floor=decrease_floor,
                          match_relative_error=match_err,
                          match_samples=match_n,
                          match_floor=match_floor)


@dataclass(frozen=True)
class ConvergenceResult:
    converged: bool
    time: float                 # first instant of lasting in-band agreement; nan otherwise
    target: float               # load value the estimate is judged against
    band_frac: float
    final_relative_error: float


def estimate_convergence(trace: Trace, target: float | None = None,
                         band_frac: float = 0.10) -> ConvergenceResult:
    """When (if ever) the load estimate locks onto the target load.

    The window opens at the last load-profile step (t = 0 for a constant
    load) and runs to the end of the trace; ``target`` defaults to the true
    load over that window.  ``time`` is the first instant from which the
    relative error stays within ``band_frac`` for the rest of the run.
    Non-physical estimates (``a_hat >= 0``) count as out of band.  Raises
    :class:`MetricUnavailable` on non-adaptive traces, which carry no
    estimate.
    """
    if trace.config.controller != "adaptive":
        raise MetricUnavailable("estimate convergence is undefined for a non-adaptive run")
    load_profile = trace.config.scenario.load
    t_open = load_profile[-1][0]
    if target is None:
        target = load_profile[-1][1]
    t = trace.t
    i0 = int(np.searchsorted(t, t_open - 0.25 * trace.config.scenario.step_size))
    rel = np.abs(trace.R_est[i0:] - target) / abs(target)
    out = ~(rel <= band_frac)      # nan (non-physical estimate) counts as out
    if not out.any():
        return ConvergenceResult(True, float(t[i0]), target, band_frac, float(rel[-1]))
    last_bad = int(np.flatnonzero(out)[-1])
    if last_bad == len(rel) - 1:
        return ConvergenceResult(False, math.nan, target, band_frac, float(rel[-1]))
    return ConvergenceResult(True, float(t[i0 + last_bad + 1]), target, band_frac,
                             float(rel[-1]))


@dataclass(frozen=True)
class ComparisonRow:
    event: StepEvent
    bsc: StepMetrics
    adaptive: StepMetrics
    settling_ratio: float       # bsc settling time / adaptive settling time


def comparison_table(bsc_trace: Trace, adaptive_trace: Trace,
                     band_pct: float = 1.0) -> tuple[ComparisonRow, ...]:
    """Per-event pairing of both controllers' step metrics on one scenario."""
    if bsc_trace.config.scenario != adaptive_trace.config.scenario:
        raise MetricUnavailable("comparison requires traces from one shared scenario")
    rows = []
    for mb, ma in zip(trace_step_metrics(bsc_trace, band_pct),
                      trace_step_metrics(adaptive_trace, band_pct)):
        if mb.settled and ma.settled and ma.settling_time > 0.0:
            ratio = mb.settling_time / ma.settling_time
        elif mb.settled and ma.settled:
            ratio = math.inf if mb.settling_time > 0.0 else 1.0
        else:
            ratio = math.nan
        rows.append(ComparisonRow(event=mb.event, bsc=mb, adaptive=ma,
                                  settling_ratio=ratio))
    return tuple(rows)


def format_comparison_table(rows: Sequence[ComparisonRow]) -> str:
    """Fixed-width text table of a controller comparison."""
    header = (f"{'t_event':>8} {'channel':>8} {'signal':>6} "
              f"{'bsc_settle_ms':>14} {'adap_settle_ms':>15} {'ratio':>7} "
              f"{'bsc_over_%':>11} {'adap_over_%':>12} {'adap_under_%':>13}")
    lines = [header, "-" * len(header)]
    for r in rows:
        def ms(x: float) -> str:
            return f"{x * 1e3:.3f}" if math.isfinite(x) else "unsettled"
        lines.append(
            f"{r.event.time:>8.4f} {r.event.channel:>8} {r.event.signal:>6} "
            f"{ms(r.bsc.settling_time):>14} {ms(r.adaptive.settling_time):>15} "
            f"{r.settling_ratio:>7.3f} "
            f"{r.bsc.overshoot_pct:>11.4f} {r.adaptive.overshoot_pct:>12.4f} "
            f"{r.adaptive.undershoot_pct:>13.4f}")
    return "\n".join(lines)
