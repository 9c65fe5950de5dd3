"""Step-response metrics, Lyapunov decrease checks, and estimate convergence.

Synthetic signals with hand-computable metrics pin the definitions
(settling scan-from-end, overshoot as a percentage of the step span,
crossing-gated undershoot).  Trace-level values are frozen from oracle
runs of this package's own simulations; the Lyapunov forward-difference
match is resolution-limited by the trace step size (relative bias ~ h*k/2),
which the coarse/fine pair makes visible.
"""
from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest

from dpcsim import (ControllerGains, ScenarioProfile, SimConfig, Trace,
                    run_simulation)
from dpcsim.metrics import (ComparisonRow, MetricUnavailable, StepEvent,
                            StepMetrics, comparison_table,
                            estimate_convergence, events_from_scenario,
                            format_comparison_table, lyapunov_check,
                            step_metrics, trace_step_metrics)

DIAG_UNSET = np.full(8, -1, dtype=np.int64)


def _synthetic_trace(data: np.ndarray, config: SimConfig) -> Trace:
    return Trace(data, config, DIAG_UNSET.copy(), "synthetic")


# ---------------------------------------------------------------------------
# step metrics on synthetic signals


class TestStepMetricsSynthetic:
    def test_first_order_approach_settles_at_grid_point_after_tau_ln100(self):
        tau = 0.01
        t = np.arange(2001) * 1e-4
        y = 10.0 * (1.0 - np.exp(-t / tau))
        m = step_metrics(t, y, StepEvent(0.0, 0.2, "v_ref", "V_o", 0.0, 10.0))
        assert m.settled
        # |y - 10| <= 0.1 from t >= tau*ln(100) = 0.046051...; first grid
        # point at or after that instant is t[461].
        assert m.settling_time == t[461] == 0.0461
        assert m.settling_time == pytest.approx(tau * math.log(100.0), abs=1e-4)
        # monotone approach: no overshoot, and the approach itself is not
        # undershoot (the response never crosses the target).
        assert m.overshoot_pct == 0.0
        assert m.undershoot_pct == 0.0
        assert m.steady_state_error == pytest.approx(-10.0 * math.exp(-20.0), rel=1e-12)

    def test_signal_already_on_target_settles_instantly(self):
        t = np.arange(51) * 0.01
        y = np.full(51, 5.0)
        m = step_metrics(t, y, StepEvent(0.0, 0.5, "v_ref", "V_o", 0.0, 5.0))
        assert m.settled
        assert m.settling_time == 0.0
        assert m.overshoot_pct == 0.0
        assert m.undershoot_pct == 0.0
        assert m.steady_state_error == 0.0

    def test_overshoot_and_undershoot_percentages_of_step_span(self):
        # 0 -> 10 step, peak 12 (20% of span 10), then a dip to 9 after the
        # first target crossing (10% back-excursion).
        t = np.arange(8) * 0.1
        y = np.array([0.0, 12.0, 9.0, 9.5, 10.0, 10.0, 10.0, 10.0])
        m = step_metrics(t, y, StepEvent(0.0, 0.7, "v_ref", "V_o", 0.0, 10.0))
        assert m.settled
        assert m.settling_time == t[4]
        assert m.overshoot_pct == 20.0
        assert m.undershoot_pct == 10.0

    def test_downward_step_measures_excursions_in_direction_of_travel(self):
        # 10 -> 0: the dip to -1 is overshoot (10% of span), the bounce back
        # to +0.2 after the crossing is undershoot (2%).
        t = np.arange(6) * 0.1
        y = np.array([10.0, -1.0, 0.2, 0.0, 0.0, 0.0])
        m = step_metrics(t, y, StepEvent(0.0, 0.5, "v_ref", "V_o", 10.0, 0.0))
        assert m.settled
        assert m.settling_time == t[3]
        assert m.overshoot_pct == 10.0
        assert m.undershoot_pct == 2.0

    def test_zero_span_regulation_event_uses_two_sided_peak_over_target(self):
        # from == to (a load event): overshoot is the two-sided peak
        # excursion as a percentage of the target itself.
        t = np.arange(6) * 0.1
        y = np.array([10.0, 10.5, 10.0, 10.0, 10.0, 10.0])
        m = step_metrics(t, y, StepEvent(0.0, 0.5, "load", "V_o", 10.0, 10.0))
        assert m.settled
        assert m.settling_time == t[2]
        assert m.overshoot_pct == 5.0
        assert m.undershoot_pct == 0.0

    def test_window_whose_final_sample_is_out_of_band_is_not_settled(self):
        t = np.arange(4) * 0.1
        y = np.array([0.0, 10.0, 10.0, 8.0])
        m = step_metrics(t, y, StepEvent(0.0, 0.3, "v_ref", "V_o", 0.0, 10.0))
        assert not m.settled
        assert math.isnan(m.settling_time)
        assert m.steady_state_error == -2.0

    def test_metrics_invariant_under_time_shift(self):
        t = np.arange(8) * 0.1
        y = np.array([0.0, 12.0, 9.0, 9.5, 10.0, 10.0, 10.0, 10.0])
        base = step_metrics(t, y, StepEvent(0.0, 0.7, "v_ref", "V_o", 0.0, 10.0))
        shifted = step_metrics(t + 5.0, y,
                               StepEvent(5.0, 5.7, "v_ref", "V_o", 0.0, 10.0))
        assert shifted.settling_time == pytest.approx(base.settling_time, rel=1e-9)
        assert shifted.overshoot_pct == base.overshoot_pct
        assert shifted.undershoot_pct == base.undershoot_pct
        assert shifted.steady_state_error == base.steady_state_error

    def test_event_beyond_the_sampled_range_is_unavailable(self, canonical_trace):
        with pytest.raises(MetricUnavailable, match="no samples"):
            step_metrics(canonical_trace.t, canonical_trace.V_o,
                         StepEvent(3.0, 3.5, "v_ref", "V_o", 1000.0, 900.0))


# ---------------------------------------------------------------------------
# scenario event extraction


class TestEventsFromScenario:
    def test_canonical_scenario_events(self, canonical_cfg):
        events = events_from_scenario(canonical_cfg.scenario)
        assert events == (
            StepEvent(0.0, 1.25, "v_ref", "V_o", 0.0, 1000.0),
            StepEvent(0.0, 1.25, "q_ref", "Q", 0.0, 0.0),
            StepEvent(1.25, 1.75, "v_ref", "V_o", 1000.0, 800.0),
            StepEvent(1.75, 2.5, "q_ref", "Q", 0.0, 5000.0),
        )

    def test_load_step_adds_regulation_event_and_splits_windows(self, comparison_cfg):
        events = events_from_scenario(comparison_cfg.scenario)
        assert events == (
            # the startup windows now end at the load step, not at 1.25 s
            StepEvent(0.0, 1.0, "v_ref", "V_o", 0.0, 1000.0),
            StepEvent(0.0, 1.0, "q_ref", "Q", 0.0, 0.0),
            # load events regulate V_o about the active reference
            StepEvent(1.0, 1.25, "load", "V_o", 1000.0, 1000.0),
            StepEvent(1.25, 1.75, "v_ref", "V_o", 1000.0, 800.0),
            StepEvent(1.75, 2.5, "q_ref", "Q", 0.0, 5000.0),
        )

    def test_initial_output_values_seed_the_startup_from_values(self, canonical_cfg):
        events = events_from_scenario(canonical_cfg.scenario,
                                      initial_v=500.0, initial_q=-100.0)
        assert events[0].from_value == 500.0
        assert events[1].from_value == -100.0


# ---------------------------------------------------------------------------
# step metrics on the canonical trace (frozen oracle values)


class TestCanonicalStepMetrics:
    def test_every_event_settles_with_zero_overshoot(self, canonical_trace):
        metrics = trace_step_metrics(canonical_trace)
        assert [m.settled for m in metrics] == [True, True, True, True]
        assert [m.overshoot_pct for m in metrics] == [0.0, 0.0, 0.0, 0.0]
        assert [m.undershoot_pct for m in metrics] == [0.0, 0.0, 0.0, 0.0]

    def test_settling_times_frozen(self, canonical_trace):
        metrics = trace_step_metrics(canonical_trace)
        assert [m.settling_time for m in metrics] == [
            0.0115,                  # startup to 1000 V
            0.0,                     # reactive startup is already on target
            0.010099999999999998,    # 1000 -> 800 V step at 1.25 s
            0.009000000000000119,    # 0 -> 5000 var step at 1.75 s
        ]

    def test_steady_state_errors_frozen(self, canonical_trace):
        metrics = trace_step_metrics(canonical_trace)
        assert [m.steady_state_error for m in metrics] == [
            -4.547473508864641e-13,
            0.0,
            4.547473508864641e-13,
            -9.094947017729282e-12,
        ]

    def test_zero_duration_run_reports_unreached_target_as_unsettled(self):
        scenario = ScenarioProfile(duration=0.0, step_size=1e-4,
                                   v_ref=((0.0, 1000.0),), q_ref=((0.0, 0.0),),
                                   load=((0.0, 200.0),))
        trace = run_simulation(SimConfig(scenario=scenario,
                                         initial_state=(2.5e5, 0.0, 0.0)))
        m_v, m_q = trace_step_metrics(trace)
        assert not m_v.settled and math.isnan(m_v.settling_time)
        assert m_v.steady_state_error == -500.0
        assert m_q.settled and m_q.settling_time == 0.0


# ---------------------------------------------------------------------------
# Lyapunov decrease checks


class TestLyapunovCheck:
    def test_canonical_trace_report_frozen(self, canonical_trace):
        report = lyapunov_check(canonical_trace)
        assert report.function == "V2"
        assert report.samples == 24996          # 25000 windows - 2 per event
        assert report.decrease_violations == 0
        assert report.first_violation_step is None
        assert report.nonincreasing
        assert report.max_fd == 3.1606661732297425e-11
        assert report.match_relative_error == 0.025641130835833335
        assert report.match_samples == 249

    def test_explicit_gains_reproduce_the_default_report(self, canonical_trace,
                                                         canonical_cfg):
        assert (lyapunov_check(canonical_trace, gains=canonical_cfg.gains)
                == lyapunov_check(canonical_trace))

    def test_match_error_scales_linearly_with_step_size(self, canonical_trace,
                                                        fine_canonical_trace):
        coarse = lyapunov_check(canonical_trace)
        fine = lyapunov_check(fine_canonical_trace)
        assert fine.samples == 249996
        assert fine.decrease_violations == 0
        assert fine.max_fd == 4.0005088272013906e-09
        assert fine.match_relative_error == 0.0025062757248252225
        # forward-difference bias ~ h*k/2: ten times finer grid, ten times
        # smaller mismatch
        ratio = coarse.match_relative_error / fine.match_relative_error
        assert ratio == pytest.approx(10.0, rel=0.15)

    def test_injected_increase_is_flagged_at_its_window(self, canonical_trace,
                                                        canonical_cfg):
        data = canonical_trace.data.copy()
        # The decrease floor is relative to the largest difference magnitude,
        # and the startup transient puts that near 1.6e20 (floor ~1.2e11);
        # the injected bump must clear it to count as dynamics, not noise.
        data[7000, Trace.columns.index("V2")] += 1e10
        corrupted = _synthetic_trace(data, canonical_cfg)
        report = lyapunov_check(corrupted)
        assert report.decrease_violations == 1   # only the rising window flags
        assert report.first_violation_step == 6999
        assert report.max_fd == 1e14
        assert not report.nonincreasing
        # both corrupted windows sit below the match floor, so the match
        # statistics are unchanged from the clean trace
        assert report.match_relative_error == 0.025641130835833335
        assert report.match_samples == 249

    def test_sub_floor_increase_is_treated_as_noise(self, canonical_trace,
                                                    canonical_cfg):
        data = canonical_trace.data.copy()
        data[7000, Trace.columns.index("V2")] += 1e3   # fd = 1e7 << floor
        report = lyapunov_check(_synthetic_trace(data, canonical_cfg))
        assert report.decrease_violations == 0
        assert report.nonincreasing

    def test_equilibrium_trace_has_identically_zero_differences(self, equilibrium_trace):
        report = lyapunov_check(equilibrium_trace)
        assert report.samples == 25000           # no events after t = 0
        assert report.max_fd == 0.0
        assert report.decrease_violations == 0
        assert report.decrease_floor == 0.0
        assert report.match_relative_error == 0.0
        assert report.match_samples == 0

    def test_analytic_linear_benchmark_matches_to_the_euler_bias(self):
        # Closed-loop error dynamics e' = (-k I + J) e with k_v = k_s = k
        # have the exact solution e(t) = exp(-k t) R(t) e0 and
        # V2(t) = 0.5 |e0|^2 exp(-2 k t), whose exact decrease rate equals
        # -k (e_v^2 + e_s^2).  A trace built from the closed forms isolates
        # the checker: the only mismatch left is the forward-difference
        # bias, about k*h.
        k, h, n = 500.0, 1e-9, 1000
        t = np.arange(n + 1) * h
        decay = np.exp(-k * t)
        e_v = decay * (np.cos(t) * 1.0 + np.sin(t) * 0.5)
        e_s = decay * (np.cos(t) * 0.5 - np.sin(t) * 1.0)
        data = np.zeros((n + 1, len(Trace.columns)))
        data[:, Trace.columns.index("t")] = t
        data[:, Trace.columns.index("e_v")] = e_v
        data[:, Trace.columns.index("e_s")] = e_s
        data[:, Trace.columns.index("V2")] = 0.5 * 1.25 * np.exp(-2.0 * k * t)
        scenario = ScenarioProfile(duration=n * h, step_size=h,
                                   v_ref=((0.0, 1.0),), q_ref=((0.0, 0.0),),
                                   load=((0.0, 200.0),))
        trace = _synthetic_trace(data, SimConfig(scenario=scenario))

        report = lyapunov_check(trace)
        assert report.samples == 1000
        assert report.decrease_violations == 0
        assert report.max_fd == -624.3756245360998    # strictly decreasing
        assert report.match_samples == 1000
        assert report.match_relative_error == 5.002372235311892e-07
        assert report.match_relative_error == pytest.approx(k * h, rel=1e-2)
        assert report.match_relative_error < 1e-6
        assert lyapunov_check(trace, gains=ControllerGains()) == report

    def test_derived_update_keeps_augmented_function_nonincreasing(self, derived_v4_trace):
        report = lyapunov_check(derived_v4_trace)
        assert report.function == "V4"
        assert report.samples == 29998
        assert report.decrease_violations == 0
        assert report.nonincreasing
        # the stored V4 carries the a-tilde^2/(2 gamma) offset (~1e13 at
        # gamma = 1e-12), so its forward differences are quantized in steps
        # of about ulp(1e13)/h ~ 200; the frozen max stays at that noise
        # scale rather than at zero
        assert report.max_fd == 195.31249999999997
        assert report.match_relative_error == 0.002883560044846457
        assert report.match_samples == 1336

    def test_derived_update_moves_the_estimate(self, derived_v4_trace):
        assert derived_v4_trace.a_hat[0] == -3.0303030303030303
        assert derived_v4_trace.a_hat[-1] == -7.52871241304694

    def test_single_record_trace_is_too_short(self):
        scenario = ScenarioProfile(duration=0.0, step_size=1e-4,
                                   v_ref=((0.0, 1000.0),), q_ref=((0.0, 0.0),),
                                   load=((0.0, 200.0),))
        trace = run_simulation(SimConfig(scenario=scenario,
                                         initial_state=(2.5e5, 0.0, 0.0)))
        with pytest.raises(MetricUnavailable, match="too short"):
            lyapunov_check(trace)

    def test_frozen_estimate_at_zero_gamma_has_no_finite_v4(self):
        scenario = ScenarioProfile(duration=0.001, step_size=1e-4,
                                   v_ref=((0.0, 1000.0),), q_ref=((0.0, 0.0),),
                                   load=((0.0, 200.0),))
        gains = ControllerGains(gamma=0.0, freeze_estimate=True)
        trace = run_simulation(SimConfig(scenario=scenario, controller="adaptive",
                                         gains=gains,
                                         initial_state=(2.5e5, 0.0, 0.0)))
        assert np.isnan(trace.V4).all()
        with pytest.raises(MetricUnavailable, match="gamma > 0"):
            lyapunov_check(trace)


# ---------------------------------------------------------------------------
# load-estimate convergence


class TestEstimateConvergence:
    def test_canonical_adaptive_run_never_locks_to_the_true_load(
            self, canonical_adaptive_trace):
        result = estimate_convergence(canonical_adaptive_trace)
        assert result.target == 200.0      # constant-load window opens at t = 0
        assert result.band_frac == 0.10
        assert not result.converged
        assert math.isnan(result.time)
        assert result.final_relative_error == 0.4574028777149241

    def test_wider_band_converges_after_the_voltage_step(self,
                                                         canonical_adaptive_trace):
        result = estimate_convergence(canonical_adaptive_trace, band_frac=0.5)
        assert result.converged
        assert result.time == 1.2534
        assert result.final_relative_error == 0.4574028777149241

    def test_load_step_scenario_converges_to_the_post_step_load(self,
                                                                comparison_result):
        result = estimate_convergence(comparison_result.adaptive)
        assert result.target == 100.0      # window opens at the 1 s load step
        assert result.converged
        assert result.time == 1.2509000000000001
        assert result.final_relative_error == 0.08368603296319733
        assert comparison_result.adaptive.R_est[-1] == 108.36860329631973

    def test_explicit_target_overrides_the_profile_value(self, comparison_result):
        result = estimate_convergence(comparison_result.adaptive, target=50.0)
        assert not result.converged
        assert math.isnan(result.time)
        assert result.final_relative_error == 1.1673720659263946

    def test_estimate_frozen_at_the_truth_converges_immediately(self, canonical_cfg):
        config = replace(canonical_cfg, controller="adaptive",
                         gains=replace(canonical_cfg.gains, freeze_estimate=True),
                         initial_estimate=-1.0 / 0.33)
        trace = run_simulation(config)
        assert trace.a_hat[0] == -2.0 / (200.0 * 3.3e-3)
        assert trace.R_est[0] == 200.0
        result = estimate_convergence(trace)
        assert result.converged
        assert result.time == 0.0
        assert result.target == 200.0
        assert result.final_relative_error == 0.0

    def test_non_adaptive_trace_carries_no_estimate(self, canonical_trace):
        with pytest.raises(MetricUnavailable, match="non-adaptive"):
            estimate_convergence(canonical_trace)


# ---------------------------------------------------------------------------
# controller comparison table


class TestComparisonTable:
    def test_settling_ratios_frozen(self, comparison_result):
        rows = comparison_result.table()
        assert [(r.event.time, r.event.channel) for r in rows] == [
            (0.0, "v_ref"), (0.0, "q_ref"), (1.0, "load"),
            (1.25, "v_ref"), (1.75, "q_ref")]
        assert [r.settling_ratio for r in rows] == [
            1.0087719298245614,   # startup: 11.5 ms vs 11.4 ms
            1.0,                  # both instantly settled -> ratio 1
            1.0,
            1.0099009900990088,   # 10.2 ms vs 10.1 ms
            1.0,
        ]

    def test_settling_times_frozen(self, comparison_result):
        rows = comparison_result.table()
        assert [r.bsc.settling_time for r in rows] == [
            0.0115, 0.0, 0.0, 0.010199999999999987, 0.009000000000000119]
        assert [r.adaptive.settling_time for r in rows] == [
            0.0114, 0.0, 0.0, 0.010099999999999998, 0.009000000000000119]

    def test_load_event_excursion_is_small_and_similar_for_both(self,
                                                                comparison_result):
        load_row = comparison_result.table()[2]
        # the 200 -> 100 ohm step dips V_o about 1.1 V on a 1000 V bus
        assert load_row.bsc.overshoot_pct == 0.11418469625650686
        assert load_row.adaptive.overshoot_pct == 0.11449019975924557
        assert load_row.bsc.undershoot_pct == 0.0
        assert load_row.adaptive.undershoot_pct == 0.0
        assert load_row.bsc.settled and load_row.adaptive.settled

    def test_adaptive_startup_overshoot_is_float_noise_only(self, comparison_result):
        startup = comparison_result.table()[0]
        assert startup.bsc.overshoot_pct == 0.0
        assert startup.adaptive.overshoot_pct == 6.821210263296962e-14

    def test_formatted_table_layout(self, comparison_result):
        text = format_comparison_table(comparison_result.table())
        lines = text.splitlines()
        header = lines[0].split()
        assert header == ["t_event", "channel", "signal", "bsc_settle_ms",
                          "adap_settle_ms", "ratio", "bsc_over_%",
                          "adap_over_%", "adap_under_%"]
        assert set(lines[1]) == {"-"}
        assert len(lines) == 2 + 5
        assert lines[2].split()[:3] == ["0.0000", "v_ref", "V_o"]
        assert lines[2].split()[3] == "11.500"    # milliseconds
        assert lines[2].split()[4] == "11.400"

    def test_unsettled_rows_format_as_text_not_nan_milliseconds(self):
        event = StepEvent(0.0, 1.0, "v_ref", "V_o", 0.0, 1.0)
        unsettled = StepMetrics(event=event, band_pct=1.0, settled=False,
                                settling_time=math.nan, overshoot_pct=0.0,
                                undershoot_pct=0.0, steady_state_error=0.5)
        row = ComparisonRow(event=event, bsc=unsettled, adaptive=unsettled,
                            settling_ratio=math.nan)
        body = format_comparison_table([row]).splitlines()[2]
        assert body.split()[3] == "unsettled"
        assert body.split()[4] == "unsettled"

    def test_traces_from_different_scenarios_do_not_compare(self, canonical_trace,
                                                            comparison_result):
        with pytest.raises(MetricUnavailable, match="shared scenario"):
            comparison_table(canonical_trace, comparison_result.adaptive)
