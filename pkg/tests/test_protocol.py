"""Scheduling, timing, multi-round QEC, CHaDD, and the Lindblad toy model."""

import math
from fractions import Fraction

import numpy as np
import pytest

from nadqec import code3, protocol
from nadqec.noise import NoiseParams
from nadqec.protocol import (
    ChaddSequence,
    CrosstalkModel,
    ProtocolConfig,
    SpectatorLayout,
    Timing,
    bare_qubit_fidelity,
    chadd_cycle_unitary,
    chadd_sequence,
    collapse_operators,
    evolve_lindblad,
    fit_lifetime,
    run_crosstalk_toy,
    run_multiqec,
    run_multiqec_with_chadd,
    schedule_rounds,
    total_evolution_time,
    total_evolution_time_exact,
)
from nadqec.qcore import fidelity


class TestScheduling:
    def test_worked_example(self):
        assert schedule_rounds(40, 30) == [30.0, 10.0]

    def test_boundary(self):
        assert schedule_rounds(30, 30) == [30.0]

    def test_degenerate(self):
        assert schedule_rounds(0, 30) == []

    def test_sum_exact_for_decimal_inputs(self):
        sched = schedule_rounds(0.3, 0.1)
        assert len(sched) == 3
        assert sum(Fraction(str(d)) for d in sched) == Fraction("0.3")

    def test_delays_within_bound(self):
        for total in (7.0, 95.5, 123.25):
            sched = schedule_rounds(total, 30)
            assert all(0 < d <= 30 for d in sched)
            assert abs(sum(sched) - total) < 1e-12


class TestTiming:
    def test_worked_example_exact(self):
        sched = schedule_rounds(40, 30)
        assert total_evolution_time(sched) == 47.24
        assert total_evolution_time_exact(sched) == Fraction("47.24")

    def test_empty_schedule_is_encode_decode(self):
        assert total_evolution_time([]) == pytest.approx(1.096, abs=1e-12)

    def test_single_round(self):
        assert total_evolution_time([30.0]) == pytest.approx(34.168, abs=1e-12)

    def test_reset_shortfall_added(self):
        # second delay of 1 us cannot host the 2.72 us reset
        t = total_evolution_time_exact([30.0, 1.0])
        expected = Fraction("0.548") * 2 + Fraction(31) + Fraction("3.072") * 2 \
            + (Fraction("2.72") - 1)
        assert t == expected

    def test_first_round_needs_no_reset(self):
        # a single short delay never pays the reset penalty
        t = total_evolution_time_exact([1.0])
        assert t == Fraction("0.548") * 2 + 1 + Fraction("3.072")

    def test_invalid_timing(self):
        with pytest.raises(ValueError):
            Timing(t_encode=0.0)


class TestMultiQec:
    def test_zero_noise_everything_perfect(self):
        cfg = ProtocolConfig(code3.LogicalStateSpec(1.2, 0.3), max_delay=30,
                             total_free=(30.0, 60.0, 90.0))
        pts = run_multiqec(cfg, NoiseParams(t1=1e15))
        for p in pts:
            assert abs(p.fidelity - 1.0) < 1e-9
            assert abs(p.success_probability - 1.0) < 1e-9

    def test_single_round_reproduces_oracle(self):
        cfg = ProtocolConfig(code3.LogicalStateSpec(math.pi), max_delay=30,
                             total_free=(20.0,))
        pts = run_multiqec(cfg, NoiseParams.from_t1_t2(220.0, 440.0))
        g = 1 - math.exp(-20.0 / 220.0)
        assert abs(pts[0].fidelity - code3.oracle_fidelity_ad(math.pi, g)) < 1e-10

    def test_multi_round_composes_single_round_maps(self):
        # independent reimplementation: iterate the analytic cycle by hand
        noise = NoiseParams.from_t1_t2(200.0, 300.0)
        cfg = ProtocolConfig(code3.LogicalStateSpec(2.0, 1.0), max_delay=25,
                             total_free=(70.0,))
        pts = run_multiqec(cfg, noise)
        from nadqec.noise import amplitude_damping, apply_channel, dephasing
        target = code3.encode_ideal(cfg.logical)
        rho = target.to_density_matrix()
        p_total = 1.0
        for delay in (25.0, 25.0, 20.0):
            g = 1 - math.exp(-delay / 200.0)
            p = 0.5 * (1 - math.exp(-delay / noise.tphi))
            for q in range(3):
                rho = apply_channel(rho, amplitude_damping(g), q)
                rho = apply_channel(rho, dephasing(p), q)
            out = code3.qec_cycle(rho, 0.0, 0.0, code3.RecoveryMap.ideal(g),
                                  target=target)
            rho = out.conditional_state
            p_total *= out.success_probability
        assert abs(pts[0].fidelity - fidelity(rho, target)) < 1e-12
        assert abs(pts[0].success_probability - p_total) < 1e-12

    def test_break_even_lifetime(self):
        cfg = ProtocolConfig(code3.LogicalStateSpec(math.pi), max_delay=30,
                             total_free=tuple(np.arange(30.0, 331.0, 30.0)))
        pts = run_multiqec(cfg, NoiseParams.from_t1_t2(220.0, 440.0))
        tau = fit_lifetime([p.total_evolution_us for p in pts],
                           [p.fidelity for p in pts])
        assert tau >= 2 * 220.0

    def test_bare_reference(self):
        assert abs(bare_qubit_fidelity(220.0, 220.0) - math.exp(-1)) < 1e-15
        times = np.linspace(10, 400, 20)
        tau = fit_lifetime(times, [bare_qubit_fidelity(t, 220.0) for t in times])
        assert abs(tau - 220.0) < 1e-6


class TestChaddSequence:
    def test_toggling_sums_vanish_robust_and_plain(self):
        for robust in (True, False):
            seq = chadd_sequence(2, 3.0, robust=robust)
            sums = seq.toggling_signs().sum(axis=1)
            assert tuple(sums) == (0, 0, 0)

    def test_robust_pulse_list(self):
        seq = chadd_sequence(2, 1.0)
        assert seq.pulses == (("X", 1), ("X", 2), ("XT", 1), ("XT", 2),
                              ("XT", 1), ("XT", 2), ("X", 1), ("X", 2))
        assert seq.interval_count == 8
        assert seq.cycle_time == 8.0

    def test_sign_matrix_rows_orthogonal(self):
        seq = chadd_sequence(2, 1.0)
        m = seq.sign_matrix
        r1, r2 = m[seq.row_assignment[1]], m[seq.row_assignment[2]]
        assert r1 @ r2 == 0
        assert r1.sum() == 0 and r2.sum() == 0

    def test_zero_tau_pulse_product_is_phase(self):
        seq = chadd_sequence(2, 1.0)
        u = np.eye(4, dtype=complex)
        for kind, color in seq.pulses:
            u = protocol._color_matrix((1, 2), color, kind, 2) @ u
        phase = u[0, 0] / abs(u[0, 0])
        np.testing.assert_allclose(u / phase, np.eye(4), atol=1e-12)

    def test_unsupported_chromaticity(self):
        with pytest.raises(ValueError):
            chadd_sequence(3, 1.0)

    def test_closed_system_cycle_is_identity(self):
        rng = np.random.default_rng(17)
        for _ in range(10):
            w1, w2, g, tau = rng.uniform(0.05, 2.0, 4)
            model = CrosstalkModel(omega1=w1, omega2=w2, g=g)
            seq = chadd_sequence(2, tau)
            u = chadd_cycle_unitary(seq, model.hamiltonian(), (1, 2))
            phase = u[0, 0] / abs(u[0, 0])
            assert np.abs(u / phase - np.eye(4)).max() < 1e-8


class TestLindblad:
    def test_trace_preserved(self):
        model = CrosstalkModel(omega1=0.4, omega2=0.1, g=0.07, t1=80.0, tphi=120.0)
        rho = np.diag([0.0, 0.0, 1.0, 0.0]).astype(complex)
        out = evolve_lindblad(model.hamiltonian(), rho, 25.0, model.collapse(), 800)
        assert abs(np.trace(out).real - 1.0) < 1e-9

    def test_richardson_convergence(self):
        model = CrosstalkModel(omega1=0.4, omega2=0.1, g=0.07, t1=80.0, tphi=120.0)
        rho = np.diag([0.0, 0.0, 1.0, 0.0]).astype(complex)
        coarse = evolve_lindblad(model.hamiltonian(), rho, 10.0, model.collapse(), 400)
        fine = evolve_lindblad(model.hamiltonian(), rho, 10.0, model.collapse(), 800)
        assert np.abs(coarse - fine).max() < 1e-8

    def test_relaxation_rate_matches_t1(self):
        ops = collapse_operators(1, NoiseParams(t1=150.0))
        rho = np.array([[0, 0], [0, 1]], dtype=complex)
        out = evolve_lindblad(np.zeros((2, 2)), rho, 30.0, ops, 600)
        assert abs(out[1, 1].real - math.exp(-30.0 / 150.0)) < 1e-9

    def test_dephasing_rate_matches_tphi(self):
        ops = collapse_operators(1, NoiseParams(t1=1e12, tphi=90.0))
        rho = np.array([[0.5, 0.5], [0.5, 0.5]], dtype=complex)
        out = evolve_lindblad(np.zeros((2, 2)), rho, 45.0, ops, 600)
        assert abs(out[0, 1].real - 0.5 * math.exp(-45.0 / 90.0)) < 1e-9


class TestCrosstalkToy:
    def test_stationary_without_coupling_or_noise(self):
        model = CrosstalkModel(omega1=0.0, omega2=0.0, g=0.0)
        series = run_crosstalk_toy(model, "1", None, 40.0)
        np.testing.assert_allclose(series.pop1, 1.0, atol=1e-10)

    def test_probe_one_improves_with_chadd(self):
        model = CrosstalkModel(omega1=0.3, omega2=0.2, g=0.05, t1=100.0,
                               steps_per_interval=120)
        seq = chadd_sequence(2, 60.0 / 32)
        with_dd = run_crosstalk_toy(model, "1", seq, 60.0)
        without = run_crosstalk_toy(model, "1", None, 60.0)
        assert with_dd.fidelity[-1] > without.fidelity[-1]

    def test_probe_zero_degrades_with_chadd(self):
        model = CrosstalkModel(omega1=0.3, omega2=0.2, g=0.05, t1=100.0,
                               steps_per_interval=120)
        seq = chadd_sequence(2, 60.0 / 32)
        with_dd = run_crosstalk_toy(model, "0", seq, 60.0)
        without = run_crosstalk_toy(model, "0", None, 60.0)
        assert with_dd.fidelity[-1] < without.fidelity[-1]

    def test_convergence_check_passes(self):
        model = CrosstalkModel(g=0.05, t1=100.0, steps_per_interval=100)
        seq = chadd_sequence(2, 16.0 / 8)
        run_crosstalk_toy(model, "1", seq, 16.0, check_convergence=True)

    def test_incommensurate_final_time_rejected(self):
        seq = chadd_sequence(2, 1.0)
        with pytest.raises(ValueError):
            run_crosstalk_toy(CrosstalkModel(), "0", seq, 12.5)

    def test_unknown_probe(self):
        with pytest.raises(ValueError):
            run_crosstalk_toy(CrosstalkModel(), "2", None, 10.0)


class TestMultiQecWithChadd:
    noise = NoiseParams.from_t1_t2(220.0, 440.0)

    def test_no_coupling_no_noise_is_perfect(self):
        cfg = ProtocolConfig(code3.LogicalStateSpec(math.pi / 2), max_delay=30,
                             total_free=(60.0,), chadd_enabled=True)
        layout = SpectatorLayout(spectators=1, couplings=((0, 3, 0.0),))
        pts = run_multiqec_with_chadd(cfg, NoiseParams(t1=1e12), layout,
                                      steps_per_interval=40)
        assert abs(pts[0].fidelity - 1.0) < 1e-8
        assert abs(pts[0].success_probability - 1.0) < 1e-8

    def test_matches_kraus_engine_without_chadd(self):
        cfg = ProtocolConfig(code3.LogicalStateSpec(2.1, 0.4), max_delay=30,
                             total_free=(45.0,))
        layout = SpectatorLayout(spectators=0, couplings=())
        a = run_multiqec_with_chadd(cfg, self.noise, layout,
                                    steps_per_interval=100)[0]
        b = run_multiqec(cfg, self.noise)[0]
        assert abs(a.fidelity - b.fidelity) < 1e-9
        assert abs(a.success_probability - b.success_probability) < 1e-9

    def test_chadd_suppresses_spectator_crosstalk(self):
        layout = SpectatorLayout(spectators=1, couplings=((0, 3, 0.05),))
        fids = {}
        for chadd in (False, True):
            cfg = ProtocolConfig(code3.LogicalStateSpec(math.pi / 2),
                                 max_delay=30, total_free=(60.0,),
                                 chadd_enabled=chadd)
            fids[chadd] = run_multiqec_with_chadd(
                cfg, self.noise, layout, steps_per_interval=40)[0].fidelity
        assert fids[True] >= fids[False]

    def test_chadd_hurts_zero_logical_without_crosstalk(self):
        layout = SpectatorLayout(spectators=0, couplings=())
        fids = {}
        for chadd in (False, True):
            cfg = ProtocolConfig(code3.LogicalStateSpec(0.0), max_delay=30,
                                 total_free=(60.0,), chadd_enabled=chadd)
            fids[chadd] = run_multiqec_with_chadd(
                cfg, self.noise, layout, steps_per_interval=40)[0].fidelity
        assert fids[True] < fids[False]

    def test_register_cap(self):
        cfg = ProtocolConfig(code3.LogicalStateSpec(0.0), max_delay=30,
                             total_free=(30.0,), chadd_enabled=True)
        with pytest.raises(ValueError):
            run_multiqec_with_chadd(cfg, self.noise,
                                    SpectatorLayout(spectators=5), 40)

    def test_default_coloring_is_proper(self):
        layout = SpectatorLayout(spectators=2,
                                 couplings=((0, 3, 0.1), (2, 4, 0.1)))
        colors = layout.resolved_colors()
        for a, b, _ in layout.couplings:
            assert colors[a] != colors[b]


class TestEdgeCases:
    def test_zero_total_free_point(self):
        cfg = ProtocolConfig(code3.LogicalStateSpec(1.0), max_delay=30,
                             total_free=(0.0,))
        pts = run_multiqec(cfg, NoiseParams(t1=100.0))
        assert pts[0].rounds == 0
        assert pts[0].fidelity == 1.0
        assert pts[0].success_probability == 1.0
        assert abs(pts[0].total_evolution_us - 1.096) < 1e-12

    def test_synthesized_variant_requires_unitary(self):
        with pytest.raises(ValueError):
            ProtocolConfig(code3.LogicalStateSpec(1.0), max_delay=30,
                           total_free=(30.0,), recovery_variant="synthesized")


class TestFiniteDurationPulses:
    def test_finite_pulses_cost_fidelity(self):
        base = CrosstalkModel(g=0.04, t1=80.0, steps_per_interval=80)
        slow = CrosstalkModel(g=0.04, t1=80.0, steps_per_interval=80,
                              pulse_duration=0.2)
        seq = chadd_sequence(2, 1.0)
        ideal = run_crosstalk_toy(base, "1", seq, 16.0)
        finite = run_crosstalk_toy(slow, "1", seq, 16.0)
        assert finite.fidelity[-1] < ideal.fidelity[-1]

    def test_zero_duration_is_default_path(self):
        model = CrosstalkModel(g=0.04, t1=80.0, steps_per_interval=80)
        seq = chadd_sequence(2, 1.0)
        a = run_crosstalk_toy(model, "1", seq, 8.0)
        b = run_crosstalk_toy(CrosstalkModel(g=0.04, t1=80.0,
                                             steps_per_interval=80,
                                             pulse_duration=0.0),
                              "1", seq, 8.0)
        np.testing.assert_allclose(a.fidelity, b.fidelity, atol=0)


def test_row_assignment_matches_realized_signs():
    for robust in (True, False):
        seq = chadd_sequence(2, 2.0, robust=robust)
        signs = seq.toggling_signs()
        reps = len(seq.pulses) // 4
        for color in (1, 2):
            row = np.tile(seq.sign_matrix[seq.row_assignment[color]], reps)
            np.testing.assert_array_equal(signs[color - 1], row)


def test_multiqec_with_synthesized_recovery_matches_approximate():
    from nadqec.code3 import combined_recovery_unitary, RecoveryMap

    w5 = combined_recovery_unitary(0.0, RecoveryMap.approximate())
    noise = NoiseParams.from_t1_t2(220.0, 440.0)
    base = ProtocolConfig(code3.LogicalStateSpec(2.2, 0.5), max_delay=30,
                          total_free=(70.0,), recovery_variant="approximate")
    syn = ProtocolConfig(code3.LogicalStateSpec(2.2, 0.5), max_delay=30,
                         total_free=(70.0,), recovery_variant="synthesized",
                         recovery_unitary=w5)
    a = run_multiqec(base, noise)[0]
    b = run_multiqec(syn, noise)[0]
    assert abs(a.fidelity - b.fidelity) < 1e-10
    assert abs(a.success_probability - b.success_probability) < 1e-10
