import math

import numpy as np
import pytest

from frictionhb import dti
from frictionhb.errors import ValidationError
from frictionhb.hbm import HbmConfig, solve_static, sweep
from frictionhb.model import build_two_dof
from frictionhb.scenarios import energy_check

import oracles


class TestSchedule:
    def test_segment_validation(self):
        with pytest.raises(ValidationError):
            dti.Segment.constant(0.0, [0.0, 1.0])
        with pytest.raises(ValidationError):
            dti.Segment(1.0, [0.0], [0.0, 1.0])
        with pytest.raises(ValidationError):
            dti.Segment.harmonic_load(1.0, [0.0, 0.0], [1.0, 0.0], frequency=0.0)

    def test_jump_rejected(self):
        with pytest.raises(ValidationError, match="jumps"):
            dti.LoadSchedule((dti.Segment.constant(0.1, [0.0, 1.0]),
                              dti.Segment.constant(0.1, [0.0, 2.0])))

    def test_force_piecewise(self):
        sch = dti.build_preload_profile(dti.U2, 100.0, ramp_time=0.5, hold_time=0.2,
                                        overshoot=3.0)
        f = sch.force([0.0, 0.25, 0.5, 0.75, 1.0, 1.1])[:, 1]
        np.testing.assert_allclose(f, [0, 150, 300, 200, 100, 100])
        assert sch.duration == pytest.approx(1.2)

    def test_u1_monotone(self):
        sch = dti.build_preload_profile(dti.U1, 420.0)
        f = sch.force(np.linspace(0, sch.duration, 101))[:, 1]
        assert np.all(np.diff(f) >= 0) and f[-1] == pytest.approx(420.0)

    def test_profile_validation(self):
        with pytest.raises(ValidationError):
            dti.build_preload_profile(dti.U2, 420.0, overshoot=1.0)
        with pytest.raises(ValidationError):
            dti.build_preload_profile("U3", 420.0)

    def test_harmonic_envelope(self):
        seg = dti.Segment.harmonic_load(1.0, [0.0, 0.0], [2.0, 0.0], 10.0, ramp_in=0.5)
        sch = dti.LoadSchedule((seg,))
        assert sch.force([0.25])[0, 0] == pytest.approx(1.0 * math.cos(2 * math.pi * 2.5))
        assert sch.max_frequency == 10.0


class TestIntegrate:
    def test_default_dt(self, model0):
        sch = dti.LoadSchedule((dti.Segment.harmonic_load(0.1, [0, 420.0], [24.0, 0], 120.0),))
        assert dti.default_dt(model0, sch) == pytest.approx(1 / (200 * 120.0))
        static = dti.LoadSchedule((dti.Segment.constant(0.1, [0, 420.0]),))
        assert dti.default_dt(model0, static) == pytest.approx(dti.shortest_period(model0) / 50)

    def test_dt_upper_limit(self, model0):
        sch = dti.LoadSchedule((dti.Segment.constant(0.1, [0, 420.0]),))
        with pytest.raises(ValidationError):
            dti.integrate(model0, sch, dt=dti.shortest_period(model0) / 10)

    def test_free_linear_decay_matches_exact(self, params):
        # contact-free SDOF in x released from rest: Newmark average acceleration
        # is second-order accurate
        m = build_two_dof(params, 0.0).without_contacts().with_loads(static_load=[0.0, 0.0])
        sch = dti.LoadSchedule((dti.Segment.constant(0.02, [0.0, 0.0]),))
        x0 = 1e-4
        tr = dti.integrate(m, sch, dt=1e-5, q_init=[x0, 0.0])
        wn = math.sqrt(params.k_x)
        z = params.c_x / (2 * wn)
        wd = wn * math.sqrt(1 - z * z)
        exact = x0 * np.exp(-z * wn * tr.t) * (np.cos(wd * tr.t) + z / math.sqrt(1 - z * z)
                                                * np.sin(wd * tr.t))
        assert np.max(np.abs(tr.q[:, 0] - exact)) < 1e-3 * x0

    def test_preload_settles_to_closed_form(self, params):
        st, hist = dti.preload_state(build_two_dof(params, 0.0), dti.U1)
        ref = oracles.frozen()["static_alpha0"]
        assert st.q0[1] == pytest.approx(ref["y0"], rel=1e-3)
        assert st.fc0[0][1] == pytest.approx(ref["N0"], rel=1e-3)
        assert hist.kinetic_energy(np.eye(2))[-1] < dti.KE_SETTLED

    def test_u2_preload_leaves_negative_tangential_force(self, u2_45, u1_45):
        assert u2_45.fc0[0][0] < 0 < u1_45.fc0[0][0]

    def test_dt_halving_converges(self, params):
        m = build_two_dof(params, 0.0, 24.0)
        start = solve_static(m)
        f = 114.0
        amps = []
        for div in (100, 200, 400):
            _, a, _, ok = dti.harmonic_steady_state(m, start, f, dt=1 / (div * f))
            assert ok
            amps.append(a)
        e1, e2 = abs(amps[0] - amps[2]), abs(amps[1] - amps[2])
        assert e2 < e1 and e2 / amps[2] < 2e-3

    def test_matches_hbm_at_alpha0(self, params):
        m = build_two_dof(params, 0.0, 24.0)
        start = solve_static(m)
        f = 114.0
        sol = sweep(m, HbmConfig(frequencies=[f]), start=start).solutions[0]
        _, a, _, ok = dti.harmonic_steady_state(m, start, f)
        assert ok and a == pytest.approx(sol.amplitude(), rel=0.02)

    def test_trajectory_csv(self, tmp_path, params):
        m = build_two_dof(params, 0.0)
        tr = dti.integrate(m, dti.LoadSchedule((dti.Segment.ramp(0.01, [0, 0], [0, 420.0]),)))
        p = tmp_path / "t.csv"
        tr.to_csv(p, decimate=5)
        lines = p.read_text().splitlines()
        assert lines[0] == "t_s,qx_m,qy_m,T_N,N_N"
        assert len(lines) - 1 == len(range(0, tr.t.size, 5))


class TestEnergy:
    @pytest.mark.parametrize("alpha, f_exc, freq", [(0.0, 24.0, 114.0),
                                                    (math.pi / 4, 5.0, 132.0),
                                                    (math.pi / 4, 14.0, 119.0)])
    def test_balance_per_cycle(self, params, alpha, f_exc, freq):
        m = build_two_dof(params, alpha, f_exc)
        start = solve_static(m)
        hist, _, _, ok = dti.harmonic_steady_state(m, start, freq)
        assert ok
        err, e = energy_check(m, hist, freq)
        assert e["friction"] > 0
        assert err <= 0.01

    def test_stuck_cycle_has_no_friction_loss(self, params):
        m = build_two_dof(params, 0.0, 1.0)
        hist, _, _, _ = dti.harmonic_steady_state(m, solve_static(m), 132.0)
        e = dti.cycle_energy_balance(m, hist, 132.0)
        assert abs(e["friction"]) < 1e-6 * e["external"]
        assert e["viscous"] == pytest.approx(e["external"], rel=1e-2)
