import math

import numpy as np
import pytest

from frictionhb import dti
from frictionhb.errors import ValidationError
from frictionhb.harmonics import HarmonicSet
from frictionhb.hbm import (UNCOUPLED, FrfCurve, HbmConfig, ImportedState,
                            MonotonicRamp, StaticState, fd_jacobian, linear_guess, read_frf_csv,
                            refine_peak, residual_coupled, residual_uncoupled, solve_point,
                            solve_static, static_residual, sweep)
from frictionhb.model import build_two_dof

import oracles

FROZEN = oracles.frozen()


class TestStatic:
    def test_alpha0_closed_form(self, params):
        st = solve_static(build_two_dof(params, 0.0))
        ref = FROZEN["static_alpha0"]
        assert st.q0[1] == pytest.approx(ref["y0"], rel=1e-3)
        assert st.fc0[0][1] == pytest.approx(ref["N0"], rel=1e-3)
        assert abs(st.q0[0]) < 1e-12 and abs(st.fc0[0][0]) < 1e-6

    def test_alpha45_monotonic_is_positive_slip(self, params):
        st = solve_static(build_two_dof(params, math.pi / 4))
        ref = FROZEN["static_alpha45_u1"]
        T0, N0 = st.fc0[0]
        assert N0 == pytest.approx(ref["N0"], rel=1e-6)
        assert T0 == pytest.approx(params.mu * N0, rel=1e-9)
        assert st.q0[0] == pytest.approx(ref["x0"], rel=1e-6)
        assert st.q0[1] == pytest.approx(ref["y0"], rel=1e-6)

    def test_equilibrium(self, params):
        m = build_two_dof(params, math.pi / 4)
        st = solve_static(m, MonotonicRamp(steps=50))
        r = static_residual(m, st.q0, st.w0)
        assert np.linalg.norm(r) < 1e-6

    def test_imported_state(self, params):
        m = build_two_dof(params)
        s = StaticState(np.array([1e-6, 2e-6]), [(0.0, 1.0)], [0.0])
        assert solve_static(m, ImportedState(s)) is s
        with pytest.raises(ValidationError):
            solve_static(m, ImportedState(StaticState(np.zeros(3), [(0, 0)], [0.0])))

    def test_unknown_path(self, params):
        with pytest.raises(ValidationError):
            solve_static(build_two_dof(params), load_path="ramp")


class TestConfig:
    def test_defaults(self):
        c = HbmConfig()
        assert (c.H, c.J, c.newton_tol) == (5, 256, 1e-6)
        assert c.frequencies[0] == 80 and c.frequencies[-1] == 160 and c.frequencies.size == 161

    @pytest.mark.parametrize("kw", [dict(H=0), dict(H=5, J=11), dict(newton_tol=0),
                                    dict(mode="both"), dict(mode=UNCOUPLED),
                                    dict(frequencies=[100, 90, 110])])
    def test_invalid(self, kw):
        with pytest.raises(ValidationError):
            HbmConfig(**kw)


class TestResiduals:
    def test_linear_system_residual_vanishes(self, params):
        m = build_two_dof(params, 0.0, 10.0).without_contacts()
        hs = linear_guess(m, 2 * np.pi * 110, 3, stuck=False)
        assert np.linalg.norm(residual_coupled(m, hs)) < 1e-9

    def test_uncoupled_length(self, params, u1_45, model45):
        hs = linear_guess(model45, 2 * np.pi * 120, 4, q0=u1_45.q0)
        r = residual_uncoupled(model45, hs, u1_45, J=64)
        assert r.shape == (2 * 2 * 4,)

    def test_fd_jacobian_matches_stuck_operator(self, params):
        # full stick, no lift-off: the residual is affine with a known operator
        m = build_two_dof(params, 0.0, 1.0)
        st = solve_static(m)
        omega, H = 2 * np.pi * 120, 2
        hs = linear_guess(m, omega, H, q0=st.q0)
        fun = lambda z: residual_coupled(m, HarmonicSet.from_vector(z, 2, H, omega), J=64,
                                         w_init=st.w0)
        z = hs.to_vector()
        Jac = fd_jacobian(fun, z, step=1e-10)
        Ks = m.stuck_stiffness()
        ref = np.zeros_like(Jac)
        ref[0:2, 0:2] = Ks
        for h in range(1, H + 1):
            D = Ks - (h * omega) ** 2 * m.mass + 1j * h * omega * m.damping
            i = 2 * (2 * h - 1)
            ref[i:i + 2, i:i + 2] = D.real
            ref[i:i + 2, i + 2:i + 4] = -D.imag
            ref[i + 2:i + 4, i:i + 2] = D.imag
            ref[i + 2:i + 4, i + 2:i + 4] = D.real
        np.testing.assert_allclose(Jac, ref, rtol=0, atol=1e-4 * np.abs(ref).max())

    def test_fd_jacobian_step_independent_in_slip(self, params, model0):
        st = solve_static(model0)
        sol = solve_point(model0, HbmConfig(), 2 * np.pi * 114,
                          linear_guess(model0, 2 * np.pi * 114, 5, q0=st.q0), st.w0)
        assert sol.converged
        fun = lambda z: residual_coupled(model0, HarmonicSet.from_vector(z, 2, 5, sol.hs.omega),
                                         w_init=st.w0)
        z = sol.hs.to_vector()
        a = fd_jacobian(fun, z, step=1e-9)
        b = fd_jacobian(fun, z, step=1e-10)
        assert np.linalg.norm(a - b) <= 1e-2 * np.linalg.norm(a)


class TestSolve:
    def test_linear_frf_no_contact(self, params):
        m = build_two_dof(params, 0.3, 5.0).without_contacts()
        freqs = np.array([90.0, 100.0, 101.0, 130.0])
        curve = sweep(m, HbmConfig(frequencies=freqs, H=3, newton_tol=1e-10),
                      start=StaticState(np.linalg.solve(m.stiffness, m.static_load), [], []))
        assert curve.converged.all()
        for f, sol in zip(freqs, curve.solutions):
            x = oracles.linear_frf(m.stiffness, m.damping, m.mass, [5.0, 0.0], 2 * np.pi * f)
            np.testing.assert_allclose(sol.hs.ch[0], x, rtol=1e-10, atol=1e-10 * abs(x).max())
            assert np.abs(sol.hs.ch[1:]).max() < 1e-10 * abs(x).max()

    def test_stuck_peak_matches_sdof(self, params):
        m = build_two_dof(params, 0.0, 1.0)
        cfg = HbmConfig(frequencies=np.arange(128.0, 136.01, 0.5))
        curve = sweep(m, cfg)
        best = refine_peak(m, cfg, curve)
        assert best.frequency == pytest.approx(FROZEN["sdof_peak_frequency"], abs=0.05)
        assert best.amplitude() == pytest.approx(FROZEN["sdof_exact_peak_ratio"], rel=1e-3)
        assert all(tr.all_stick for tr in best.traces)

    def test_refine_not_below_grid_max(self, params, model0):
        cfg = HbmConfig(frequencies=np.arange(110.0, 118.01, 1.0))
        curve = sweep(model0, cfg)
        best = refine_peak(model0, cfg, curve)
        assert best.amplitude() >= curve.peak()[1] - 1e-15

    def test_coupled_equals_uncoupled_alpha0(self, params, model0):
        freqs = np.arange(108.0, 120.01, 2.0)
        pre = solve_static(model0)
        c = sweep(model0, HbmConfig(frequencies=freqs), start=pre)
        u = sweep(model0, HbmConfig(frequencies=freqs, mode=UNCOUPLED, prestress=pre))
        np.testing.assert_allclose(u.amplitudes, c.amplitudes, rtol=1e-3)

    def test_sweep_direction_independent(self, params, model0):
        freqs = np.arange(104.0, 124.01, 2.0)
        up = sweep(model0, HbmConfig(frequencies=freqs))
        down = sweep(model0, HbmConfig(frequencies=freqs[::-1]))
        np.testing.assert_allclose(up.amplitudes, down.amplitudes[::-1], rtol=1e-6)

    def test_uncoupled_keeps_prestress_mean(self, u2_45, model45):
        cfg = HbmConfig(frequencies=[125.0], mode=UNCOUPLED, prestress=u2_45)
        sol = sweep(model45, cfg).solutions[0]
        np.testing.assert_array_equal(sol.hs.c0, u2_45.q0)

    def test_guess_shape_checked(self, model0):
        with pytest.raises(ValidationError):
            solve_point(model0, HbmConfig(H=3), 700.0, HarmonicSet.zeros(700.0, 5, (2,)))


class TestFrfCurve:
    def test_csv_roundtrip(self, tmp_path):
        c = FrfCurve(np.array([100.0, 100.5]), np.array([1e-4, 2e-4]), 24.0,
                     np.array([True, False]), np.array([3, 40]))
        p = tmp_path / "frf.csv"
        c.to_csv(p)
        assert p.read_text().splitlines()[0] == "f_Hz,amplitude_m,ratio_m_per_N,converged,iterations"
        back = read_frf_csv(p, 24.0)
        np.testing.assert_allclose(back.amplitudes, c.amplitudes)
        np.testing.assert_array_equal(back.converged, c.converged)
        assert c.peak() == (100.0, 1e-4)

    def test_summary_json(self, tmp_path):
        c = FrfCurve(np.array([1.0, 2.0]), np.array([3.0, 4.0]), 2.0, np.array([True, True]),
                     np.array([1, 1]), label="x")
        c.to_json(tmp_path / "s.json")
        assert c.summary()["peak_ratio_m_per_N"] == 2.0


def test_dti_prestress_matches_static(params):
    m = build_two_dof(params, 0.0)
    st_dti, _ = dti.preload_state(m, dti.U1)
    st = solve_static(m)
    assert st_dti.q0[1] == pytest.approx(st.q0[1], rel=1e-3)
    assert st_dti.fc0[0][1] == pytest.approx(st.fc0[0][1], rel=1e-3)
