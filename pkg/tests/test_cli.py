import json
import math

import numpy as np
import pytest

from frictionhb import cli
from frictionhb.config import ConfigError, default_config, parse_config, parse_text
from frictionhb.errors import ValidationError
from frictionhb.hbm import read_frf_csv
from frictionhb.contact import read_trace_csv
from frictionhb.svg import PlotStyle, emit_svg, render_svg


class TestConfig:
    def test_minimal_file_gets_defaults(self, tmp_path):
        p = tmp_path / "c.ini"
        p.write_text("experiment = frf\nalpha = 0\n")
        cfg = parse_config(p, env={})
        assert cfg.experiment == "frf" and cfg.alpha == 0.0
        assert (cfg.H, cfg.J) == (5, 256)
        assert cfg.params.k_t == 3e5 and cfg.f_exc == (1, 4, 6, 18, 24, 30, 42, 60)
        assert cfg.grid[0] == 80 and cfg.grid[-1] == 160 and cfg.grid.size == 161

    def test_sections(self):
        cfg = parse_text("[scenario]\nexperiment = optcurve\nmethod = coupled, dti\n"
                         "[system]\nmu = 0.3\n[solver]\nH = 3\nJ = 64\n", env={})
        assert cfg.methods == ("coupled", "dti") and cfg.params.mu == 0.3 and cfg.H == 3

    def test_alpha_range_names_key(self):
        with pytest.raises(ConfigError) as exc:
            parse_text("alpha = 95", env={})
        assert exc.value.key == "scenario.alpha" and "alpha" in str(exc.value)

    def test_negative_stiffness(self):
        with pytest.raises(ConfigError) as exc:
            parse_text("[system]\nk_t = -1", env={})
        assert exc.value.key == "system.k_t"

    @pytest.mark.parametrize("text, key", [
        ("colour = red", "scenario.colour"),
        ("[plot]\nx = 1", "plot"),
        ("[solver]\nH = two", "solver.H"),
        ("[solver]\nH = 5\nJ = 8", "solver.J"),
        ("[grid]\nf_min = 150\nf_max = 100", "grid.f_max"),
        ("f_exc = 1, 2\nratios = 3", "scenario.ratios"),
        ("method = coupled, magic", "scenario.method"),
        ("alpha = inf", "scenario.alpha"),
        ("alpha = 1\n[scenario]\nalpha = 2", "scenario.alpha"),
    ])
    def test_rejections(self, text, key):
        with pytest.raises(ConfigError) as exc:
            parse_text(text, env={})
        assert exc.value.key == key

    def test_ratios_convert_to_amplitudes(self):
        cfg = parse_text("ratios = 84, 30", env={})
        assert cfg.f_exc == pytest.approx((5.0, 14.0))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            parse_config(tmp_path / "nope.ini")

    def test_env_override(self):
        cfg = parse_text("[output]\ndirectory = a", env={"FRICTIONHB_OUTPUT_DIR": "b"})
        assert cfg.output_dir == "b"

    def test_experiment_mismatch(self):
        with pytest.raises(ConfigError):
            parse_text("experiment = frf", env={}, experiment="optcurve")

    def test_alpha_default_depends_on_experiment(self):
        assert default_config("uniqueness", env={}).alpha == pytest.approx(math.pi / 4)
        assert default_config("hysteresis", env={}).f_exc == (1.0, 24.0, 60.0)


class TestSvg:
    def test_single_series(self):
        text = render_svg([("a", [0, 1], [0, 1])], xlabel="f [Hz]", ylabel="x [m]")
        assert text.count("<polyline") == 1
        assert "f [Hz]" in text and "x [m]" in text and text.startswith("<svg")

    def test_empty(self):
        with pytest.raises(ValidationError):
            render_svg([])
        with pytest.raises(ValidationError):
            render_svg([("a", [], [])])

    def test_deterministic_and_legend(self, tmp_path):
        series = [(f"{f:g} N", np.linspace(80, 160, 5), np.arange(5.0) * f) for f in (1, 24)]
        a = emit_svg(tmp_path / "a.svg", series, style=PlotStyle(markers=True))
        b = emit_svg(tmp_path / "b.svg", series, style=PlotStyle(markers=True))
        assert open(a).read() == open(b).read()
        assert ">1 N</text>" in open(a).read() and ">24 N</text>" in open(a).read()

    def test_log_axis_needs_positive(self):
        with pytest.raises(ValidationError):
            render_svg([("a", [0, 1], [1, 2])], style=PlotStyle(xlog=True))

    def test_escapes_text(self):
        assert "&lt;b&gt;" in render_svg([("<b>", [0, 1], [0, 1])])


def _run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


class TestMain:
    def test_config_error_exit_2(self, tmp_path, capsys):
        p = tmp_path / "c.ini"
        p.write_text("alpha = 95\n")
        code, _, err = _run(["frf", str(p), "-o", str(tmp_path)], capsys)
        assert code == 2
        payload = json.loads(err.strip().splitlines()[-1])
        assert payload["kind"] == "config" and payload["key"] == "scenario.alpha"

    def test_frf_outputs_and_determinism(self, tmp_path, capsys):
        p = tmp_path / "c.ini"
        p.write_text("experiment = frf\nf_exc = 1, 24\n[grid]\nf_min = 110\nf_max = 134\n"
                     "f_step = 2\n")
        outs = []
        for name in ("r1", "r2"):
            code, _, _ = _run(["frf", str(p), "-o", str(tmp_path / name)], capsys)
            assert code == 0
            outs.append(tmp_path / name / "frf_alpha0")
        files = sorted(f.name for f in outs[0].iterdir())
        assert files == ["frf_coupled.svg", "frf_coupled_F1N.csv", "frf_coupled_F24N.csv",
                         "report.json"]
        for f in files:
            if f.endswith((".csv", ".svg")):
                assert (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes()
        curve = read_frf_csv(outs[0] / "frf_coupled_F1N.csv", 1.0)
        assert curve.converged.all() and curve.peak()[0] == 132.0
        report = json.loads((outs[0] / "report.json").read_text())
        assert report["status"] == "ok" and len(report["results"]["peaks"]) == 2

    def test_hysteresis_csv_roundtrip(self, tmp_path, capsys, params):
        p = tmp_path / "c.ini"
        p.write_text("f_exc = 24\n[grid]\nf_min = 108\nf_max = 122\nf_step = 1\n")
        code, _, _ = _run(["hysteresis", str(p), "-o", str(tmp_path)], capsys)
        assert code == 0
        tr = read_trace_csv(tmp_path / "hysteresis_alpha0" / "hysteresis_coupled_F24N.csv",
                            params.contact)
        assert tr.has_slip and tr.J == 256

    def test_transient(self, tmp_path, capsys):
        p = tmp_path / "c.ini"
        p.write_text("preload = U2\nduration = 0.1\n[output]\ndecimate = 20\n")
        code, _, _ = _run(["transient", str(p), "-o", str(tmp_path)], capsys)
        assert code == 0
        d = tmp_path / "transient_alpha45"
        head = (d / "transient_u2.csv").read_text().splitlines()[0]
        assert head == "t_s,qx_m,qy_m,T_N,N_N"
        rep = json.loads((d / "report.json").read_text())
        assert rep["results"]["prestress"]["fc0"][0][0] < 0

    def test_solver_failure_exit_3(self, tmp_path, capsys, monkeypatch):
        from frictionhb.errors import ConvergenceError

        def boom(*a, **k):
            raise ConvergenceError("no convergence", residual=1.0)

        monkeypatch.setitem(cli.RUNNERS, "frf", boom)
        code, _, err = _run(["frf", "-o", str(tmp_path)], capsys)
        assert code == 3
        payload = json.loads(err.strip().splitlines()[-1])
        assert payload["kind"] == "solver" and payload["residual"] == 1.0
        assert (tmp_path / "frf_alpha0" / "error.json").exists()

    def test_verify_failure_exit_4(self, tmp_path, capsys, monkeypatch):
        from frictionhb import scenarios

        monkeypatch.setitem(cli.RUNNERS, "frf", lambda cfg, out: ({}, [], []))
        monkeypatch.setattr(scenarios, "verification_suite",
                            lambda *a, **k: [scenarios.Check("x", False, "forced")])
        code, out, _ = _run(["frf", "-o", str(tmp_path), "--verify"], capsys)
        assert code == 4 and "FAIL x" in out
        rep = json.loads((tmp_path / "frf_alpha0" / "report.json").read_text())
        assert rep["status"] == "verification_failed"

    def test_verify_pass_exit_0(self, tmp_path, capsys, monkeypatch):
        from frictionhb import scenarios

        monkeypatch.setitem(cli.RUNNERS, "frf", lambda cfg, out: ({}, [], []))
        monkeypatch.setattr(scenarios, "verification_suite",
                            lambda *a, **k: [scenarios.Check("x", True, "ok")])
        code, _, _ = _run(["frf", "-o", str(tmp_path), "--verify"], capsys)
        assert code == 0
