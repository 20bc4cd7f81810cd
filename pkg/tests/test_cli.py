import json

import pytest

import decoherence.runner as runner
from decoherence import __version__
from decoherence.cli import EXIT_ACCEPTANCE, EXIT_NUMERICAL, EXIT_OK, EXIT_VALIDATION, main
from decoherence.errors import FitFailed, ValidationError
from decoherence.io import read_csv


def test_version(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--version"])
    assert info.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_stationary_run_writes_csv(tmp_path, capsys):
    code = main(["qft-stationary", "-s", "numerics.n_points=1024", "-s", "model.h=2", "-o", str(tmp_path)])
    assert code == EXIT_OK
    table = read_csv(tmp_path / "qft_stationary.csv")
    assert table.columns == ("k0", "ReM", "ImM", "rho", "F")
    assert table.config.model["h"] == 2
    assert "Delta_ms" in capsys.readouterr().out


def test_config_file_and_mode_mismatch(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("mode: qm-run\nmodel: {n_bath: 3}\nnumerics: {t_max: 5.0, n_times: 11}\noutput: small.csv\n")
    assert main(["qm-run", "-c", str(cfg), "-o", str(tmp_path)]) == EXIT_OK
    assert read_csv(tmp_path / "small.csv").data.shape == (11, 7)
    assert main(["qft-evolve", "-c", str(cfg), "-o", str(tmp_path)]) == EXIT_VALIDATION


@pytest.mark.parametrize(
    "argv",
    [
        ["qft-evolve", "-s", "model.h=-1"],
        ["qft-evolve", "-s", "model.colour=red"],
        ["qft-evolve", "-s", "numerics.t_mem=0.5"],
        ["rate-fit", "missing.csv"],
        ["qm-run", "-c", "/nonexistent.yaml"],
    ],
)
def test_validation_failures_exit_2(tmp_path, argv, capsys):
    code = main(argv + ["-o", str(tmp_path)])
    if argv[-1] == "numerics.t_mem=0.5":
        assert code == EXIT_NUMERICAL
        assert "numerical failure" in capsys.readouterr().err
    else:
        assert code == EXIT_VALIDATION
        assert "invalid configuration" in capsys.readouterr().err


def test_evolve_then_rate_fit(tmp_path, capsys):
    assert main(["qft-evolve", "-o", str(tmp_path)]) == EXIT_OK
    evolve = read_csv(tmp_path / "qft_evolve.csv")
    assert evolve.columns == ("t", "Delta", "S")
    assert main(["rate-fit", str(tmp_path / "qft_evolve.csv"), "-o", str(tmp_path)]) == EXIT_OK
    fit = read_csv(tmp_path / "rate_fit.csv")
    assert fit.columns == ("t", "ln_abs_dDelta")
    summary = fit.header["summary"]
    assert abs(summary["gamma_dec"] - summary["gamma_closed_form"]) < 0.25 * summary["gamma_closed_form"]
    assert "gamma_dec" in capsys.readouterr().out


def test_rate_fit_on_free_run_exits_3(tmp_path, capsys):
    assert main(["qft-evolve", "-s", "model.h=0", "-s", "numerics.n_t=300", "-o", str(tmp_path)]) == EXIT_OK
    assert main(["rate-fit", str(tmp_path / "qft_evolve.csv"), "-o", str(tmp_path)]) == EXIT_NUMERICAL
    assert "constant" in capsys.readouterr().err


def test_sweep_writes_points_and_reports_failures(tmp_path, capsys):
    argv = [
        "sweep",
        "-s", "model.grid.h=[1.0, 3.0]",
        "-s", "model.grid.beta=[0.25]",
        "-s", "model.base.model.k=0.5",
        "-s", "model.base.numerics.n_points=1024",
        "-j", "2",
        "-o", str(tmp_path),
    ]
    assert main(argv) == EXIT_NUMERICAL
    table = read_csv(tmp_path / "sweep.csv")
    status = dict(zip(table.column("h"), table.column("status")))
    assert status == {1.0: 0.0, 3.0: 3.0}
    assert (tmp_path / "sweep_point_0000.csv").exists()
    assert not (tmp_path / "sweep_point_0001.csv").exists()
    assert "point 1 failed" in capsys.readouterr().err
    side = json.loads((tmp_path / "sweep.summary.json").read_text())
    assert side["summary"]["n_failed"] == 1


def test_reproduce_fig3(tmp_path, capsys):
    assert main(["reproduce", "fig3", "-o", str(tmp_path)]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.count("PASS ") == 3 and "FAIL" not in out
    assert (tmp_path / "fig3.csv").exists()


def test_reproduce_failed_check_exits_4(tmp_path, monkeypatch, capsys):
    monkeypatch.setattr(runner, "_checks_fig3", lambda out: [runner.Check("forced", False, "always fails")])
    assert main(["reproduce", "fig3", "-o", str(tmp_path)]) == EXIT_ACCEPTANCE
    captured = capsys.readouterr()
    assert "FAIL forced: always fails" in captured.out
    assert "forced" in captured.err


def test_exit_code_mapping():
    assert runner.exit_code(ValidationError("x")) == 2
    assert runner.exit_code(runner.StageError("fit", FitFailed("x"))) == 3
    assert runner.exit_code(RuntimeError("x")) == 1


def test_unexpected_errors_propagate(monkeypatch, tmp_path):
    def boom(cfg, sink=None):
        raise runner.StageError("evolve", KeyError("x"))

    monkeypatch.setattr("decoherence.cli.run", boom)
    with pytest.raises(runner.StageError):
        main(["qft-evolve", "-o", str(tmp_path)])
