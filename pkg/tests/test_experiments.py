import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from odeheat.cli import main
from odeheat.experiments import (
    ConfigError,
    SummaryRow,
    emit_summary,
    load_config,
    load_preset,
    read_summary,
    run_config,
    run_experiment,
    run_preset,
)
from odeheat.grid import ControlRegion, SpaceTimeGrid, control_l2_norm, h_norm, l2_norm, HState, Coupling


def preset_dict(name):
    return load_preset(name).to_dict()


def write_json(path, obj):
    path.write_text(json.dumps(obj, indent=2))
    return path


def read_matrix(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


@pytest.fixture(scope="module")
def test1_out(tmp_path_factory):
    out = tmp_path_factory.mktemp("test1")
    rows = run_preset("test1", out)
    return out, rows


def test_cli_run_preset(tmp_path, capsys):
    assert main(["run-preset", "test1", "--out", str(tmp_path)]) == 0
    rows = read_summary(tmp_path / "summary.csv")
    assert [r.epsilon for r in rows] == [1e-1, 1e-2, 1e-3, 1e-4]
    ny = [r.norm_yT for r in rows]
    assert all(b < a for a, b in zip(ny, ny[1:]))
    for name in ("control.csv", "state_y.csv", "state_z.csv", "norms_over_time.csv", "residuals.csv"):
        assert (tmp_path / "eps_1e-04" / name).is_file()
    assert capsys.readouterr().out.startswith("epsilon,N_iter")


def test_cli_bogus_preset(tmp_path, capsys):
    assert main(["run-preset", "bogus", "--out", str(tmp_path)]) != 0
    assert "bogus" in capsys.readouterr().err


def test_cli_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "odeheat", "run-preset", "nope", "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode != 0 and "error" in proc.stderr


def test_cli_rejects_bad_theta(tmp_path):
    with pytest.raises(SystemExit) as info:
        main(["run-preset", "test1", "--theta", "0.2", "--out", str(tmp_path)])
    assert info.value.code != 0


def test_config_reproducing_preset_gives_identical_summary(tmp_path, test1_out):
    cfg = write_json(tmp_path / "c.json", preset_dict("test1"))
    run_config(cfg, tmp_path / "run")
    assert (tmp_path / "run" / "summary.csv").read_bytes() == (test1_out[0] / "summary.csv").read_bytes()


def test_deterministic_outputs(tmp_path, test1_out):
    run_preset("test1", tmp_path)
    for rel in ("summary.csv", "eps_1e-02/state_y.csv", "eps_1e-02/control.csv", "eps_1e-04/norms_over_time.csv"):
        assert (tmp_path / rel).read_bytes() == (test1_out[0] / rel).read_bytes()


def test_h2_violation_is_reported(tmp_path):
    raw = preset_dict("test1")
    raw["problem"]["kappa"] = -1.0
    cfg = write_json(tmp_path / "bad.json", raw)
    with pytest.raises(ConfigError, match="H2") as info:
        load_config(cfg)
    assert "line" in str(info.value)
    assert main(["run", str(cfg), "--out", str(tmp_path / "o")]) != 0


@pytest.mark.parametrize(
    "mutate,needle",
    [
        (lambda r: r["hum"].update(epsilons=[]), "epsilons"),
        (lambda r: r["hum"].update(epsilons=[1e-2, -1.0]), "epsilons"),
        (lambda r: r["problem"].update(a="log(x)"), "a"),
        (lambda r: r.update(mode="sideways"), "mode"),
        (lambda r: r["grid"].update(Nx=2), "Nx"),
        (lambda r: r["problem"].update(omega=[0.7, 0.3]), "omega"),
    ],
)
def test_validation_errors(tmp_path, mutate, needle):
    raw = preset_dict("test1")
    mutate(raw)
    with pytest.raises(ConfigError, match=needle):
        load_config(write_json(tmp_path / "c.json", raw))


def test_json_syntax_error_reports_line(tmp_path):
    p = tmp_path / "broken.json"
    p.write_text('{\n  "name": "x",\n  "mode": \n}\n')
    with pytest.raises(ConfigError, match="line 4"):
        load_config(p)


def test_missing_config_file(tmp_path, capsys):
    assert main(["run", str(tmp_path / "nothing.json")]) != 0


def test_halving_nt_is_robust(tmp_path, test1_out):
    raw = preset_dict("test1")
    raw["grid"]["Nt"] = 60
    rows = run_config(write_json(tmp_path / "c.json", raw), tmp_path / "o")
    for a, b in zip(rows, test1_out[1]):
        for key in ("norm_yT", "abs_zT", "norm_v"):
            assert getattr(a, key) == pytest.approx(getattr(b, key), rel=0.1), (a.epsilon, key)


def test_sweep_subcommand(tmp_path, capsys):
    cfg = write_json(tmp_path / "c.json", preset_dict("test1"))
    assert main(["sweep", str(cfg), "--epsilons", "0.05", "0.005", "--out", str(tmp_path / "o")]) == 0
    rows = read_summary(tmp_path / "o" / "summary.csv")
    assert [r.epsilon for r in rows] == [0.05, 0.005]
    assert len(capsys.readouterr().out.strip().splitlines()) == 3


def test_emit_summary_empty(tmp_path):
    emit_summary([], tmp_path / "s.csv")
    assert (tmp_path / "s.csv").read_bytes() == b"epsilon,N_iter,norm_yT,abs_zT,norm_v\n"
    assert read_summary(tmp_path / "s.csv") == []


def test_emit_summary_one_row(tmp_path):
    emit_summary([SummaryRow(1e-1, 5, 1.4146, 1.8015, 4.8074)], tmp_path / "s.csv")
    data = (tmp_path / "s.csv").read_bytes()
    assert data.count(b"\n") == 2 and b"\r" not in data
    assert data.splitlines()[1] == b"0.1,5,1.4146,1.8015,4.8074"


def test_emit_summary_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    rows = [SummaryRow(float(f"{e:.6g}"), int(k), *(float(f"{x:.6g}") for x in rng.lognormal(size=3)))
            for e, k in zip(10.0 ** -np.arange(1, 5), (5, 10, 26, 92))]
    emit_summary(rows, tmp_path / "s.csv")
    assert read_summary(tmp_path / "s.csv") == rows


def test_norms_recomputable_from_csv(test1_out):
    out, rows = test1_out
    cfg = load_preset("test1")
    grid = SpaceTimeGrid(1.0, 0.6, 30, 120)
    region = ControlRegion(0.3, 0.7, grid)
    cp = Coupling(1.0, 1.0)
    for row in rows:
        sub = out / f"eps_{row.epsilon:.0e}"
        _, Y = read_matrix(sub / "state_y.csv")
        _, Z = read_matrix(sub / "state_z.csv")
        _, N = read_matrix(sub / "norms_over_time.csv")
        head, V = read_matrix(sub / "control.csv")
        y, z = Y[:, 1:], Z[:, 1]
        assert y.shape == (grid.Nt + 1, grid.Nx + 1)
        for n in (0, 40, grid.Nt):
            assert N[n, 1] == pytest.approx(l2_norm(y[n], grid), rel=1e-9)
            assert N[n, 3] == pytest.approx(h_norm(HState(y[n], z[n]), cp, grid), rel=1e-9)
        assert l2_norm(y[-1], grid) == pytest.approx(row.norm_yT, rel=1e-9)
        assert abs(z[-1]) == pytest.approx(row.abs_zT, rel=1e-9)
        v = np.zeros((grid.Nt + 1, grid.Nx + 1))
        v[1:, [int(j) for j in head[1:]]] = V[:, 1:]
        assert control_l2_norm(v, region, grid) == pytest.approx(row.norm_v, rel=1e-9)
    assert cfg.name == "test1"


def test_boundary_preset_outputs(tmp_path):
    raw = preset_dict("test3")
    raw["hum"]["epsilons"] = [1e-2]
    rows = run_config(write_json(tmp_path / "c.json", raw), tmp_path / "o")
    sub = tmp_path / "o" / "eps_1e-02"
    for name in ("boundary_control.csv", "verify_state_y.csv", "verification.csv", "control.csv"):
        assert (sub / name).is_file()
    _, ver = read_matrix(sub / "verification.csv")
    assert ver[0, 0] == pytest.approx(rows[0].norm_yT, rel=1e-12)
    _, yv = read_matrix(sub / "verify_state_y.csv")
    assert yv.shape[1] == 32


def test_continuous_mode_via_cli(tmp_path):
    assert main(["run-preset", "test2", "--adjoint", "continuous", "--theta", "0.5", "--out", str(tmp_path)]) == 0
    info = json.loads((tmp_path / "run_info.json").read_text())
    assert info["config"]["adjoint_mode"] == "continuous" and info["config"]["theta"] == 0.5


def test_unwritable_output_dir(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(ConfigError):
        run_experiment(load_preset("test1"), blocker / "sub")
