import json
import subprocess
import sys

import numpy as np
import pytest

from isoembed.config import RunConfig, Tolerances, example_cos2_config, load_config, write_config
from isoembed.errors import BadParameter


def run_cli(args, cwd):
    return subprocess.run([sys.executable, "-m", "isoembed", *args],
                          capture_output=True, text=True, cwd=cwd)


def test_default_config_validates():
    RunConfig().validate()


def test_epsilon_out_of_range_message():
    cfg = RunConfig(epsilon=1.5)
    with pytest.raises(BadParameter, match=r"epsilon out of \(0,1\)"):
        cfg.validate()


def test_grid_must_fit_metric_domain():
    with pytest.raises(BadParameter):
        RunConfig(u_half=0.7).validate()


def test_even_row_count_rejected():
    with pytest.raises(BadParameter):
        RunConfig(n_v=200).validate()


def test_config_file_roundtrip(tmp_path):
    cfg = RunConfig(metric="cos2", family="c1_not_c2", epsilon=0.2, delta=0.3,
                    v_half=0.05, n_u=101, n_v=101, base_curve="circle:2")
    cfg.tolerances.e_res_tol = 5e-3
    cfg.tolerances.gate_isometry = False
    path = tmp_path / "run.cfg"
    write_config(cfg, str(path))
    cfg2 = load_config(str(path))
    assert cfg2 == cfg


def test_config_unknown_key(tmp_path):
    p = tmp_path / "bad.cfg"
    p.write_text("[metric]\nname = flat\nwhatever = 3\n")
    with pytest.raises(BadParameter):
        load_config(str(p))


def test_config_missing_file():
    with pytest.raises(BadParameter):
        load_config("/nonexistent/nope.cfg")


def test_example_config_gates():
    cfg = example_cos2_config()
    assert cfg.metric == "cos2"
    assert cfg.family == "c1_not_c2"
    assert cfg.epsilon == cfg.delta == 0.1
    assert not cfg.tolerances.gate_isometry


@pytest.fixture(scope="module")
def cli_run(tmp_path_factory):
    """One small CLI run shared by the CLI assertions."""
    wd = tmp_path_factory.mktemp("cli")
    out = run_cli(["run", "--grid-n", "101", "--n-v", "101", "--mesh-out", "mesh",
                   "--out-dir", "out"], cwd=wd)
    return wd, out


def test_cli_run_passes(cli_run):
    wd, out = cli_run
    assert out.returncode == 0, out.stderr + out.stdout
    assert (wd / "out" / "report.json").exists()
    assert (wd / "out" / "residuals.csv").exists()
    assert (wd / "out" / "system_s.csv").exists()
    assert (wd / "out" / "mesh_lifted.obj").exists()
    assert (wd / "out" / "mesh_composite.obj").exists()
    doc = json.loads((wd / "out" / "report.json").read_text())
    assert doc["verdicts"] and all(doc["verdicts"].values())


def test_cli_bad_epsilon(cli_run):
    wd, _ = cli_run
    out = run_cli(["run", "--epsilon", "1.5"], cwd=wd)
    assert out.returncode == 1
    assert "epsilon out of (0,1)" in out.stderr


def test_cli_verdict_failure_exit_code(cli_run):
    wd, _ = cli_run
    out = run_cli(["run", "--grid-n", "81", "--n-v", "81", "--residual-tol", "1e-30",
                   "--out-dir", "fail_out"], cwd=wd)
    assert out.returncode == 2
    assert "FAIL" in out.stdout


def test_cli_config_file_with_override(cli_run, tmp_path):
    wd, _ = cli_run
    cfg = RunConfig(n_u=81, n_v=81)
    path = tmp_path / "small.cfg"
    write_config(cfg, str(path))
    out = run_cli(["run", "--config", str(path), "--out-dir", "cfg_out",
                   "--metric", "flat"], cwd=wd)
    assert out.returncode == 0, out.stderr


def test_cli_verify_roundtrip_idempotent(cli_run):
    wd, _ = cli_run
    out = run_cli(["verify", "out/mesh_composite.obj", "--metric", "flat",
                   "--fields", "out/residuals.csv", "--report-json", "out/verify.json"],
                  cwd=wd)
    assert out.returncode == 0, out.stderr
    run_doc = json.loads((wd / "out" / "report.json").read_text())
    ver_doc = json.loads((wd / "out" / "verify.json").read_text())
    for key in ("isometry_e", "isometry_f", "isometry_g"):
        assert ver_doc["residuals"][key]["sup"] == run_doc["residuals"][key]["sup"]


def test_cli_verify_tampered_mesh(cli_run):
    wd, _ = cli_run
    src = (wd / "out" / "mesh_composite.obj").read_text().splitlines()
    moved = 0
    out_lines = []
    for ln in src:
        if ln.startswith("v ") and not moved and "0 0 0" not in ln:
            x, y, z = map(float, ln.split()[1:])
            ln = f"v {x + 1e-2:.17g} {y:.17g} {z:.17g}"
            moved = 1
        out_lines.append(ln)
    (wd / "out" / "tampered.obj").write_text("\n".join(out_lines) + "\n")
    out = run_cli(["verify", "out/tampered.obj", "--metric", "flat",
                   "--fields", "out/residuals.csv", "--report-json", "out/vt.json"],
                  cwd=wd)
    assert out.returncode == 0
    doc = json.loads((wd / "out" / "vt.json").read_text())
    ref = json.loads((wd / "out" / "verify.json").read_text())
    assert doc["residuals"]["isometry_e"]["sup"] > 100 * ref["residuals"]["isometry_e"]["sup"]


def test_cli_verify_wrong_size_fields(cli_run, tmp_path):
    wd, _ = cli_run
    bad = tmp_path / "fields.csv"
    bad.write_text("ubar,vbar,f,g\n0,0,0,0\n0,1,0,0\n1,0,0,0\n")
    out = run_cli(["verify", "out/mesh_composite.obj", "--metric", "flat",
                   "--fields", str(bad)], cwd=wd)
    assert out.returncode == 1


def test_cli_gated_verify(cli_run):
    wd, _ = cli_run
    out = run_cli(["verify", "out/mesh_composite.obj", "--metric", "flat",
                   "--fields", "out/residuals.csv", "--e-res-tol", "1e-30"], cwd=wd)
    assert out.returncode == 2


def test_cli_example_cos2(tmp_path):
    out = run_cli(["example-cos2", "--out-dir", "ex"], cwd=tmp_path)
    assert out.returncode == 0, out.stderr + out.stdout
    doc = json.loads((tmp_path / "ex" / "report.json").read_text())
    assert doc["verdicts"]["detector"] is True
    assert doc["verdicts"]["curvature_stencil"] is True
    meta = doc["meta"]
    assert meta["detector_hits"] > 100
    assert abs(meta["detector_near_initial_u"]) <= 3e-3
    assert meta["defect_locus"], "report must carry the flagged jump locus"
    # isometry triple is reported but not gated in this scenario
    assert doc["residuals"]["isometry_e"]["gated"] is False
    assert np.isfinite(doc["residuals"]["isometry_g"]["sup"])


def test_tolerances_cover_all_flags():
    # every tolerance field surfaces as a CLI flag
    from isoembed.cli import build_parser

    parser = build_parser()
    text = parser.format_help()
    run_actions = None
    for a in parser._subparsers._group_actions[0].choices.items():
        if a[0] == "run":
            run_actions = a[1]
    opts = run_actions.format_help()
    import dataclasses
    for f in dataclasses.fields(Tolerances):
        assert "--" + f.name.replace("_", "-") in opts
    for f in dataclasses.fields(RunConfig):
        if f.name == "tolerances":
            continue
        assert "--" + f.name.replace("_", "-") in opts
