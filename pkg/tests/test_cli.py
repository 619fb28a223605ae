import json

import pytest

from bilayer_ising.cli import main, run_verify


def _run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


def test_classify_output(capsys):
    code, out = _run(capsys, "classify", "--k", "2", "--theta", "4")
    assert code == 0
    doc = json.loads(out)
    assert doc["count_lower_bound"] == 3
    assert doc["theta_c_high"] == 3.0
    assert abs(doc["theta_c_low"] - 1.0 / 3.0) < 1e-15


def test_solve_output(capsys):
    code, out = _run(capsys, "solve", "--k", "2", "--theta", "4")
    assert code == 0
    doc = json.loads(out)
    assert doc["count"] == 3
    for point in doc["points"]:
        assert point["residual"] < 1e-9
        assert set(point) == {"u", "v", "w", "residual", "label"}


def test_solve_deterministic(capsys):
    _, out1 = _run(capsys, "solve", "--k", "2", "--theta", "0.1", "--a", "2",
                   "--b", "2", "--c", "1")
    _, out2 = _run(capsys, "solve", "--k", "2", "--theta", "0.1", "--a", "2",
                   "--b", "2", "--c", "1")
    assert out1 == out2


def test_sweep_fig1(capsys):
    code, out = _run(capsys, "sweep", "--k", "2", "--family", "fig1",
                     "--theta", "2.5:4.0:0.5")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "theta,mu0,mu1,mu2"
    assert len(lines) == 5
    # below the bifurcation the branch columns are empty
    assert lines[1].split(",")[1:] == ["0.35714285714285715", "", ""]
    last = lines[-1].split(",")
    assert abs(float(last[1]) - 0.4) < 1e-14
    assert abs(float(last[2]) - 0.019453071166708684) < 1e-12


def test_sweep_fig2(capsys):
    code, out = _run(capsys, "sweep", "--k", "1", "--family", "fig2",
                     "--theta", "1:3:1", "--a", "0.3")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "theta,mu_star_pp_pp,mu_star_pp_mp"
    assert len(lines) == 4


def test_conditional_theta1_uniform(capsys):
    code, out = _run(capsys, "conditional", "--k", "2", "--theta", "1",
                     "--point", "1,1,1", "--sigma", "+1,+1")
    assert code == 0
    doc = json.loads(out)
    assert all(abs(v - 0.25) < 1e-14 for v in doc.values())


def test_bp_and_sample_roundtrip(tmp_path, capsys):
    point = "1.0,0.1458980337503153,0.1458980337503153"
    sample_file = tmp_path / "sample.json"
    code, _ = _run(capsys, "sample", "--k", "2", "--theta", "4", "--point",
                   point, "--depth", "1", "--seed", "3",
                   "--output", str(sample_file))
    assert code == 0
    cfg = json.loads(sample_file.read_text())
    assert set(cfg) == {"s", "sigma"}
    assert set(cfg["s"]) == {"", "0", "1", "2"}

    sigma_file = tmp_path / "sigma.json"
    sigma_file.write_text(json.dumps(cfg["sigma"]))
    code, out = _run(capsys, "bp", "--k", "2", "--theta", "4", "--point", point,
                     "--depth", "1", "--sigma-file", str(sigma_file))
    assert code == 0
    doc = json.loads(out)
    assert set(doc) == {"marginals", "map"}
    for row in doc["marginals"].values():
        assert abs(row["-1"] + row["1"] - 1.0) < 1e-12
    assert all(v in (-1, 1) for v in doc["map"].values())


def test_sample_seed_determinism(capsys):
    args = ("sample", "--k", "2", "--theta", "4", "--point",
            "1.0,0.1458980337503153,0.1458980337503153", "--depth", "2",
            "--seed", "9")
    _, out1 = _run(capsys, *args)
    _, out2 = _run(capsys, *args)
    assert out1 == out2


def test_demo_denoise(capsys):
    code, out = _run(capsys, "demo-denoise", "--k", "2", "--theta", "4",
                     "--depth", "2", "--seed", "1")
    assert code == 0
    doc = json.loads(out)
    assert doc["flips_map_vs_observed"] >= 0
    assert "energy_loss_map_vs_observed" in doc


def test_verify_report(capsys):
    report = run_verify()
    assert report["pass"] is True
    names = {c["name"] for c in report["checks"]}
    assert "compatibility-oracle" in names
    assert "bp-exactness" in names
    info = report["informational"]
    assert len(info["reference_rows"]) == 11
    assert info["root_law_closed_form_gap"] < 1e-12
    code, out = _run(capsys, "verify")
    assert code == 0
    assert json.loads(out)["pass"] is True


def test_argument_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["classify", "--k", "1", "--theta", "2"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["sweep", "--k", "2", "--family", "fig3", "--theta", "1:2:1"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["conditional", "--k", "2", "--theta", "1", "--point", "1,1",
              "--sigma", "+1,+1"])
    assert exc.value.code == 2


def test_config_file_input(tmp_path, capsys):
    doc = {
        "k": 2,
        "J": 0.6931471805599453,  # theta = exp(2*J) = 4 at beta = 1
        "beta": 1.0,
        "emission": {"-1": {"-1": 0.0, "1": 0.0}, "1": {"-1": 0.0, "1": 0.0}},
    }
    config = tmp_path / "params.json"
    config.write_text(json.dumps(doc))
    code, out = _run(capsys, "solve", "--config", str(config))
    assert code == 0
    assert json.loads(out)["count"] == 3
