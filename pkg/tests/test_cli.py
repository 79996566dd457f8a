import json

import pytest

from ainsim.cli import build_config, build_parser, config_hash, main, parse_p_grid


def run(argv, capsys=None):
    rc = main(argv)
    out = capsys.readouterr().out if capsys else ""
    return rc, out


def test_p_grid_parsing():
    lin, db = parse_p_grid("30,40")
    assert db == [30.0, 40.0] and lin[0] == pytest.approx(1e3)
    lin, db = parse_p_grid("abs:1e4,1e6")
    assert lin == [1e4, 1e6] and db[1] == pytest.approx(60.0)


def test_simulate_writes_outputs_and_is_deterministic(tmp_path, capsys):
    argv = ["simulate", "--m", "2", "--seeds", "2", "--trials", "5000", "--p-grid", "30,40,50,60"]
    assert main(argv + ["--out", str(tmp_path / "a")]) == 0
    assert main(argv + ["--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "simulate.csv").read_text()
    assert a == (tmp_path / "b" / "simulate.csv").read_text()
    assert (tmp_path / "a" / "summary.json").read_text() == (tmp_path / "b" / "summary.json").read_text()
    lines = a.splitlines()
    assert lines[0].startswith("# ainsim") and "config_sha256=" in lines[0]
    assert lines[1] == "scheme,M,P_db,stream,sinr_db,sum_rate,leakage"
    summary = json.loads((tmp_path / "a" / "summary.json").read_text())
    assert summary["dof_slope"] == pytest.approx(1.5, abs=0.15)


def test_simulate_m1_slope_one(tmp_path):
    assert main(["simulate", "--m", "1", "--seeds", "2", "--trials", "5000", "--out", str(tmp_path)]) == 0
    s = json.loads((tmp_path / "summary.json").read_text())
    assert s["dof_slope"] == pytest.approx(1.0, abs=0.08)


def test_jobs_do_not_change_results(tmp_path, monkeypatch):
    argv = ["simulate", "--m", "2", "--seeds", "3", "--trials", "3000"]
    assert main(argv + ["--out", str(tmp_path / "a"), "--jobs", "1"]) == 0
    monkeypatch.setenv("AIN_SIM_JOBS", "2")
    assert main(argv + ["--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "simulate.csv").read_text() == (tmp_path / "b" / "simulate.csv").read_text()


def test_config_file_precedence(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"m": 3, "seeds": 4}))
    args = build_parser().parse_args(["simulate", "--config", str(cfg), "--m", "2"])
    c = build_config(args)
    assert c["m"] == 2 and c["seeds"] == 4 and c["trials"] == 100_000


def test_config_hash_ignores_output_location():
    assert config_hash({"m": 2, "out": "a"}) == config_hash({"m": 2, "out": "b"})
    assert config_hash({"m": 2}) != config_hash({"m": 3})


def test_config_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "c.json"
    bad.write_text(json.dumps({"nonsense": 1}))
    assert main(["simulate", "--config", str(bad)]) == 2
    assert main(["simulate", "--p-grid", "30,40", "--out", str(tmp_path)]) == 2
    assert main(["simulate", "--p-grid", "x", "--out", str(tmp_path)]) == 2
    assert main(["simulate", "--bounds", "0,1", "--out", str(tmp_path)]) == 2
    with pytest.raises(SystemExit) as info:
        main(["simulate", "--m", "two"])
    assert info.value.code == 2


def test_rational_csv_and_noise_off(tmp_path, capsys):
    rc = main(["rational", "--m", "2", "--p-grid", "abs:1e4,1e6,1e8", "--trials", "500",
               "--noise-var", "0", "--out", str(tmp_path)])
    assert rc == 0
    lines = (tmp_path / "rational.csv").read_text().splitlines()
    assert lines[1] == "P,M,gamma,epsilon,relay1_ser,relay2_ser,d1_ser,d2_ser,rate_lb_1,rate_lb_2"
    for row in lines[2:]:
        vals = row.split(",")
        assert all(float(v) == 0.0 for v in vals[4:8])


def test_rational_capacity_exit_3(tmp_path, capsys):
    assert main(["rational", "--m", "9", "--trials", "10", "--out", str(tmp_path)]) == 3
    assert "exceeds cap" in capsys.readouterr().err


def test_multihop_two_hop(tmp_path, capsys):
    assert main(["multihop", "--hops", "2", "--seeds", "1000", "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "multihop.json").read_text())
    assert rep["min_ratio_gap"] > 1e-6 and rep["count"] == 1000


def test_multihop_three_hop(tmp_path, capsys):
    assert main(["multihop", "--hops", "3", "--seeds", "100", "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "multihop.json").read_text())
    assert rep["converged"] >= 95
    first = rep["results"][0]
    assert set(first) >= {"hops", "converged", "residual", "diag_min", "iters", "gains"}


def test_multihop_failure_budget_exit_3(tmp_path, capsys):
    rc = main(["multihop", "--hops", "3", "--seeds", "5", "--tolerance", "1e-30",
               "--max-fail-fraction", "0", "--out", str(tmp_path)])
    assert rc == 3


def test_multihop_reduce(tmp_path, capsys):
    rc = main(["multihop", "--hops", "4", "--reduce", "--seeds", "2", "--trials", "5000",
               "--m", "2", "--out", str(tmp_path)])
    assert rc == 0
    rep = json.loads((tmp_path / "multihop.json").read_text())
    assert rep["max_leakage"] < 1e-9 and rep["dof_slope"] > 1.0


def test_check_phases_random_seed(capsys):
    assert main(["check-phases", "--seed", "4", "--trials", "20000"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["first_hop_ok"] and rep["second_hop_ok"] and rep["pipeline_run"]
    assert 1.42 <= rep["dof_slope"] <= 1.58


def test_check_phases_real_positive_file(tmp_path, capsys):
    f = tmp_path / "ch.json"
    f.write_text(json.dumps({"model": "constant_complex",
                             "hops": [[[[1, 0]], [[2, 0]], [[0.5, 0]], [[1, 0]]]] * 2}))
    assert main(["check-phases", "--channel", str(f)]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert not rep["first_hop_ok"] and not rep["second_hop_ok"] and not rep["pipeline_run"]


def test_check_phases_marginal_channel(tmp_path, capsys):
    import cmath
    import math

    z = cmath.rect(1, math.pi + 1e-12)
    f = tmp_path / "ch.json"
    f.write_text(json.dumps({"model": "constant_complex",
                             "hops": [[[[1, 0]], [[z.real, z.imag]], [[1, 0]], [[1, 0]]],
                                      [[[1, 0]], [[0, 1]], [[1, 0]], [[1, 0]]]]}))
    assert main(["check-phases", "--channel", str(f)]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert not rep["first_hop_ok"] and rep["second_hop_ok"]
    assert rep["degenerate"] and rep["near_degenerate"]


def test_check_phases_malformed_file(tmp_path, capsys):
    f = tmp_path / "bad.json"
    f.write_text("{oops")
    assert main(["check-phases", "--channel", str(f)]) == 2
    assert main(["check-phases", "--channel", str(tmp_path / "missing.json")]) == 2


def test_dump_channel_round_trip(tmp_path, capsys):
    from ainsim.channel import ChannelRealization, sample_channel

    out = tmp_path / "c.json"
    assert main(["dump-channel", "--seed", "7", "--m", "3", "--hops", "3", "--out", str(out)]) == 0
    ch = ChannelRealization.from_json(out.read_text())
    ref = sample_channel(7, 3, 3)
    assert (ch.coefficients == ref.coefficients).all()
    assert main(["dump-channel", "--seed", "7"]) == 0
    assert json.loads(capsys.readouterr().out)["seed"] == 7
