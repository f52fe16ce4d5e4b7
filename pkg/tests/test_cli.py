import json

import numpy as np
import pytest

from elicit.cli import ConfigError, RunConfig, build_parser, main

FAST = ["--n-centers", "24"]


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_mi_estimate_writes_json(tmp_path, capsys):
    code, out, _ = run(["estimate", "--mi", "--world", "exp1", "--n", "1000", "--seed", "7", "--out", str(tmp_path)], capsys)
    assert code == 0
    rec = json.loads((tmp_path / "estimate.json").read_text())
    assert 1.1 <= rec["value"] <= 1.6
    assert float(out) == rec["value"] and rec["seed"] == 7


def test_estimate_is_byte_identical_on_repeat(tmp_path, capsys):
    args = ["estimate", "--mi", "--n", "200", "--seed", "3", *FAST]
    main([*args, "--out", str(tmp_path / "a")])
    main([*args, "--out", str(tmp_path / "b")])
    capsys.readouterr()
    assert (tmp_path / "a" / "estimate.json").read_bytes() == (tmp_path / "b" / "estimate.json").read_bytes()


def test_small_n_is_a_config_error(capsys):
    code, _, err = run(["estimate", "--world", "exp1", "--n", "4"], capsys)
    assert code == 2
    assert "n below minimum 8" in err


def test_two_sample_estimate_from_files(tmp_path, capsys):
    rng = np.random.default_rng(0)
    np.savetxt(tmp_path / "p.csv", rng.normal(size=(400, 1)), delimiter=",")
    np.savetxt(tmp_path / "q.csv", rng.normal(size=(400, 1)) + 1.0, delimiter=",")
    code, out, _ = run(
        ["estimate", "--p-file", str(tmp_path / "p.csv"), "--q-file", str(tmp_path / "q.csv"), "--out", str(tmp_path)], capsys
    )
    assert code == 0
    assert 0.3 < float(out) < 0.8
    assert json.loads((tmp_path / "estimate.json").read_text())["mi"] is False


def test_alg1_truth_equal_reports_pays_a(tmp_path, capsys):
    np.savetxt(tmp_path / "r.csv", np.random.default_rng(1).normal(size=(200, 2)), delimiter=",")
    r = str(tmp_path / "r.csv")
    code, out, _ = run(
        ["score", "--mechanism", "alg1", "--reports-file", r, "--truth-file", r, "--a", "1.5", "--out", str(tmp_path)], capsys
    )
    assert code == 0
    assert float(out) == pytest.approx(1.5, abs=0.05)
    assert (tmp_path / "payments.csv").read_text().startswith("report_id,group,score")


def test_alg1_without_truth_exits_2(capsys):
    code, _, err = run(["score", "--mechanism", "alg1"], capsys)
    assert code == 2 and "truth_file" in err


def test_alg2_score_from_world(tmp_path, capsys):
    code, out, _ = run(["score", "--mechanism", "alg2", "--n", "300", *FAST, "--out", str(tmp_path)], capsys)
    assert code == 0
    assert 0.9 < float(out) < 1.7


def test_simulate_inline_independent_world(tmp_path, capsys):
    args = ["simulate", "--mean", "0", "0", "--cov", "1", "0", "0", "1", "--repeats", "2", "--n", "200", *FAST]
    code, _, _ = run([*args, "--out", str(tmp_path)], capsys)
    assert code == 0
    lines = (tmp_path / "results.csv").read_text().splitlines()
    assert [l.split(",")[1] for l in lines[1:]] == ["truthful", "random_shift", "random_report"]
    truthful = float(lines[1].split(",")[4])
    assert abs(truthful) < 0.05


def test_simulate_needs_two_repeats(capsys):
    code, _, err = run(["simulate", "--repeats", "1"], capsys)
    assert code == 2 and "repeats" in err


def test_sweep_and_reconstruct_write_files(tmp_path, capsys):
    assert main(["sweep", "--n-grid", "32", "64", "--repeats", "2", *FAST, "--out", str(tmp_path)]) == 0
    assert (tmp_path / "sweep.csv").read_text().count("\n") == 5
    assert main(["reconstruct", "--world", "independent", "--n", "200", "--rounds", "5", *FAST, "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "reconstruction.json").read_text())["rounds"] == 5
    assert (tmp_path / "trajectory.csv").read_text().count("\n") == 6
    capsys.readouterr()


def test_config_file_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"n": 600, "seed": 3, "n_centers": 24}))
    code, _, _ = run(["estimate", "--config", str(cfg), "--n", "300", "--out", str(tmp_path)], capsys)
    rec = json.loads((tmp_path / "estimate.json").read_text())
    assert code == 0 and rec["n"] == 300 and rec["seed"] == 3


def test_unknown_config_key_names_the_key(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"bogus": 1}))
    code, _, err = run(["estimate", "--config", str(cfg)], capsys)
    assert code == 2 and "bogus" in err


def test_unknown_flag_is_an_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["estimate", "--frobnicate"])
    assert exc.value.code == 2


def test_help_lists_flags(capsys):
    parser = build_parser()
    with pytest.raises(SystemExit):
        parser.parse_args(["simulate", "--help"])
    text = capsys.readouterr().out
    for flag in ("--world", "--repeats", "--seed", "--divergence", "--config", "--out", "--a", "--b"):
        assert flag in text


def test_run_config_canonical_round_trip():
    cfg = RunConfig.from_dict({"command": "simulate", "world": "exp2", "cov": [1, 0.2, 0.2, 1], "mean": [0, 1]})
    again = RunConfig.from_dict(json.loads(cfg.canonical()))
    assert again.canonical() == cfg.canonical()
    assert RunConfig().seed == 42


def test_run_config_errors_name_their_key():
    with pytest.raises(ConfigError) as exc:
        RunConfig.from_dict({"divergence": "wasserstein"})
    assert exc.value.key == "divergence"
    with pytest.raises(ConfigError) as exc:
        RunConfig.from_dict({"n_grid": [512, 128]})
    assert exc.value.key == "n_grid"
