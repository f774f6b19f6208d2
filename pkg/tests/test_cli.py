import json

import pytest

from maxinv.cli import main

SMALL = ["--extents", "[[-1.6, 1.6], [-0.5, 0.5], [-0.4, 0.4]]",
         "--inner-extents", "[[-1.4, 1.4], [-0.3, 0.3], [-0.3, 0.3]]",
         "--tau", "0.01", "--T", "0.6", "--max-iter", "1"]


def _err(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


def test_cfl_exit_code(capsys):
    assert main(["gradcheck", "--tau", "0.1"]) == 7
    err = _err(capsys)
    assert err["category"] == "config" and err["field"] == "tau"


def test_bad_config_file(tmp_path, capsys):
    p = tmp_path / "bad.toml"
    p.write_text("omega = = 1\n")
    code = main(["adjointcheck", "--config", str(p)])
    assert code != 0 and _err(capsys)["error"] == "ParseError"


def test_unknown_case():
    with pytest.raises(SystemExit):
        main(["run-case", "v"])


def test_adjointcheck_output(capsys):
    assert main(["adjointcheck"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["intact_frozen"] < 1e-10 and out["intact_physical"] < 1e-10
    assert out["penalty_sign_flipped"] > 1e-6 and out["boundary_sign_flipped"] > 1e-6


def test_generate_then_reconstruct(tmp_path, capsys):
    wd = str(tmp_path)
    assert main(["generate-data", "--workdir", wd, *SMALL]) == 0
    capsys.readouterr()
    trace = str(tmp_path / "trace_noisy.npz")
    assert main(["reconstruct", "--workdir", wd, "--data", trace, *SMALL]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["iterations"] <= 1
    assert (tmp_path / "report.json").is_file() and (tmp_path / "reconstruction.vtk").is_file()


def test_reconstruct_rejects_mismatched_trace(tmp_path, capsys):
    wd = str(tmp_path)
    assert main(["generate-data", "--workdir", wd, *SMALL]) == 0
    args = [a if a != "0.6" else "0.5" for a in SMALL]
    code = main(["reconstruct", "--workdir", wd, "--data", str(tmp_path / "trace_noisy.npz"), *args])
    assert code == 7 and _err(capsys)["field"] == "data"


def test_run_case_weights(tmp_path):
    from maxinv import experiments as ex
    from maxinv.cli import build_parser, resolve_config
    p = build_parser()
    cfg = resolve_config(p.parse_args(["run-case", "iii"]))
    assert (cfg.gamma_eps, cfg.gamma_mu) == ex.CASE_GAMMA
    cfg = resolve_config(p.parse_args(["run-case", "iii", "--gamma-mu", "0.5"]))
    assert (cfg.gamma_eps, cfg.gamma_mu) == (0.01, 0.5)
    f = tmp_path / "w.toml"
    f.write_text("gamma_eps = 0.02\n")
    cfg = resolve_config(p.parse_args(["run-case", "i", "--config", str(f)]))
    assert (cfg.gamma_eps, cfg.gamma_mu) == (0.02, 0.9)
    assert resolve_config(p.parse_args(["reconstruct"])).gamma_eps == 0.01
