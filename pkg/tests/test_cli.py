from __future__ import annotations

import json

import pytest

from scrooge.cli import EXIT_FAIL, EXIT_OK, EXIT_USAGE, emit_plot_data, main

SMALL = {
    "sample": ["--n-samples", "4"],
    "moments": ["--n-samples", "2000"],
    "relerr": ["--rho", "flat:16:16", "--n-samples", "20000"],
    "subsys": ["--n-samples", "5000"],
    "entropies": ["--rho", "random:4:4:1", "--regions", "AB"],
    "pt": ["--rho", "flat:16:16", "--strings", "4", "--n-samples", "20000"],
    "wishart": ["--n-samples", "20000"],
    "tvd": ["--rho", "flat:16:4", "--n-samples", "200"],
    "cmi": ["--rho", "product(mixed:2,mixed:2,mixed:2)", "--n-samples", "500"],
    "noise": ["--n-samples", "5000"],
    "bounds": ["--rho", "mixed:4", "--k", "2", "--r-states", "4"],
    "temporal": ["--hamiltonian", "gue:8:1", "--times", "0,100", "--n-samples", "2000"],
}


@pytest.mark.parametrize("command", sorted(SMALL))
def test_subcommands_run(command, tmp_path):
    code = main([command, "--seed", "3", "--out-dir", str(tmp_path)] + SMALL[command])
    assert code in (EXIT_OK, EXIT_FAIL)
    summary = json.loads((tmp_path / f"{command}_summary.json").read_text())
    assert summary["errors"] == {}
    assert summary["options"]["seed"] == 3
    lines = (tmp_path / f"{command}.jsonl").read_text().splitlines()
    for line in lines:
        rec = json.loads(line)
        assert {"claim", "measured", "target", "tolerance", "sigma", "pass", "provenance"} <= set(rec)
    assert (code == EXIT_OK) == summary["pass"]


def test_records_are_deterministic(tmp_path):
    args = ["moments", "--seed", "11", "--n-samples", "3000"]
    assert main(args + ["--out-dir", str(tmp_path / "a")]) == main(args + ["--out-dir", str(tmp_path / "b"), "--workers", "2"])
    a = (tmp_path / "a" / "moments.jsonl").read_bytes()
    b = (tmp_path / "b" / "moments.jsonl").read_bytes()
    assert a == b


def test_csv_format(tmp_path):
    main(["bounds", "--seed", "1", "--out-dir", str(tmp_path), "--format", "csv"])
    head = (tmp_path / "bounds.csv").read_text().splitlines()[0]
    assert head.startswith("claim,measured,target")


def test_seed_required(tmp_path):
    assert main(["bounds", "--out-dir", str(tmp_path)]) == EXIT_USAGE


def test_config_file(tmp_path):
    cfg = tmp_path / "run.yaml"
    cfg.write_text("seed: 5\nk: 2\nn_samples: 2000\n")
    assert main(["moments", "--config", str(cfg), "--out-dir", str(tmp_path)]) in (EXIT_OK, EXIT_FAIL)
    opts = json.loads((tmp_path / "moments_summary.json").read_text())["options"]
    assert opts["k"] == 2 and opts["seed"] == 5
    # explicit flags win over the file
    main(["moments", "--config", str(cfg), "--seed", "6", "--out-dir", str(tmp_path)])
    assert json.loads((tmp_path / "moments_summary.json").read_text())["options"]["seed"] == 6


def test_config_unknown_key_reports_line(tmp_path, capsys):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("seed: 5\n\nbogus: 1\n")
    assert main(["moments", "--config", str(cfg), "--out-dir", str(tmp_path)]) == EXIT_USAGE
    assert "bad.yaml:3" in capsys.readouterr().err


def test_config_syntax_error(tmp_path, capsys):
    cfg = tmp_path / "broken.yaml"
    cfg.write_text("seed: 5\nk: [1, 2\n")
    assert main(["moments", "--config", str(cfg)]) == EXIT_USAGE
    assert "line" in capsys.readouterr().err


def test_usage_errors(tmp_path):
    assert main(["nope"]) == EXIT_USAGE
    assert main(["moments", "--seed", "1", "--rho", "flat:2:9", "--out-dir", str(tmp_path)]) == EXIT_USAGE
    assert main(["moments", "--seed", "1", "--sampler", "magic", "--out-dir", str(tmp_path)]) == EXIT_USAGE
    assert main(["suite", "--seed", "1", "--level", "huge", "--out-dir", str(tmp_path)]) == EXIT_USAGE
    assert main(["suite", "--seed", "1", "--only", "c99", "--out-dir", str(tmp_path)]) == EXIT_USAGE


def test_suite_only(tmp_path):
    code = main(["suite", "--seed", "7", "--level", "smoke", "--only", "c13,c08_c09", "--out-dir", str(tmp_path)])
    assert code == EXIT_OK
    claims = [json.loads(x)["claim"] for x in (tmp_path / "suite.jsonl").read_text().splitlines()]
    assert claims


def test_emit_plot_data(tmp_path):
    csv_path, gp_path = emit_plot_data("curve", [{"x": 1.0, "y": 2.0}, {"x": 2.0, "y": None}], tmp_path)
    assert csv_path.read_text() == "x,y\n1.0,2.0\n2.0,\n"
    assert "using 1:2" in gp_path.read_text()
    csv_path, _ = emit_plot_data("empty", [], tmp_path, columns=["T", "err"])
    assert csv_path.read_text() == "T,err\n"
