import json
import re

import numpy as np
import pytest

from splitting.cli import RunConfig, main
from splitting.graph import complete_graph, path_graph, to_edge_list
from splitting.problems import random_quadratic_game, save_problem


@pytest.fixture
def k3_edges(tmp_path):
    path = tmp_path / "k3.edges"
    path.write_text(to_edge_list(complete_graph(3)))
    return path


def _number_after(label, text):
    match = re.search(re.escape(label) + r"\s*([-+0-9.eE]+)", text)
    assert match, f"{label!r} not in output"
    return float(match.group(1))


def test_validate_builtin(capsys):
    assert main(["validate", "--scheme", "ryu:6"]) == 0
    out = capsys.readouterr().out
    assert "[SUCCESS]" in out
    assert _number_after("defect lambda_max =", out) <= 1e-9


def test_validate_bad_file(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"n": 2, "m": 1, "gamma": 0.5, "M": [[-1.0, 1.0]], "N": [[1.0, 0.0], [1.0, 0.0]]}))
    assert main(["validate", "--scheme", f"file:{path}"]) == 1
    out = capsys.readouterr().out
    assert "(b)" in out.split("[FAILED]")[1]


def test_validate_graph_json(k3_edges, capsys):
    assert main(["validate", "--scheme", f"graph:{k3_edges}", "--json"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["valid"] is True
    assert abs(report["defect_max_eigenvalue"]) <= 1e-12


def test_run_consensus(tmp_path, capsys):
    output = tmp_path / "trace.csv"
    code = main(["run", "--scheme", "minimal:5", "--problem", "consensus:1,2,3,4,5",
                 "--gamma", "0.5", "--tol", "1e-8", "--output", str(output)])
    assert code == 0
    out = capsys.readouterr().out
    assert "Status: converged" in out
    assert _number_after("error", out) <= 1e-6
    assert output.read_text().splitlines()[-1] == "# status=converged"


def test_run_is_reproducible(tmp_path):
    args = ["run", "--scheme", "ryu:3", "--problem", "random:3,2", "--seed", "11"]
    assert main(args + ["--output", str(tmp_path / "a.csv")]) == 0
    assert main(args + ["--output", str(tmp_path / "b.csv")]) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_run_reduced_form(tmp_path):
    output = tmp_path / "trace.csv"
    assert main(["run", "--scheme", "graph:k3", "--problem", "consensus:0,3,6", "--reduced",
                 "--output", str(output)]) == 0
    assert "# form=v" in output.read_text()


def test_run_non_conforming_gamma(tmp_path):
    output = tmp_path / "trace.csv"
    base = ["run", "--scheme", "dr", "--problem", "consensus:0,2", "--gamma", "1.5", "--output", str(output)]
    assert main(base) == 1
    assert main(base + ["--allow-gamma"]) in (0, 2)
    assert "# gamma=1.5 non-conforming" in output.read_text()


def test_run_rejects_gamma_out_of_range(tmp_path):
    assert main(["run", "--scheme", "dr", "--problem", "consensus:0,2", "--gamma", "2.5",
                 "--output", str(tmp_path / "t.csv")]) == 1


def test_run_game_file(tmp_path, capsys):
    problem_path = tmp_path / "game.json"
    save_problem(random_quadratic_game(4, 2, 2, np.random.default_rng(3)), problem_path)
    code = main(["run", "--scheme", "ryu:4", "--problem", str(problem_path),
                 "--output", str(tmp_path / "trace.csv")])
    assert code == 0
    assert _number_after("||sum F_i(x)||:", capsys.readouterr().out) <= 1e-5


def test_run_max_iters_exit_code(tmp_path):
    assert main(["run", "--scheme", "minimal:5", "--problem", "consensus:1,2,3,4,5", "--max-iters", "3",
                 "--output", str(tmp_path / "t.csv")]) == 2


def test_operator_count_mismatch(tmp_path, capsys):
    assert main(["run", "--scheme", "ryu3", "--problem", "consensus:1,2",
                 "--output", str(tmp_path / "t.csv")]) == 1
    assert "error:" in capsys.readouterr().err


def test_simulate_check(tmp_path, capsys):
    code = main(["simulate", "--graph", "petersen", "--problem", "random:10,2", "--check",
                 "--output", str(tmp_path / "sim.csv")])
    assert code == 0
    assert _number_after("max deviation", capsys.readouterr().out) <= 1e-10
    header = (tmp_path / "sim.csv").read_text().splitlines()[0]
    assert header.endswith("msgs_x,msgs_v")


def test_simulate_rejects_irregular_graph(tmp_path, capsys):
    path = tmp_path / "p3.edges"
    path.write_text(to_edge_list(path_graph(3)))
    assert main(["simulate", "--graph", str(path), "--problem", "consensus:1,2,3",
                 "--output", str(tmp_path / "sim.csv")]) == 1
    assert "not regular" in capsys.readouterr().err


def test_simulate_audit_and_message_log(k3_edges, tmp_path, capsys):
    log = tmp_path / "messages.jsonl"
    code = main(["simulate", "--graph", str(k3_edges), "--problem", "consensus:0,3,6", "--audit",
                 "--message-log", str(log), "--output", str(tmp_path / "sim.csv")])
    assert code == 0
    assert "audit passed" in capsys.readouterr().out
    records = [json.loads(line) for line in log.read_text().splitlines()]
    assert records and set(records[0]) == {"round", "phase", "from", "to"}


def test_graph_info_k3(capsys):
    assert main(["graph-info", "k3"]) == 0
    out = capsys.readouterr().out.splitlines()
    for expected in ("n=3", "|E|=3", "d=2", "tau=1", "regular=yes", "laplacian_rank=2"):
        assert expected in out


def test_graph_info_petersen(capsys):
    assert main(["graph-info", "petersen"]) == 0
    out = capsys.readouterr().out.splitlines()
    for expected in ("n=10", "|E|=15", "d=3", "tau=2/3"):
        assert expected in out


def test_graph_info_disconnected(tmp_path, capsys):
    path = tmp_path / "pair.edges"
    path.write_text("0 1\n2 3\n")
    assert main(["graph-info", str(path)]) == 0
    assert any(line.startswith("connected=false") for line in capsys.readouterr().out.splitlines())


def test_usage_error_exits_invalid():
    with pytest.raises(SystemExit) as excinfo:
        main(["run"])
    assert excinfo.value.code == 1


def test_environment_sets_defaults(tmp_path, monkeypatch):
    monkeypatch.setenv("FRUGAL_MAX_ITERS", "3")
    assert main(["run", "--scheme", "minimal:5", "--problem", "consensus:1,2,3,4,5",
                 "--output", str(tmp_path / "t.csv")]) == 2


def test_bad_environment_exits_invalid(monkeypatch, capsys):
    monkeypatch.setenv("FRUGAL_GAMMA", "half")
    assert main(["graph-info", "k3"]) == 1
    assert "FRUGAL_GAMMA" in capsys.readouterr().err


def test_run_config_flags_non_conforming(tmp_path):
    config = RunConfig(problem="consensus:1,2", gamma=1.2, tol_fp=1e-8, tol_consensus=1e-8,
                       max_iters=10, output=tmp_path / "t.csv")
    assert config.non_conforming
    assert config.stop_rule.max_iters == 10


def test_simulate_check_honours_allow_gamma(k3_edges, tmp_path, capsys):
    code = main(["simulate", "--graph", str(k3_edges), "--problem", "consensus:0,3,6", "--gamma", "1.5",
                 "--allow-gamma", "--check", "--check-rounds", "20", "--max-iters", "50",
                 "--output", str(tmp_path / "sim.csv")])
    assert code in (0, 2)
    assert _number_after("max deviation", capsys.readouterr().out) <= 1e-10
