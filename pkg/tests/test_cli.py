"""The command-line surface: determinism, formats, exit codes."""

import json
import subprocess
import sys

import pytest

from exwalk.cli import RunConfig, _parse_graph, build_parser, main
from exwalk.lattice import Edge, ExplicitFinite, FullLattice, RangeError


def run_cli(capsys, *argv):
    code = main(list(argv))
    cap = capsys.readouterr()
    return code, cap.out, cap.err


# a cheap invocation per subcommand, used for rerun-identity checks
FAST_CASES = {
    "gambler": ["gambler", "--n", "4", "--trials", "2000", "--seed", "5"],
    "localtime": ["localtime", "--n", "16", "--trials", "2000", "--seed", "5"],
    "greedy": ["greedy", "--letters", "4000", "--seed", "5"],
    "exceptional": ["exceptional", "--stage", "2", "--letters", "300000", "--seed", "2"],
    "en": ["en", "--n", "1", "--trials", "40", "--horizon", "20000", "--seed", "5"],
    "en-oracle": ["en-oracle", "--n", "2", "--trials", "3000", "--seed", "5"],
    "teleport": ["teleport", "--n", "2", "--trials", "300", "--seed", "5"],
    "multi": ["multi", "--k", "2", "--phases", "2", "--letters", "300000", "--seed", "2"],
    "branching": ["branching", "--eps", "0.5", "--horizon", "12", "--seed", "5"],
    "tinybox": [
        "tinybox", "--eps", "0.5", "--horizon", "60", "--r", "1",
        "--cap", "2000", "--seed", "5",
    ],
    "carne": ["carne", "--graph", "path:5", "--tmax", "12"],
    "chernoff": ["chernoff", "--n", "50", "--p", "0.5", "--eps", "0.3"],
    "displacement": [
        "displacement", "--graph", "full:1", "--delta", "0.8", "--n", "30",
        "--trials", "2000", "--seed", "5",
    ],
    "fit": [
        "fit", "--n-lo", "1", "--n-hi", "3", "--trials", "30",
        "--horizon", "40000", "--seed", "5",
    ],
    "escape": ["escape", "--letters", "30000", "--seed", "2"],
}


def test_every_subcommand_has_a_fast_case():
    parser = build_parser()
    names = set(parser._subparsers._group_actions[0].choices)
    assert names == set(FAST_CASES)


@pytest.mark.parametrize("name", sorted(FAST_CASES))
def test_rerun_is_byte_identical(name, capsys):
    code1, out1, err1 = run_cli(capsys, *FAST_CASES[name])
    code2, out2, err2 = run_cli(capsys, *FAST_CASES[name])
    assert code1 == code2 == 0, err1
    assert out1 == out2
    assert err1 == err2 == ""
    assert out1.startswith("# config=")


@pytest.mark.parametrize("name", ["gambler", "carne", "tinybox"])
def test_json_format_parses_and_matches_config(name, capsys):
    code, out, _ = run_cli(capsys, *FAST_CASES[name], "--format", "json")
    assert code == 0
    payload = json.loads(out)
    assert set(payload) == {"config", "config_hash", "rows"}
    cfg = payload["config"]
    rc = RunConfig(subcommand=cfg["subcommand"], params=cfg["params"], seed=cfg["seed"])
    assert rc.hash == payload["config_hash"]
    assert payload["rows"]
    # round two, identical bytes again
    _, out2, _ = run_cli(capsys, *FAST_CASES[name], "--format", "json")
    assert out2 == out


def test_csv_and_json_agree_on_values(capsys):
    _, csv_text, _ = run_cli(capsys, *FAST_CASES["chernoff"])
    _, json_text, _ = run_cli(capsys, *FAST_CASES["chernoff"], "--format", "json")
    rows = json.loads(json_text)["rows"]
    lines = csv_text.strip().split("\n")
    header = lines[1].split(",")
    assert header[0] == "name"
    first = dict(zip(header, lines[2].split(",")))
    assert first["name"] == rows[0]["name"] == "chernoff"
    assert float(first["estimate"]) == rows[0]["estimate"]


def test_config_hash_tracks_data_flags_only(capsys):
    base = FAST_CASES["gambler"]
    _, out_a, _ = run_cli(capsys, *base)
    _, out_b, _ = run_cli(capsys, *base, "--format", "json")
    _, out_c, _ = run_cli(capsys, base[0], "--n", "4", "--trials", "2001",
                          "--seed", "5")
    hash_a = out_a.split("\n", 1)[0].removeprefix("# config=")
    hash_b = json.loads(out_b)["config_hash"]
    hash_c = out_c.split("\n", 1)[0].removeprefix("# config=")
    assert hash_a == hash_b  # presentation flag does not enter the hash
    assert hash_a != hash_c  # a data flag does


def test_out_file_written_with_lf_endings(tmp_path, capsys):
    target = tmp_path / "report.csv"
    code, out, _ = run_cli(capsys, *FAST_CASES["chernoff"], "--out", str(target))
    assert code == 0
    assert out == ""
    raw = target.read_bytes()
    assert b"\r" not in raw
    assert raw.decode().startswith("# config=")


def test_snapshot_flag_writes_edge_file(tmp_path, capsys):
    snap = tmp_path / "edges.txt"
    code, out, _ = run_cli(
        capsys, "exceptional", "--stage", "2", "--letters", "300000",
        "--seed", "2", "--snapshot", str(snap),
    )
    assert code == 0
    text = snap.read_text()
    assert text.startswith("exwalk-edges v1 d=2\n")
    # stage table still lands on stdout
    assert out.splitlines()[1] == "stage,start_t,end_t,alpha,tau"


def test_exceptional_stage_zero_is_header_only(capsys):
    code, out, _ = run_cli(capsys, "exceptional", "--stage", "0", "--seed", "7")
    assert code == 0
    assert out.splitlines()[1:] == ["stage,start_t,end_t,alpha,tau"]


def test_usage_error_exits_one(capsys):
    assert run_cli(capsys, "gambler")[0] == 1  # missing required flags
    assert run_cli(capsys)[0] == 1  # no subcommand
    assert run_cli(capsys, "no-such-command")[0] == 1


def test_help_exits_zero(capsys):
    assert run_cli(capsys, "--help")[0] == 0
    assert run_cli(capsys, "en", "--help")[0] == 0


def test_runtime_error_exits_two_with_json_stderr(capsys):
    code, out, err = run_cli(capsys, "en", "--n", "50", "--trials", "1",
                             "--seed", "5")
    assert code == 2
    assert out == ""
    msg = json.loads(err)
    assert msg["error"] == "RangeError"
    assert msg["message"]


def test_bad_graph_spec_exits_two(capsys):
    code, _, err = run_cli(capsys, "carne", "--graph", "torus:4")
    assert code == 2
    assert json.loads(err)["error"] == "RangeError"


def test_carne_rejects_infinite_graph(capsys):
    code, _, err = run_cli(capsys, "carne", "--graph", "full:2")
    assert code == 2
    assert "finite" in json.loads(err)["message"]


def test_parse_graph_shapes():
    assert isinstance(_parse_graph("full:3"), FullLattice)
    path = _parse_graph("path:4")
    assert isinstance(path, ExplicitFinite)
    assert path.box == ((0, 3),)
    grid = _parse_graph("grid:3")
    assert grid.degree((0, 0)) == 4
    comb = _parse_graph("comb:2")
    assert comb.degree((1, 1)) == 2  # tooth interior: vertical only
    assert comb.degree((0, 0)) == 4  # spine center keeps everything
    assert Edge((1, 1), 0) not in comb.present
    with pytest.raises(RangeError):
        _parse_graph("grid:4")
    with pytest.raises(RangeError):
        _parse_graph("path:1")


def test_installed_entry_point_matches_in_process(capsys):
    args = FAST_CASES["chernoff"]
    _, expected, _ = run_cli(capsys, *args)
    proc = subprocess.run(
        [sys.executable, "-m", "exwalk.cli", *args],
        capture_output=True, text=True, timeout=60,
    )
    assert proc.returncode == 0
    assert proc.stdout == expected
