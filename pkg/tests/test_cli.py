import csv
import io
import json
import statistics
import subprocess
import sys

import pytest

from dfp.cli import EXIT_CONFIG, EXIT_CONNECTIVITY, EXIT_OK, main
from dfp.config import build_scenario, parse_config, with_overrides
from dfp.errors import ConfigError


def write(tmp_path, name, doc):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


MINIMAL = {"game": {"kind": "coordination", "n": 3}, "graph": {"kind": "static",
           "base": "complete"}, "run": {"horizon": 1}}

SMALL_BENCH = {
    "game": {"kind": "target-assignment", "n": 4, "seed": 3},
    "graph": {"kind": "edge-cycle", "base": "ring", "T": 4},
    "run": {"horizon": 60, "seed": 1},
}


def test_parse_rejects_unknown_keys():
    with pytest.raises(ConfigError):
        parse_config('{"game": {"kind": "coordination", "colour": 1}}')
    with pytest.raises(ConfigError):
        parse_config("{not json")
    with pytest.raises(ConfigError):
        parse_config('{"weights": {"eta": 2}}')


def test_build_scenario_defaults():
    sc = build_scenario(parse_config("{}"))
    assert sc.sim.game.n == 5 and len(sc.sim.ne_set) >= 120
    assert sc.sim.learning.process == "running-mean"
    sc = build_scenario(parse_config(json.dumps(MINIMAL)))
    assert sc.sim.learning.process == "fixed"
    assert sc.sim.ne_set == {(0, 0, 0), (1, 1, 1)}


def test_build_scenario_errors():
    with pytest.raises(ConfigError):
        build_scenario(parse_config('{"graph": {"n": 4}}'))
    with pytest.raises(ConfigError):
        build_scenario(parse_config('{"graph": {"kind": "periodic"}}'))


def test_overrides():
    cfg = parse_config(json.dumps(SMALL_BENCH))
    o = with_overrides(cfg, seed=9, topology="cycle-star")
    assert o.run.seed == 9 and o.graph.kind == "edge-cycle" and o.graph.base == "star"
    assert o.graph.T == 4
    o = with_overrides(cfg, topology="static-ring")
    assert o.graph.kind == "static"
    with pytest.raises(ConfigError):
        with_overrides(cfg, topology="wobbly-ring")


def test_run_minimal(tmp_path):
    cfg = write(tmp_path, "c.json", MINIMAL)
    assert main(["run", cfg, "--out", str(tmp_path / "o")]) == EXIT_OK
    rows = list(csv.DictReader(io.StringIO((tmp_path / "o" / "trace.csv").read_text())))
    assert len(rows) == 1
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summary["manifest"]["files"] == ["trace.csv", "summary.json"]
    assert summary["config"]["run"]["horizon"] == 1


def test_run_strict_disconnected(tmp_path):
    doc = {"game": {"kind": "coordination", "n": 3},
           "graph": {"kind": "static", "base": [[0, 1]]}, "run": {"horizon": 5}}
    cfg = write(tmp_path, "c.json", doc)
    assert main(["run", cfg, "--strict", "--out", str(tmp_path / "s")]) == EXIT_CONNECTIVITY
    assert main(["run", cfg, "--out", str(tmp_path / "w")]) == EXIT_OK
    summary = json.loads((tmp_path / "w" / "summary.json").read_text())
    assert summary["connectivity"]["connected"] is False


def test_run_bad_config_exit_2(tmp_path):
    assert main(["run", write(tmp_path, "c.json", {"bogus": 1})]) == EXIT_CONFIG
    assert main(["run", str(tmp_path / "missing.json")]) == EXIT_CONFIG


def test_run_with_svg_and_env_out(tmp_path, monkeypatch):
    monkeypatch.setenv("DFP_OUT", str(tmp_path / "env"))
    cfg = write(tmp_path, "c.json", SMALL_BENCH)
    assert main(["run", cfg, "--svg"]) == EXIT_OK
    out = tmp_path / "env"
    files = json.loads((out / "summary.json").read_text())["manifest"]["files"]
    assert set(files) == {"trace.csv", "summary.json", "panels.dat", "estimates.svg",
                          "ne_distance.svg"}
    assert sorted(p.name for p in out.iterdir()) == sorted(files)
    assert (out / "estimates.svg").read_text().lstrip().startswith("<?xml")
    first = (out / "estimates.svg").read_bytes()
    assert main(["run", cfg, "--svg"]) == EXIT_OK
    assert (out / "estimates.svg").read_bytes() == first
    # --out wins over the environment
    assert main(["run", cfg, "--out", str(tmp_path / "flag")]) == EXIT_OK
    assert (tmp_path / "flag" / "trace.csv").exists()


def test_summary_contents(tmp_path):
    cfg = write(tmp_path, "c.json", SMALL_BENCH)
    main(["run", cfg, "--out", str(tmp_path / "o")])
    s = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert s["seed"] == 1
    assert set(s["final"]) == {"estimate_error", "ne_distance", "tv_disagreement", "ne_hit_time"}
    assert len(s["world"]["agent_positions"]) == 4
    assert s["connectivity"]["connected"] is True


def test_rerun_is_byte_identical(tmp_path):
    cfg = write(tmp_path, "c.json", SMALL_BENCH)
    main(["run", cfg, "--out", str(tmp_path / "a")])
    main(["run", cfg, "--out", str(tmp_path / "b")])
    assert (tmp_path / "a" / "trace.csv").read_bytes() == (tmp_path / "b" / "trace.csv").read_bytes()


@pytest.mark.parametrize("graph,code", [
    ({"kind": "edge-cycle", "base": "ring", "T": 5}, EXIT_OK),
    ({"kind": "edge-cycle", "base": "ring", "T": 1}, EXIT_CONNECTIVITY),
    ({"kind": "static", "base": "complete", "T": 1}, EXIT_OK),
])
def test_validate(tmp_path, capsys, graph, code):
    doc = {"game": {"kind": "coordination", "n": 5}, "graph": graph, "run": {"horizon": 50}}
    assert main(["validate", write(tmp_path, "c.json", doc)]) == code
    report = json.loads(capsys.readouterr().out)
    assert report["connectivity"]["connected"] is (code == EXIT_OK)
    assert report["weights"]["ok"] is True


def test_validate_flags_large_eta(tmp_path, capsys):
    doc = dict(MINIMAL, weights={"eta": 0.9})
    assert main(["validate", write(tmp_path, "c.json", doc)]) == EXIT_CONNECTIVITY
    assert json.loads(capsys.readouterr().out)["weights"]["ok"] is False


def test_sweep_aggregates_from_children(tmp_path):
    cfg = write(tmp_path, "c.json", SMALL_BENCH)
    out = tmp_path / "sw"
    topos = ["static-ring", "static-star", "cycle-ring", "cycle-star"]
    assert main(["sweep", cfg, "--seeds", "1,2,3", "--topologies", ",".join(topos),
                 "--out", str(out)]) == EXIT_OK
    sweep = json.loads((out / "sweep.json").read_text())
    assert len(sweep["runs"]) == 12
    for topo in topos:
        finals = [json.loads((tmp_path / "sw" / f"{topo}_seed{s}" / "summary.json").read_text())
                  ["final"] for s in (1, 2, 3)]
        agg = sweep["aggregate"][topo]
        assert agg["median_final_estimate_error"] == statistics.median(
            f["estimate_error"] for f in finals)
        hits = [f["ne_hit_time"] for f in finals if f["ne_hit_time"] is not None]
        assert agg["median_ne_hit_time"] == (statistics.median(hits) if hits else None)
    header = (out / "comparison.csv").read_text().splitlines()[0].split(",")
    assert header[0] == "t" and len(header) == 1 + 2 * len(topos)


def test_single_sweep_matches_run(tmp_path):
    cfg = write(tmp_path, "c.json", SMALL_BENCH)
    main(["sweep", cfg, "--seeds", "1", "--topologies", "cycle-ring",
          "--out", str(tmp_path / "sw")])
    main(["run", cfg, "--out", str(tmp_path / "r")])
    assert ((tmp_path / "sw" / "cycle-ring_seed1" / "trace.csv").read_bytes()
            == (tmp_path / "r" / "trace.csv").read_bytes())


def test_sweep_errors(tmp_path):
    cfg = write(tmp_path, "c.json", SMALL_BENCH)
    assert main(["sweep", cfg, "--seeds", "", "--topologies", "static-ring",
                 "--out", str(tmp_path / "x")]) == EXIT_CONFIG
    assert main(["sweep", cfg, "--seeds", "1", "--topologies", "ring-static",
                 "--out", str(tmp_path / "x")]) == EXIT_CONFIG


def test_sweep_reports_child_failures(tmp_path):
    doc = {"game": {"kind": "coordination", "n": 3},
           "graph": {"kind": "edge-cycle", "base": "ring", "T": 1}, "run": {"horizon": 5}}
    cfg = write(tmp_path, "c.json", doc)
    code = main(["sweep", cfg, "--seeds", "1,2", "--topologies",
                 "cycle-ring,static-ring,random-ring", "--strict", "--out", str(tmp_path / "sw")])
    assert code == EXIT_CONNECTIVITY
    sweep = json.loads((tmp_path / "sw" / "sweep.json").read_text())
    statuses = {(r["topology"], r["seed"]): r["exit_status"] for r in sweep["runs"]}
    assert statuses[("static-ring", 1)] == EXIT_OK
    # the cycle topology widens T to the edge count, so it passes too
    assert statuses[("cycle-ring", 1)] == EXIT_OK
    # half the ring edges per step with T=1 leaves the graph disconnected
    assert statuses[("random-ring", 1)] == EXIT_CONNECTIVITY
    assert sweep["aggregate"]["random-ring"]["runs"] == 0


def test_oracle_lemma1(capsys):
    assert main(["oracle", "lemma1", "--n", "3", "--T", "1", "--seed", "0",
                 "--horizon", "20"]) == EXIT_OK
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert list(rows[0]) == ["t", "s", "actual_maxdev", "kappa_rho_bound"]
    assert len(rows) == 21 * 22 // 2
    assert all(float(r["actual_maxdev"]) <= float(r["kappa_rho_bound"]) for r in rows)


def test_oracle_tracking(capsys):
    assert main(["oracle", "tracking", "--n", "5", "--horizon", "300", "--stride", "10"]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert list(rows[0]) == ["t", "error", "normalized_error"]


def test_console_script_entry_point(tmp_path):
    cfg = write(tmp_path, "c.json", MINIMAL)
    proc = subprocess.run([sys.executable, "-m", "dfp.cli", "validate", cfg],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    proc = subprocess.run([sys.executable, "-m", "dfp.cli", "frobnicate"],
                          capture_output=True, text=True)
    assert proc.returncode == 2
