import csv
import json
import math

import pytest

from didcnc import cli
from didcnc.cli import PointStore, SweepSpec, bisect_boundary, main, render_plot, sweep_lambda
from didcnc.model import Scenario, ScenarioError, default_grid_scenario, save_scenario
from didcnc.model import ClientSpec

from conftest import line_graph, service


@pytest.fixture
def tandem_file(tmp_path):
    g = line_graph("sabd", cap=6, proc=10, sources={"k": {"b"}})
    sc = Scenario(graph=g, clients=(ClientSpec("s", "d", service((1, 1, "k", 1)), 1),), slot_count=10_000)
    path = tmp_path / "tandem.json"
    save_scenario(sc, path)
    return path


@pytest.fixture
def counted(monkeypatch):
    calls = []
    real = cli._simulate_point

    def wrapper(*args):
        calls.append(args[1:])
        return real(*args)

    monkeypatch.setattr(cli, "_simulate_point", wrapper)
    return calls


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_spec_validation():
    with pytest.raises(ScenarioError):
        SweepSpec("lambda", [])
    with pytest.raises(ScenarioError):
        SweepSpec("lambda", [-1])
    with pytest.raises(ScenarioError):
        SweepSpec("alpha", [0])
    with pytest.raises(ScenarioError):
        SweepSpec("alpha", [1.2])
    with pytest.raises(ScenarioError):
        SweepSpec("cache", [17])
    with pytest.raises(ScenarioError):
        SweepSpec("lambda", [1], policies=["greedy"])
    with pytest.raises(ScenarioError):
        SweepSpec("lambda", [1], slots=500)
    with pytest.raises(ScenarioError):
        SweepSpec("volume", [1])
    with pytest.raises(ScenarioError) as exc:
        SweepSpec.from_dict({"kind": "lambda", "grid": [1], "colour": 1})
    assert "colour" in str(exc.value)
    spec = SweepSpec("cache", [1, 16.0])
    assert spec.kind == "cache_index" and spec.grid == (1, 16)


def test_spec_load_resolves_relative_scenario(tmp_path, tandem_file):
    p = tmp_path / "spec.json"
    p.write_text(json.dumps({"kind": "lambda", "grid": [1], "scenario": "tandem.json", "slots": 10_000}))
    spec = SweepSpec.load(p)
    assert spec.base_scenario().graph.nodes == ("a", "b", "d", "s")


def test_lambda_sweep_resumable(tmp_path, tandem_file, counted):
    spec = SweepSpec("lambda", [1, 5], policies=["DI-DCNC", "L2S"], seeds=[1], scenario=str(tandem_file),
                     slots=10_000, iterations=3)
    out = tmp_path / "out"
    first = sweep_lambda(spec, out)
    n = len(counted)
    assert n == 2 * 2 + 2 * 3
    delay = _rows(out / "lambda_delay.csv")
    assert [(r["policy"], r["lambda"]) for r in delay] == [("DI-DCNC", "1"), ("DI-DCNC", "5"),
                                                           ("L2S", "1"), ("L2S", "5")]
    assert all(r["stable"] == "1" and math.isfinite(float(r["mean_delay"])) for r in delay)
    bounds = {r["policy"]: r for r in _rows(out / "lambda_boundaries.csv")}
    assert float(bounds["DI-DCNC"]["boundary"]) <= float(bounds["DI-DCNC"]["lp_bound"])
    assert (out / "lambda_delay.png").stat().st_size > 0
    again = sweep_lambda(spec, out)
    assert len(counted) == n and again == first
    sweep_lambda(spec, out, force=True)
    assert len(counted) == 2 * n


def test_point_store_keys_distinguish(tmp_path):
    sc = default_grid_scenario()
    k1 = PointStore.key(sc, "DI-DCNC", 1, 10_000)
    assert k1 == PointStore.key(sc, "DI-DCNC", 1, 10_000)
    assert k1 != PointStore.key(sc.with_rates(5), "DI-DCNC", 1, 10_000)
    assert k1 != PointStore.key(sc, "S2L", 1, 10_000)
    assert k1 != PointStore.key(sc, "DI-DCNC", 2, 10_000)


def test_bisection_uses_votes(tmp_path, tandem_file, monkeypatch):
    # fake stability: stable iff rate < 2.3, one seed flips at 1.5 (minority)
    def fake(sc, policy, seed, slots):
        lam = float(sc.clients[0].arrival_rate)
        stable = lam < 2.3 and not (seed == 3 and lam > 1.5)
        return {"policy": policy, "lambda": lam, "alpha_proc": 1.0, "alpha_tx": 1.0, "seed": seed, "slots": slots,
                "slots_run": slots, "mean_delay": 5.0 if stable else math.inf, "stable": int(stable),
                "throughput": lam, "seconds": 0.0}

    monkeypatch.setattr(cli, "_simulate_point", fake)
    store = PointStore(tmp_path)
    sc = default_grid_scenario()
    b, probes = bisect_boundary(store, sc, "DI-DCNC", 4.0, (1, 2, 3), 10_000, iterations=8)
    assert 2.3 - 4.0 / 256 <= b < 2.3
    assert len(probes) == 8


def test_plot_reads_only_tables(tmp_path):
    with open(tmp_path / "cache_index.csv", "w") as fh:
        fh.write("policy,cache_index,boundary,lp_bound,min_alpha\nDI-DCNC,1,12,13,0.4\nDI-DCNC,2,15,16,nan\n")
    path = render_plot("cache_index", tmp_path)
    assert path.exists() and path.stat().st_size > 0
    with open(tmp_path / "alpha_border.csv", "w") as fh:
        fh.write("policy,alpha_tx,alpha_proc\nS2L,1,0.2\nS2L,0.5,nan\n")
    assert render_plot("alpha", tmp_path).exists()
    with pytest.raises(ValueError):
        render_plot("pie", tmp_path)


def test_alpha_sweep_small(tmp_path, tandem_file):
    spec = SweepSpec("alpha", [1.0], policies=["DI-DCNC"], seeds=[1], scenario=str(tandem_file), slots=10_000,
                     iterations=3, rate=1.0, delay_bound=20)
    res = cli.sweep_alpha(spec, tmp_path)
    sav = res["DI-DCNC"]
    # processing at the cache node b: one request per slot needs 1 of the 6 link units
    # and 1 of 10 processing units, so alpha >= 1/6; three halvings end at 1/4
    assert sav["diagonal_saving"] == 0.75
    assert sav["processing_saving"] >= sav["diagonal_saving"]
    assert (tmp_path / "alpha_savings.csv").exists() and (tmp_path / "alpha_border.png").exists()


def test_cli_run(tmp_path, tandem_file, monkeypatch, capsys):
    monkeypatch.setenv("DIDCNC_OUT", str(tmp_path / "o"))
    assert main(["run", str(tandem_file), "--slots", "300", "--seed", "4", "--trace-routes",
                 "--trace-queues"]) == 0
    run_dir = tmp_path / "o" / "run-tandem-DI-DCNC-s4"
    assert {p.name for p in run_dir.iterdir()} == {"timeseries.csv", "summary.csv", "routes.txt", "queues.csv"}
    (row,) = _rows(run_dir / "summary.csv")
    assert row["policy"] == "DI-DCNC" and row["seed"] == "4" and row["slots"] == "300"
    assert _rows(run_dir / "queues.csv")[0].keys() == {"slot", "entity", "q_virtual", "q_normalized"}
    assert "throughput" in capsys.readouterr().out


def test_cli_oracle(tmp_path, tandem_file, capsys):
    assert main(["--out", str(tmp_path), "oracle", "lp", str(tandem_file), "--exact", "--witness"]) == 0
    text = capsys.readouterr().out
    assert "theta*: 6" in text  # static data is local to b; each link carries one unit per request
    assert (tmp_path / "lp_witness.csv").exists()


def test_cli_sweep_and_errors(tmp_path, tandem_file, capsys):
    spec = tmp_path / "s.json"
    spec.write_text(json.dumps({"kind": "lambda", "grid": [1], "policies": ["S2L"], "seeds": [2],
                                "scenario": tandem_file.name, "slots": 10_000, "boundaries": False}))
    assert main(["--out", str(tmp_path / "o"), "sweep", "lambda", str(spec)]) == 0
    assert (tmp_path / "o" / "lambda_delay.csv").exists()
    assert main(["--out", str(tmp_path / "o"), "sweep", "alpha", str(spec)]) == 2
    assert main(["run", str(tmp_path / "missing.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert main(["oracle", "lp", str(bad)]) == 2
    assert "error" in capsys.readouterr().err


def test_cache_spec_with_relative_scenario(tmp_path, tandem_file):
    p = tmp_path / "spec.json"
    p.write_text(json.dumps({"kind": "cache", "grid": [1, 4], "scenario": "tandem.json", "slots": 10_000}))
    assert SweepSpec.load(p).grid == (1, 4)


def test_shipped_sweep_specs_load():
    from pathlib import Path

    root = Path(__file__).resolve().parents[1] / "scenarios"
    kinds = {SweepSpec.load(p).kind for p in root.glob("sweep_*.json")}
    assert kinds == {"lambda", "alpha", "cache_index"}
