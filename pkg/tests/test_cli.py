import json

import pytest

from jrc.cli import main
from jrc.instance import canonical_json, load_instance, save_instance, validate

from conftest import make_two_node_instance


def run_cli(*argv):
    return main(list(argv))


def test_gen_validate_round_trip(tmp_path):
    path = tmp_path / "bench.json"
    assert run_cli("gen", "example1", "--out", str(path)) == 0
    assert run_cli("validate", "--instance", str(path)) == 0
    inst = load_instance(path)
    blob = canonical_json(inst)
    save_instance(inst, path)
    assert path.read_text() == blob


def test_gen_example1_derived_sizes(tmp_path):
    path = tmp_path / "bench.json"
    run_cli("gen", "example1", "--out", str(path))
    inst = load_instance(path)
    assert len(inst.fleet) == 5
    assert inst.trips == 4
    assert inst.horizon == 65
    assert [c.count for c in inst.network.chargers] == [2, 2, 1, 2, 2]
    assert "travel_times" in inst.meta["placeholder_data"]


def test_gen_example3_scenarios(tmp_path):
    topo = tmp_path / "topo.json"
    assert run_cli("gen", "example3-topology", "--out", str(topo)) == 0
    base = tmp_path / "base.json"
    assert run_cli("gen", "example3", "--topology", str(topo), "--out", str(base)) == 0
    inst = load_instance(base)
    assert len(inst.fleet) == 50
    assert all(c.count == 3 for c in inst.network.chargers)
    assert validate(inst).ok

    case2 = tmp_path / "case2.json"
    run_cli("gen", "example3", "--topology", str(topo), "--scenario", "case2", "--out", str(case2))
    c2 = load_instance(case2)
    # a single battery size means a single charge rate across the fleet
    assert len({t.charge_rate for t in c2.fleet}) == 1

    case3 = tmp_path / "case3.json"
    run_cli("gen", "example3", "--topology", str(topo), "--scenario", "case3", "--out", str(case3))
    c3 = load_instance(case3)
    paired = {(a.home_depot, a.charge_rate, b.charge_rate) for a, b in zip(inst.fleet, c3.fleet)}
    # double charger power doubles the per-period gain, up to rounding
    assert all(abs(double - 2 * single) <= 1 for _, single, double in paired)


def test_validate_command_rejects_bad_instance(tmp_path):
    inst = make_two_node_instance(trips=3)  # odd trip count
    path = tmp_path / "bad.json"
    save_instance(inst, path)
    assert run_cli("validate", "--instance", str(path)) == 2


def test_solve_then_verify_pipeline(tmp_path):
    path = tmp_path / "tiny.json"
    save_instance(make_two_node_instance(), path)
    out = tmp_path / "run"
    assert run_cli("solve", "--instance", str(path), "--iter-limit", "80", "--out-dir", str(out)) == 0
    assert (out / "trace.csv").exists()
    sol = out / "solution.json"
    data = json.loads(sol.read_text())
    assert data["feasible"] is True
    assert data["cost"]["total"] == 5.0
    assert run_cli("verify", "--instance", str(path), "--solution", str(sol)) == 0


def test_oracle_command(tmp_path, capsys):
    path = tmp_path / "tiny.json"
    save_instance(make_two_node_instance(), path)
    assert run_cli("oracle", "--instance", str(path)) == 0
    assert "optimal cost: 5.0" in capsys.readouterr().out


def test_oracle_budget_exit_code(tmp_path):
    path = tmp_path / "tiny.json"
    save_instance(make_two_node_instance(), path)
    assert run_cli("oracle", "--instance", str(path), "--budget", "20") == 4


def test_gen_detour_pair(tmp_path):
    full = tmp_path / "detour.json"
    restricted = tmp_path / "restricted.json"
    assert run_cli("gen", "detour", "--seed", "3", "--out", str(full),
                   "--out-restricted", str(restricted)) == 0
    f = load_instance(full)
    r = load_instance(restricted)
    assert len(f.network.nodes) == 4 and len(r.network.nodes) == 3
    assert validate(f).ok and validate(r).ok


def test_sweep_battery_capacity_monotone(tmp_path, capsys):
    path = tmp_path / "tiny.json"
    save_instance(make_two_node_instance(discharge_loaded=3000, travel=2, horizon=12), path)
    out = tmp_path / "sweep.csv"
    code = run_cli(
        "sweep", "--instance", str(path), "--parameter", "batteryCapacityScale",
        "--factors", "1.0,1.1,1.3,1.5,1.7", "--backend", "oracle", "--out", str(out),
    )
    assert code == 0
    rows = out.read_text().strip().splitlines()[1:]
    costs = [float(r.split(",")[1]) for r in rows]
    assert costs == sorted(costs, reverse=True)


def test_sweep_rejects_unsorted_factors(tmp_path):
    path = tmp_path / "tiny.json"
    save_instance(make_two_node_instance(), path)
    assert run_cli("sweep", "--instance", str(path), "--parameter", "chargePowerScale",
                   "--factors", "1.3,1.1") == 2


def test_solve_infeasible_exit_code(tmp_path):
    # export demand but a loaded crossing needs more than a full battery
    inst = make_two_node_instance(discharge_loaded=5000, import_qty=0)
    path = tmp_path / "stuck.json"
    save_instance(inst, path)
    out = tmp_path / "run"
    code = run_cli("solve", "--instance", str(path), "--iter-limit", "25", "--out-dir", str(out))
    assert code == 3


def test_random_instance_generation_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    run_cli("gen", "random", "--seed", "5", "--out", str(a))
    run_cli("gen", "random", "--seed", "5", "--out", str(b))
    assert a.read_text() == b.read_text()
    assert run_cli("validate", "--instance", str(a)) == 0
