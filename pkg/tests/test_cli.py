import csv
import json

import pytest

from swsynth.cli import main
from swsynth.expnet import ExpNetwork, network_from_reals, save_network


def run(tmp_path, *argv, sub="out"):
    out = tmp_path / sub
    code = main([*argv, "--output", str(out)])
    return code, out


def _report(out, name):
    return json.loads((out / name).read_text())


def test_bound(tmp_path):
    code, out = run(tmp_path, "bound", "--d", "2", "--diam", "1.4142", "--delta", "0.3", "--eps", "0.1")
    rep = _report(out, "bound.json")
    assert code == 0 and rep["h_log10"] == pytest.approx(287.6, abs=0.05)
    assert rep["version"] and rep["construction_parameters"]["d"] == 2 and rep["config"]["eps"] == 0.1


def test_bound_sweep_monotone(tmp_path):
    code, out = run(tmp_path, "bound", "--d", "2", "--diam", "1.4142", "--delta", "0.3", "--eps", "0.1", "--sweep-eps", "0.5,0.25,0.1")
    rows = list(csv.DictReader((out / "bound_sweep.csv").open()))
    h = [float(r["h_log10"]) for r in rows]
    assert code == 0 and len(rows) == 3 and h == sorted(h)


def test_bound_d1(tmp_path, capsys):
    code, _ = run(tmp_path, "bound", "--d", "1", "--diam", "1", "--delta", "0.3", "--eps", "0.1")
    assert code == 2 and "d >= 2" in capsys.readouterr().err
    code, _ = run(tmp_path, "bound", "--d", "1", "--diam", "1", "--delta", "0.3", "--eps", "0.1", "--force")
    assert code == 0


def test_construct_linear(tmp_path):
    code, out = run(tmp_path, "construct", "--function", "linear", "--eps-target", "0.5")
    rep = _report(out, "construct.json")
    assert code == 0
    assert rep["n_slices"] == 7 and rep["delta"] == 0.125 and rep["eps"] == 0.25
    assert rep["num_cubes"] == 36 * 36
    for key in ("sup_err", "witness", "bound_log10", "measured_units_log10", "per_cube_eps", "r"):
        assert key in rep
    assert rep["checks"]["uncovered"] == 0 and rep["checks"]["nested"]


def test_construct_constant(tmp_path):
    code, out = run(tmp_path, "construct", "--function", "constant", "--eps-target", "0.5")
    rep = _report(out, "construct.json")
    assert code == 0 and rep["n_slices"] == 1 and "n-slices-clamped" in rep["flags"]


def test_construct_expand(tmp_path):
    code, out = run(
        tmp_path, "construct", "--dim", "1", "--eps-target", "0.8", "--r-override", "0.5", "--cube-k", "2", "--cube-n", "1", "--expand"
    )
    rep = _report(out, "construct.json")
    assert code == 0 and rep["expansion"]["written"] and (out / "construct_network.json").exists()
    code, out = run(tmp_path, "construct", "--eps-target", "0.5", "--expand", sub="o2")
    assert not _report(out, "construct.json")["expansion"]["written"]


def test_construct_bad_csv(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("x1,z,value\n0,0,1\n")
    code, _ = run(tmp_path, "construct", "--csv", str(bad))
    assert code == 2 and "'z'" in capsys.readouterr().err
    code, _ = run(tmp_path, "construct", "--csv", str(tmp_path / "missing.csv"))
    assert code == 2


def test_construct_csv(tmp_path):
    path = tmp_path / "f.csv"
    rows = ["x1,x2,value"] + [f"{x / 4},{y / 4},{x / 4}" for y in range(5) for x in range(5)]
    path.write_text("\n".join(rows) + "\n")
    code, out = run(tmp_path, "construct", "--csv", str(path), "--eps-target", "0.5")
    assert code == 0 and _report(out, "construct.json")["target"]["kind"] == "sampled"


def test_audit_combinatorics_reports_violations(tmp_path):
    # Robbins at k = n and the lattice-ball bound for rho < 1 fail as stated
    code, out = run(tmp_path, "audit", "combinatorics")
    rep = _report(out, "audit_combinatorics.json")
    assert code == 1
    assert rep["violations"]["robbins"] == 39 and rep["violations"]["l1_count"] == 0
    code, out = run(tmp_path, "audit", "combinatorics", "--ball-rho", "1,1.5,2", "--robbins-n-max", "2", sub="o2")
    rep = _report(out, "audit_combinatorics.json")
    assert rep["violations"]["lattice_ball"] == 0


def test_audit_bernoulli(tmp_path):
    code, out = run(tmp_path, "audit", "bernoulli")
    rows = list(csv.DictReader((out / "audit_bernoulli.csv").open()))
    assert code == 0
    assert any(r["lower_holds"] == "False" for r in rows)


def test_audit_cube(tmp_path):
    code, out = run(tmp_path, "audit", "cube", "--d", "2", "--threads", "2")
    assert code == 0 and _report(out, "audit_cube.json")["membership_violations"] == 0


def test_lift(tmp_path):
    empty = tmp_path / "empty.json"
    save_network(ExpNetwork(2), empty)
    code, out = run(tmp_path, "lift", str(empty))
    assert code == 0 and json.loads((out / "lifted.json").read_text())["units"] == []
    net = tmp_path / "net.json"
    save_network(network_from_reals(2, [0.5, -0.3], [[1.0, 0.5], [-0.7, 1.2]], [0.1, 0.0]), net)
    counts = {}
    for kind in ("step", "sigmoid"):
        code, out = run(tmp_path, "lift", str(net), "--eps", "0.2", "--kind", kind, sub=kind)
        rep = _report(out, "lift.json")
        assert code == 0 and rep["probe_err"] <= 0.1 and rep["unit_count"] == sum(rep["per_unit_counts"])
        counts[kind] = rep["unit_count"]
    assert counts["sigmoid"] >= counts["step"]


def test_lift_transfer_mismatch(tmp_path):
    net = tmp_path / "relu.json"
    save_network(network_from_reals(1, [1.0], [[1.0]], transfer="relu"), net)
    code, _ = run(tmp_path, "lift", str(net))
    assert code == 2


def test_config_file(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"d": 3, "diam": 1.0, "delta": 0.2, "eps": 0.3}))
    code, out = run(tmp_path, "bound", "--config", str(cfg), "--d", "2")
    rep = _report(out, "bound.json")
    assert code == 0 and rep["config"]["d"] == 2 and rep["config"]["eps"] == 0.3
    cfg.write_text(json.dumps({"nonsense": 1}))
    with pytest.raises(SystemExit):
        main(["bound", "--config", str(cfg)])
