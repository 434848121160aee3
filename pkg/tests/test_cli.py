import csv
import json

import pytest

from equipart import __version__
from equipart.catalog import TARGETS
from equipart.cli import (
    ConfigError,
    RunReport,
    main,
    parse_config,
    run_converge,
    run_list,
    run_verify,
)

SOL1 = {"target": "E3D_SOL1", "params": {"c1": 1, "c2": 2, "profiles": {"G": "sin(s)", "H": "cos(s)"}}}


def write(tmp_path, data, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data) if not isinstance(data, str) else data)
    return str(p)


def test_list_output(capsys):
    assert main(["list"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == len(TARGETS) >= 14
    assert any(l.startswith("E3D_SOL1 — ") for l in lines)
    assert any(l.startswith("fourwell-a9 — Four-well potential") for l in lines)
    assert {e["id"] for e in run_list()} == set(TARGETS)


def test_verify_sol1_passes(tmp_path, capsys):
    assert main(["verify", write(tmp_path, SOL1)]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["schema"] == 1 and rep["library"]["version"] == __version__
    mom = next(c for c in rep["checks"] if c["check"] == "momentum")
    assert mom["passed"]
    parts = {p["name"]: p["linf"] for r in mom["reports"] for p in r["parts"]}
    assert set(parts) == {"momentum_x", "momentum_y", "momentum_z", "divergence"}
    assert max(parts.values()) <= 1e-10


def test_constraint_violation_exits_nonzero(tmp_path, capsys):
    cfg = {"target": "E2D_ISOBARIC",
           "params": {"c1": 1, "c2": 1, "beta": 1, "gamma": 0.5, "profiles": {"g": "sin(s)"}}}
    assert main(["verify", write(tmp_path, cfg)]) == 1
    rep = json.loads(capsys.readouterr().out)
    assert rep["constraints"] and rep["constraints"][0]["constraint"] == "c1*beta + c2*gamma = 0"
    assert not any(c["passed"] for c in rep["checks"])


def test_ac_system_example(capsys):
    argv = ["ac-system", "--example", "fourwell-a9", "--checks", "system", "equipartition", "detgrad", "dependence"]
    assert main(argv) == 0
    rep = json.loads(capsys.readouterr().out)
    assert [c["check"] for c in rep["checks"]] == ["system", "equipartition", "detgrad", "dependence"]
    assert all(c["passed"] for c in rep["checks"])
    assert rep["flags"]["fourwell_normalization"] == "1/128"


def test_tolerance_override(capsys):
    assert main(["ac-system", "--example", "product-example1", "--checks", "system", "--tol", "system=0"]) == 1
    capsys.readouterr()
    with pytest.raises(SystemExit) as e:
        main(["ac-system", "--example", "product-example1", "--tol", "bogus=1"])
    assert e.value.code == 2


@pytest.mark.parametrize("text,fragment", [
    ('{"target": "E3D_SOL1",\n "checks": ["momentum",]}', "line 2"),
    ('{"target": "nope"}', "unknown id"),
    ('{"target": "E3D_SOL1", "colour": 1}', "unknown field"),
    ('{"target": "E3D_SOL1", "checks": ["vorticity"]}', "checks[0]"),
    ('{"target": "E3D_SOL1", "params": {"mu": 1}}', "params.mu"),
    ('{"target": "E3D_SOL1", "tolerances": {"order:vorticity": 0.1}}', "tolerances.order:vorticity"),
    ('{"target": "E3D_SOL1", "refinement": [4, 8]}', "refinement"),
    ('{"target": "E3D_SOL1", "seed": 1.5}', "seed"),
    ('[1, 2]', "top level"),
])
def test_parse_errors(text, fragment):
    with pytest.raises(ConfigError) as e:
        parse_config(text, "cfg.json")
    assert fragment in str(e.value)


def test_config_errors_exit_two(tmp_path, capsys):
    with pytest.raises(SystemExit) as e:
        main(["verify", write(tmp_path, '{"target": "E3D_SOL1", "checks": ["x"]}')])
    assert e.value.code == 2
    assert "checks[0]" in capsys.readouterr().err
    with pytest.raises(SystemExit) as e:
        main(["verify", str(tmp_path / "missing.json")])
    assert e.value.code == 2


def test_converge_fd_slope(tmp_path, capsys):
    cfg = {"target": "E2D_LINEAR_P", "seed": 3, "refinement": [21, 41, 81],
           "grid": {"lo": [-1, -1], "hi": [1, 1]}}
    out = tmp_path / "levels.csv"
    assert main(["converge", write(tmp_path, cfg), "--csv", str(out)]) == 0
    rep = json.loads(capsys.readouterr().out)
    (mom,) = rep["checks"]
    assert mom["order"] == pytest.approx(2.0, abs=0.15)
    assert [row["n"] for row in mom["levels"]] == [21, 41, 81]
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 3 and rows[0]["check"] == "momentum"


def test_converge_fourth_order_identity():
    cfg = parse_config({"target": "product-example1", "checks": ["cross_identity"], "refinement": [21, 41, 81],
                        "grid": {"lo": [-1, -1], "hi": [1, 1]}})
    (c,) = run_converge(cfg).checks
    assert c.passed and c.nominal_order == 4
    assert c.order == pytest.approx(4.0, abs=0.3)


def test_converge_analytic_is_saturated():
    cfg = parse_config({"target": "sigma-family", "checks": ["linear"], "refinement": [9, 17, 33]})
    (c,) = run_converge(cfg).checks
    assert c.order == "saturated" and c.passed


def test_converge_needs_three_levels():
    with pytest.raises(ConfigError):
        run_converge(parse_config({"target": "E2D_LINEAR_P", "refinement": [21, 41]}))


def test_determinism_and_round_trip():
    cfg = parse_config({"target": "E3D_SOL4", "seed": 17})
    a, b = run_verify(cfg), run_verify(cfg)
    assert a.to_json(timing=False) == b.to_json(timing=False)
    assert "timing" not in json.loads(a.to_json(timing=False))
    again = RunReport.from_json(a.to_json())
    assert again.to_json() == a.to_json()
    other = run_verify(parse_config({"target": "E3D_SOL4", "seed": 18}))
    assert other.to_json(timing=False) != a.to_json(timing=False)


def test_output_file(tmp_path):
    out = tmp_path / "report.json"
    assert main(["verify", write(tmp_path, SOL1), "-o", str(out), "--no-timing"]) == 0
    rep = json.loads(out.read_text())
    assert rep["target"]["id"] == "E3D_SOL1" and "timing" not in rep


def test_negative_control_target_fails(capsys):
    assert main(["ac-system", "--example", "radial-candidate"]) == 1
    rep = json.loads(capsys.readouterr().out)
    assert rep["checks"][0]["check"] == "joint" and not rep["checks"][0]["passed"]
