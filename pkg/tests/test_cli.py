import csv
import json
import shutil
from pathlib import Path

import numpy as np
import pytest

from hvar import grid as grid_mod
from hvar.cli import main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def run(tmp_path, config, command="run", *extra, name="out"):
    out = tmp_path / name
    code = main([command, str(config), "--out-dir", str(out), "--quiet", *extra])
    report = json.loads((out / "report.json").read_text()) if (out / "report.json").exists() else None
    return code, out, report


def write(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


def obstacle_doc(**data):
    d = json.loads((CONFIGS / "obstacle.json").read_text())
    d["data"].update(data)
    return d


def test_obstacle_run_outputs(tmp_path):
    code, out, rep = run(tmp_path, CONFIGS / "obstacle.json")
    assert code == 0 and rep["status"] == "ok" and rep["exit_code"] == 0
    with open(out / "obstacle.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert rows and set(rows[0]) == {"id", "u", "phi", "L", "U", "margin"}
    inside = [r for r in rows if r["L"] != ""]  # exterior rows carry no LS bounds
    assert inside
    for r in inside:
        assert float(r["u"]) <= float(r["phi"]) + 1e-12
        assert float(r["L"]) <= float(r["U"]) + 1e-9
    assert "timestamp" not in json.dumps(rep)


def test_runs_are_bitwise_deterministic(tmp_path):
    for cfg in ("obstacle.json", "mountain_pass.json"):
        _, a, _ = run(tmp_path, CONFIGS / cfg, name=f"a-{cfg}")
        _, b, _ = run(tmp_path, CONFIGS / cfg, "run", "--threads", "3", name=f"b-{cfg}")
        for f in sorted(a.iterdir()):
            assert f.read_bytes() == (b / f.name).read_bytes(), f.name


def test_verify_command(tmp_path):
    code, out, rep = run(tmp_path, CONFIGS / "verify.json", "verify")
    assert code == 0
    names = {r["name"] for r in rep["results"]["suites"]} if isinstance(rep["results"].get("suites"), list) \
        else set(rep["results"]["suites"])
    assert names == {"group", "commutator", "duality", "admissibility", "form"}
    assert (out / "verify.csv").exists()


def test_export_grid_round_trip(tmp_path):
    code, out, rep = run(tmp_path, CONFIGS / "obstacle.json", "export-grid")
    assert code == 0
    g = grid_mod.read_grid_csv(out / "grid.csv")
    ref = grid_mod.build_grid(grid_mod.box(1.0), 0.5, R_trunc=8.0, collar=2)
    np.testing.assert_array_equal(g.nodes, ref.nodes)
    np.testing.assert_array_equal(g.volumes, ref.volumes)
    np.testing.assert_array_equal(g.interior, ref.interior)
    assert rep["grid"]["nodes"] == ref.n


@pytest.mark.parametrize("doc_or_args", [
    "typo", "parse", "u0", "missing", "q",
])
def test_usage_errors_exit_2(tmp_path, doc_or_args, capsys):
    if doc_or_args == "typo":
        d = obstacle_doc()
        d["grdi"] = d.pop("grid")
        cfg = write(tmp_path, d)
    elif doc_or_args == "parse":
        cfg = write(tmp_path, obstacle_doc(f="2 * (x"))
    elif doc_or_args == "u0":
        cfg = write(tmp_path, obstacle_doc(u0="1", phi="0"))
    elif doc_or_args == "q":
        d = json.loads((CONFIGS / "mountain_pass.json").read_text())
        d["solver"]["q"] = 2.9
        cfg = write(tmp_path, d)
    else:
        cfg = tmp_path / "nope.json"
    code, _, rep = run(tmp_path, cfg)
    assert code == 2
    assert "hvar:" in capsys.readouterr().err
    if rep is not None:
        assert rep["status"] == "usage_error" or rep["exit_code"] == 2


def test_bad_arguments_exit_2(tmp_path):
    assert main(["frobnicate", "x"]) == 2
    assert main(["run", str(CONFIGS / "obstacle.json"), "--threads", "0"]) == 2
    assert main([]) == 2


def test_node_cap_exit_2(tmp_path):
    d = obstacle_doc()
    d["grid"]["max_nodes"] = 10
    code, _, rep = run(tmp_path, write(tmp_path, d))
    assert code == 2 and "error" in rep


def test_solver_failure_exit_3(tmp_path):
    d = obstacle_doc(f="5*sin(3*x + y)", phi="0.1")
    d["grid"]["collar"] = 1
    d["solver"].update(max_iter=2, tol=1e-14)
    code, _, rep = run(tmp_path, write(tmp_path, d))
    assert code == 3
    assert {"iterations", "residual"} <= set(rep["error"]["details"])


def test_verification_failure_exit_4(tmp_path):
    d = obstacle_doc()
    d["solver"]["ls_tol"] = 1e-300
    code, out, rep = run(tmp_path, write(tmp_path, d))
    assert code == 4 and rep["exit_code"] == 4
    assert (out / "obstacle.csv").exists()


def test_bundled_configs_all_succeed(tmp_path):
    for cfg in sorted(CONFIGS.glob("*.json")):
        code, _, _ = run(tmp_path, cfg, name=cfg.stem)
        assert code == 0, cfg.name
