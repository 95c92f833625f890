import csv
import json

import numpy as np
import pytest
import yaml

from adarhd.cli import main
from adarhd.experiment import (
    THRESHOLDS,
    RunTrace,
    SpecError,
    expand,
    load_spec,
    parse_spec,
    run_experiment,
    summarize,
)

TOY = {"problem": {"kind": "toy_quadratic", "nx": 2, "ny": 2, "seed": 0},
       "solver": {"algorithm": "adarhd", "mode": "gd", "T": 100}}


def _write(tmp_path, spec, name="spec.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(spec))
    return path


def _numeric(path):
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    return [{k: v for k, v in r.items() if k != "time_s"} for r in rows]


def test_run_toy_writes_trace(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", str(_write(tmp_path, TOY)), "-o", str(out)]) == 0
    csvs = list(out.glob("*.csv"))
    assert len(csvs) == 1
    tr = RunTrace.from_csv(csvs[0])
    assert len(tr) == 100
    assert np.all(np.diff(tr.column("a")) >= 0)
    summary = json.loads((out / "summary.json").read_text())
    assert summary["runs"][0]["status"] == "ok"
    assert "wrote 1 trace" in capsys.readouterr().out


def test_replay_determinism(tmp_path):
    spec = dict(TOY, solver={"algorithm": "adarhd_r", "mode": "cg", "T": 60})
    path = _write(tmp_path, spec)
    main(["run", str(path), "-o", str(tmp_path / "a")])
    main(["run", str(path), "-o", str(tmp_path / "b")])
    (fa,), (fb,) = list((tmp_path / "a").glob("*.csv")), list((tmp_path / "b").glob("*.csv"))
    assert _numeric(fa) == _numeric(fb)


def test_invalid_spec_exit_code(tmp_path, capsys):
    bad = dict(TOY, solver={"algorithm": "adarhd", "T": 10, "a00": 1})
    assert main(["run", str(_write(tmp_path, bad))]) == 2
    assert "solver.a00" in capsys.readouterr().err
    (tmp_path / "broken.yaml").write_text("problem: {kind: toy_quadratic\nsolver: [")
    assert main(["run", str(tmp_path / "broken.yaml")]) == 2
    assert "line" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.yaml")]) == 2


@pytest.mark.parametrize("raw,field", [
    ({"solver": {"algorithm": "adarhd", "T": 1}}, "problem"),
    ({"problem": {"kind": "nope"}, "solver": {"algorithm": "adarhd", "T": 1}}, "problem.kind"),
    ({"problem": {"kind": "toy_quadratic", "d": 3}, "solver": {"algorithm": "adarhd", "T": 1}}, "problem.d"),
    ({"problem": {"kind": "toy_quadratic"}, "solver": {"algorithm": "sgd", "T": 1}}, "solver.algorithm"),
    ({"problem": {"kind": "toy_quadratic"}, "solver": {"algorithm": "adarhd"}}, "solver.T"),
    ({"problem": {"kind": "toy_quadratic"}, "solver": {"algorithm": "adarhd", "T": 1, "a0": -1}}, "a0"),
    ({"problem": {"kind": "toy_quadratic"}, "solver": {"algorithm": "adarhd", "T": 1},
      "sweep": {"step_sizes": 3}}, "sweep.step_sizes"),
    ({"problem": {"kind": "toy_quadratic"}, "solver": {"algorithm": "adarhd", "T": 1},
      "sweep": {"step_sizes": list(range(200)), "seeds": list(range(60))}}, "limit"),
])
def test_spec_errors_name_the_field(raw, field):
    with pytest.raises(SpecError, match=field.replace(".", r"\.")):
        parse_spec(raw)


def test_sweep_grid_and_table(tmp_path, capsys):
    spec = dict(TOY, solver={"algorithm": "adarhd", "mode": "gd", "T": 150},
                sweep={"step_sizes": [0.2, 1, 2, 10, 20], "seeds": [0, 1, 2, 3, 4]})
    out = tmp_path / "sweep"
    assert main(["sweep", str(_write(tmp_path, spec)), "-o", str(out)]) == 0
    assert len(list(out.glob("*.csv"))) == 26  # 25 traces and table.csv
    with open(out / "table.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 5 and all(r["runs"] == "5" for r in rows)
    assert "toy_quadratic_adarhd-gd_a0.2" in capsys.readouterr().out


def test_sweep_key_and_step_mapping():
    spec = parse_spec(dict(TOY, solver={"algorithm": "adarhd", "mode": "cg", "T": 5},
                           sweep={"step_sizes": [2], "seeds": [3]}))
    (job,) = expand(spec)
    assert job["solver"]["a0"] == job["solver"]["b0"] == 2.0 and "c0" not in job["solver"]
    assert job["problem"]["seed"] == 3
    assert job["key"] == "toy_quadratic_adarhd-cg_a2_seed3"
    spec = parse_spec({"problem": {"kind": "toy_quadratic"}, "solver": {"algorithm": "rhgd", "T": 5},
                       "sweep": {"step_sizes": [0.1]}})
    (job,) = expand(spec)
    assert job["solver"]["eta_x"] == job["solver"]["eta_y"] == 0.1


def test_divergence_recorded_as_status(tmp_path):
    spec = parse_spec({"problem": {"kind": "toy_quadratic", "C": [[1.0, 0.0], [0.0, 2.0]]},
                       "solver": {"algorithm": "rhgd", "T": 50, "eta_x": 5, "eta_y": 5},
                       "output": {"dir": str(tmp_path / "div")}})
    (res,) = run_experiment(spec)
    assert res["status"] == "diverged"
    rows = summarize(tmp_path / "div")
    assert all(rows[0][f"{t:g}"] == "/" for t in THRESHOLDS)
    assert rows[0]["diverged"] == 1


def test_summarize_single_converged_trace(tmp_path, capsys):
    spec = parse_spec({"problem": {"kind": "toy_quadratic", "C": [[1.0, 0.0], [0.0, 2.0]]},
                       "solver": {"algorithm": "adarhd", "T": 400, "inner_cap": None},
                       "output": {"dir": str(tmp_path / "one")}})
    run_experiment(spec)
    (row,) = summarize(tmp_path / "one")
    times = [float(row[f"{t:g}"].split()[0]) for t in THRESHOLDS]
    assert times == sorted(times)
    assert main(["summarize", str(tmp_path / "one"), "-o", str(tmp_path / "t.csv")]) == 0
    assert (tmp_path / "t.csv").exists()
    assert main(["summarize", str(tmp_path / "empty")]) == 2


def test_robust_seed_spread(tmp_path):
    # a tall C keeps C^T C well conditioned across seeds; square 2x2 or 3x3
    # draws have erratic smallest singular values and a much larger spread
    spec = parse_spec({"problem": {"kind": "toy_quadratic", "nx": 5, "ny": 20},
                       "solver": {"algorithm": "adarhd", "T": 600, "inner_cap": None},
                       "sweep": {"seeds": [0, 1, 2, 3, 4]},
                       "output": {"dir": str(tmp_path / "spread")}})
    run_experiment(spec)
    (row,) = summarize(tmp_path / "spread")
    cell = row["0.001"]
    assert cell != "/"
    mean, std = float(cell.split()[0]), float(cell.split()[1].strip("()"))
    assert std / mean <= 0.5


def test_output_root_env(tmp_path, monkeypatch):
    monkeypatch.setenv("ADARHD_OUTPUT_ROOT", str(tmp_path / "root"))
    spec = dict(TOY, solver={"algorithm": "adarhd", "T": 5}, output={"dir": "rel"})
    assert main(["run", str(_write(tmp_path, spec))]) == 0
    assert len(list((tmp_path / "root" / "rel").glob("*.csv"))) == 1


def test_minmax_and_parallel_workers(tmp_path):
    spec = parse_spec({"problem": {"kind": "saddle"}, "solver": {"algorithm": "minmax", "T": 50},
                       "sweep": {"step_sizes": [1, 2], "workers": 2},
                       "output": {"dir": str(tmp_path / "mm")}})
    res = run_experiment(spec)
    assert [r["status"] for r in res] == ["ok", "ok"]
    assert [r["key"] for r in res] == sorted(r["key"] for r in res)


def test_check_quick(tmp_path, capsys):
    assert main(["check", "--quick", "--samples", "5", "--points", "2", "--json", str(tmp_path / "c.json")]) == 0
    assert "checks passed" in capsys.readouterr().out
    reports = json.loads((tmp_path / "c.json").read_text())
    assert all(r["pass"] for r in reports)


def test_load_spec_json(tmp_path):
    path = tmp_path / "s.json"
    path.write_text(json.dumps(TOY))
    assert load_spec(path).solver["T"] == 100
