import json
import re

import numpy as np
import pytest

from cate_judge import cli
from cate_judge.benchmark import ScenarioConfig, gen_scenario, sample_dataset
from cate_judge.cli import CsvFormatError, main, parse_dataset_csv, write_dataset_csv, write_predictions
from cate_judge.report import write_json


def _write(path, text):
    path.write_text(text)
    return path


def test_parse_three_rows(tmp_path):
    f = _write(tmp_path / "d.csv", "x1,x2,w,y\n0.5,1,0,2.0\n-1,2,1,3.5\n0,0,1,-1\n")
    ds = parse_dataset_csv(f)
    assert ds.n == 3 and ds.d == 2
    np.testing.assert_array_equal(ds.treatment, [0, 1, 1])


def test_parse_bad_treatment_names_row_and_column(tmp_path):
    lines = ["x1,w,y"] + [f"{i},{i % 2},0.0" for i in range(4)] + ["9,2,0.0"]
    f = _write(tmp_path / "d.csv", "\n".join(lines) + "\n")
    with pytest.raises(CsvFormatError) as info:
        parse_dataset_csv(f)
    assert info.value.row == 5 and info.value.column == "w"
    assert "row 5" in str(info.value) and "column w" in str(info.value)


@pytest.mark.parametrize("text, row, column", [
    ("x1,w\n1,0\n", 0, None),
    ("x1,w,y\n1,0,nan\n2,1,0\n", 1, "y"),
    ("x1,w,y\n1,0,0\nabc,1,0\n", 2, "x1"),
    ("x1,w,y\n1,0,0\n2,1\n", 2, None),
])
def test_parse_errors(tmp_path, text, row, column):
    with pytest.raises(CsvFormatError) as info:
        parse_dataset_csv(_write(tmp_path / "d.csv", text))
    assert info.value.row == row and info.value.column == column


def test_parse_min_rows(tmp_path):
    f = _write(tmp_path / "d.csv", "x1,w,y\n1,0,0\n2,1,0\n3,1,0\n")
    with pytest.raises(CsvFormatError):
        parse_dataset_csv(f, min_rows=4)


def test_export_then_parse_round_trip(tmp_path):
    dgp = gen_scenario(ScenarioConfig("D", seed=2))
    ds, _ = sample_dataset(dgp, 50, 1.0, seed=3)
    write_dataset_csv(tmp_path / "d.csv", ds)
    back = parse_dataset_csv(tmp_path / "d.csv")
    for name in ("covariates", "treatment", "outcome"):
        np.testing.assert_allclose(getattr(back, name), getattr(ds, name), rtol=0, atol=1e-12)


@pytest.fixture
def fixture_dir(tmp_path):
    assert main(["generate", "--n", "300", "--seed", "5", "--out-dir", str(tmp_path / "fx")]) == 0
    return tmp_path / "fx"


def test_compare_identical_predictions(fixture_dir, tmp_path, capsys):
    tau = str(fixture_dir / "tau.csv")
    code = main(["compare", "--data", str(fixture_dir / "data.csv"), "--pred-a", tau, "--pred-b", tau,
                 "--nuisance", "logistic-ols", "--out", str(tmp_path / "out")])
    assert code == 0
    assert "warning" in capsys.readouterr().err
    res = json.loads((tmp_path / "out" / "results.json").read_text())
    assert res["verdict"]["decision"] == "Inconclusive"
    assert res["estimates"]["relative"]["point"] == 0.0
    assert res["estimates"]["relative"]["se"] == 0.0
    assert res["warnings"]


def test_compare_bad_alpha_names_flag(fixture_dir, tmp_path, capsys):
    tau = str(fixture_dir / "tau.csv")
    code = main(["compare", "--data", str(fixture_dir / "data.csv"), "--pred-a", tau, "--pred-b", tau,
                 "--alpha", "1.5", "--out", str(tmp_path / "o")])
    assert code == 2
    assert "--alpha" in capsys.readouterr().err


def test_compare_length_mismatch(fixture_dir, tmp_path):
    write_predictions(tmp_path / "short.csv", np.zeros(10))
    code = main(["compare", "--data", str(fixture_dir / "data.csv"), "--pred-a", str(fixture_dir / "tau.csv"),
                 "--pred-b", str(tmp_path / "short.csv"), "--out", str(tmp_path / "o")])
    assert code == 2


def test_compare_missing_file_and_bad_nuisance(fixture_dir, tmp_path):
    tau = str(fixture_dir / "tau.csv")
    assert main(["compare", "--data", str(tmp_path / "nope.csv"), "--pred-a", tau, "--pred-b", tau,
                 "--out", str(tmp_path / "o")]) == 2
    assert main(["compare", "--data", str(fixture_dir / "data.csv"), "--pred-a", tau, "--pred-b", tau,
                 "--nuisance", "forest", "--out", str(tmp_path / "o")]) == 2


def test_compare_numerical_failure_exit_code(fixture_dir, tmp_path, monkeypatch):
    def broken(*args, **kwargs):
        raise np.linalg.LinAlgError("singular")
    monkeypatch.setattr(cli, "cross_fit", broken)
    tau = str(fixture_dir / "tau.csv")
    assert main(["compare", "--data", str(fixture_dir / "data.csv"), "--pred-a", tau, "--pred-b", tau,
                 "--out", str(tmp_path / "o")]) == 3


def test_compare_log_link(fixture_dir, tmp_path):
    tau = str(fixture_dir / "tau.csv")
    write_predictions(tmp_path / "zero.csv", np.zeros(300))
    code = main(["compare", "--data", str(fixture_dir / "data.csv"), "--pred-a", tau,
                 "--pred-b", str(tmp_path / "zero.csv"), "--link", "log", "--out", str(tmp_path / "o")])
    assert code == 0
    res = json.loads((tmp_path / "o" / "results.json").read_text())
    assert res["n_clamped"] > 0


def test_compare_picks_oracle_over_corrupted(tmp_path):
    dgp = gen_scenario(ScenarioConfig("A", seed=1))
    write_json(tmp_path / "dgp.json", dgp.to_dict())
    first = 0
    for seed in range(100):
        ds, tau = sample_dataset(dgp, 500, 1.0, seed=seed)
        write_dataset_csv(tmp_path / "d.csv", ds)
        write_predictions(tmp_path / "a.csv", tau)
        write_predictions(tmp_path / "b.csv", tau + np.random.default_rng(seed).normal(size=ds.n))
        out = tmp_path / "out"
        assert main(["compare", "--data", str(tmp_path / "d.csv"), "--pred-a", str(tmp_path / "a.csv"),
                     "--pred-b", str(tmp_path / "b.csv"), "--nuisance", f"true:{tmp_path / 'dgp.json'}",
                     "--seed", str(seed), "--out", str(out)]) == 0
        first += json.loads((out / "results.json").read_text())["verdict"]["decision"] == "SelectFirst"
    assert first >= 95


SIM = ["simulate", "--scenario", "a", "--dgp-draws", "1", "--reps", "1", "--n-train", "200",
       "--n-test", "100", "--n-oracle", "10000", "--seed", "7"]


@pytest.fixture(scope="module")
def sim_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    assert main(SIM + ["--out-dir", str(out)]) == 0
    return out


def test_simulate_writes_declared_files(sim_dir):
    res = json.loads((sim_dir / "results.json").read_text())
    assert res["schema_version"] == cli.SCHEMA_VERSION
    assert (sim_dir / "metrics.csv").exists()
    svgs = sorted(p.name for p in sim_dir.glob("*.svg"))
    assert len(svgs) == len(res["config"]["methods"]) * 4


def test_simulate_is_deterministic(sim_dir, tmp_path):
    assert main(SIM + ["--workers", "2", "--out-dir", str(tmp_path)]) == 0
    assert (tmp_path / "results.json").read_bytes() == (sim_dir / "results.json").read_bytes()


def test_simulate_rejects_bad_scenario(tmp_path):
    assert main(["simulate", "--scenario", "e", "--out-dir", str(tmp_path)]) == 2


def test_simulate_run_file(tmp_path):
    run = {"schema_version": cli.SCHEMA_VERSION, "out_dir": str(tmp_path / "o"),
           "study": {"scenario": "C", "n_dgp_draws": 1, "n_reps": 1, "n_train": 200, "n_test": 100,
                     "n_oracle": 10000, "methods": ["EifRel"]}}
    (tmp_path / "run.json").write_text(json.dumps(run))
    assert main(["simulate", "--config", str(tmp_path / "run.json")]) == 0
    assert len(list((tmp_path / "o").glob("*.svg"))) == 4
    bad = dict(run, extra=1)
    (tmp_path / "bad.json").write_text(json.dumps(bad))
    assert main(["simulate", "--config", str(tmp_path / "bad.json")]) == 2
    bad = dict(run, study=dict(run["study"], bogus=3))
    (tmp_path / "bad.json").write_text(json.dumps(bad))
    assert main(["simulate", "--config", str(tmp_path / "bad.json")]) == 2
    bad = dict(run, schema_version="0")
    (tmp_path / "bad.json").write_text(json.dumps(bad))
    assert main(["simulate", "--config", str(tmp_path / "bad.json")]) == 2


def test_report_figure_count_and_idempotence(sim_dir, tmp_path):
    res = json.loads((sim_dir / "results.json").read_text())
    for out in ("r1", "r2"):
        assert main(["report", "--in", str(sim_dir / "results.json"), "--out-dir", str(tmp_path / out)]) == 0
    svgs = sorted(p.name for p in (tmp_path / "r1").glob("*.svg"))
    assert len(svgs) == len(res["config"]["methods"]) * 4
    for name in svgs + ["metrics.csv"]:
        assert (tmp_path / "r1" / name).read_bytes() == (tmp_path / "r2" / name).read_bytes()
        assert (tmp_path / "r1" / name).read_bytes() == (sim_dir / name).read_bytes()


def test_report_rejects_tampered_schema(sim_dir, tmp_path):
    res = json.loads((sim_dir / "results.json").read_text())
    res["schema_version"] = "999"
    (tmp_path / "t.json").write_text(json.dumps(res))
    assert main(["report", "--in", str(tmp_path / "t.json"), "--out-dir", str(tmp_path / "o")]) == 2


def _json_numbers(obj, acc):
    if isinstance(obj, dict):
        for v in obj.values():
            _json_numbers(v, acc)
    elif isinstance(obj, list):
        for v in obj:
            _json_numbers(v, acc)
    elif isinstance(obj, (int, float)) and not isinstance(obj, bool) or obj is None:
        acc.add(json.dumps(obj))
    return acc


NUMBER = re.compile(r"-?\d+(?:\.\d+)?(?:e[-+]?\d+)?|null")


def _svg_label_numbers(svg: str):
    out = []
    for text in re.findall(r'<text[^>]*class="value"[^>]*>([^<]*)</text>', svg):
        out += NUMBER.findall(text.replace("true", ""))
    return out


def test_figure_numbers_appear_in_json(sim_dir, tmp_path):
    main(["demo", "fig2", "--seed", "2", "--out-dir", str(tmp_path / "demo")])
    for d in (sim_dir, tmp_path / "demo"):
        payload = json.loads((d / "results.json").read_text())
        numbers = _json_numbers(payload, set())
        for svg in d.glob("*.svg"):
            tokens = _svg_label_numbers(svg.read_text())
            assert tokens
            for token in tokens:
                assert token in numbers, (svg.name, token)
