import csv
import json

import numpy as np
import pytest

from parcelingam import cli
from parcelingam.simgen import SemSpec, confounded_4var, data_to_csv, generate


@pytest.fixture
def fig2_csv(tmp_path):
    spec = tmp_path / "s.toml"
    data = tmp_path / "d.csv"
    assert cli.main(["export-spec", "--network", "fig2_5var", "--out", str(spec)]) == 0
    assert cli.main(["simulate", "--spec", str(spec), "--n", "300", "--out", str(data), "--seed", "4"]) == 0
    return data


def test_simulate_writes_truth(fig2_csv):
    truth = json.loads(cli.truth_path(str(fig2_csv)).read_text())
    assert truth["variables"] == [f"x{i}" for i in range(5)]
    assert truth["spec"] == "fig2_5var"
    rows = list(csv.reader(fig2_csv.open()))
    assert len(rows) == 301 and len(rows[0]) == 5


def test_export_spec_round_trip(tmp_path):
    out = tmp_path / "s.toml"
    cli.main(["export-spec", "--network", "confounded_4var", "--out", str(out)])
    assert SemSpec.from_toml(out.read_text()) == confounded_4var()


def test_discover_json_byte_identical(fig2_csv, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for out in (a, b):
        assert cli.main(["discover", "--input", str(fig2_csv), "--out", str(out)]) == 0
    assert a.read_bytes() == b.read_bytes()
    doc = json.loads(a.read_text())
    assert list(doc)[:3] == ["schema", "config", "variables"]
    assert doc["schema"] == 1
    assert doc["config"]["alpha"] == 0.05
    E = np.array(doc["ordering"]["entries"])
    np.testing.assert_array_equal(E, -E.T)


def test_discover_csv_matches_json(fig2_csv, tmp_path, capsys):
    cli.main(["discover", "--input", str(fig2_csv), "--format", "csv"])
    rows = list(csv.reader(capsys.readouterr().out.splitlines()))
    assert rows[0] == ["variable"] + [f"x{i}" for i in range(5)]
    out = tmp_path / "a.json"
    cli.main(["discover", "--input", str(fig2_csv), "--out", str(out)])
    E = json.loads(out.read_text())["ordering"]["entries"]
    assert [[int(v) for v in r[1:]] for r in rows[1:]] == E


def test_transposed_input_same_result(fig2_csv, tmp_path):
    rows = list(csv.reader(fig2_csv.open()))
    flipped = tmp_path / "t.csv"
    with flipped.open("w", newline="") as fh:
        csv.writer(fh).writerows(zip(*rows))
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    cli.main(["discover", "--input", str(fig2_csv), "--out", str(a)])
    cli.main(["discover", "--input", str(flipped), "--transpose", "--out", str(b)])
    ja, jb = json.loads(a.read_text()), json.loads(b.read_text())
    assert ja["ordering"] == jb["ordering"]
    assert ja["strengths"] == jb["strengths"]


@pytest.mark.parametrize(
    "content, message",
    [
        ("", "no data rows"),
        ("a,b\n", "no data rows"),
        ("a,b\n1,2\n3,x\n4,5\n", "line 3, column 2"),
        ("a,b\n1,2\n3\n4,5\n", "line 3: expected 2 cells"),
        ("a,b\n1,2\n3,4\n", "at least 3 samples"),
        ("a\n1\n2\n3\n", "at least 2 variables"),
        ("a,a\n1,2\n3,4\n5,6\n", "duplicate"),
        ("a,b\n1,inf\n3,4\n5,6\n", "non-finite"),
    ],
)
def test_malformed_input_exit_2(tmp_path, capsys, content, message):
    path = tmp_path / "bad.csv"
    path.write_text(content)
    assert cli.main(["discover", "--input", str(path)]) == 2
    assert message in capsys.readouterr().err


def test_missing_file_exit_2(tmp_path, capsys):
    assert cli.main(["discover", "--input", str(tmp_path / "nope.csv")]) == 2
    assert "error:" in capsys.readouterr().err


def test_bad_alpha_exit_2(fig2_csv):
    assert cli.main(["discover", "--input", str(fig2_csv), "--alpha", "1.5"]) == 2


def test_subset_budget_exit_3(tmp_path, capsys):
    X, _ = generate(confounded_4var(seed=3), 1000, permute=False)
    path = tmp_path / "c.csv"
    path.write_text(data_to_csv(X, ["a", "b", "c", "d"]))
    assert cli.main(["discover", "--input", str(path), "--subset-cap", "3"]) == 3
    err = capsys.readouterr().err
    assert "--subset-cap" in err


def test_invalid_spec_exit_2(tmp_path, capsys):
    spec = confounded_4var()
    spec.Lambda = np.array([[1.0], [0.0], [0.0], [0.0]])
    path = tmp_path / "s.toml"
    path.write_text(spec.to_toml())
    code = cli.main(["simulate", "--spec", str(path), "--n", "10", "--out", str(tmp_path / "d.csv")])
    assert code == 2
    assert "Lambda column 0" in capsys.readouterr().err


def test_unknown_network_exit_2(capsys):
    assert cli.main(["export-spec", "--network", "nope"]) == 2
    assert "fig2_5var" in capsys.readouterr().err


def test_threads_env_overrides(monkeypatch):
    monkeypatch.setenv(cli.THREADS_ENV, "3")
    assert cli.resolve_threads("1") == 3
    monkeypatch.delenv(cli.THREADS_ENV)
    assert cli.resolve_threads("2") == 2
    assert cli.resolve_threads(None) == 1
    with pytest.raises(cli.InputError):
        cli.resolve_threads("many")


def test_rounded():
    assert cli.rounded({"a": 0.1234567890123456, "b": [np.float64(-0.0), float("nan")]}) == {
        "a": 0.123456789012,
        "b": [0.0, None],
    }


def test_benchmark_table_small(tmp_path):
    code = cli.main([
        "benchmark", "--suite", "table1_4_desk", "--trials", "2", "--dims", "5",
        "--sizes", "200", "--out", str(tmp_path),
    ])
    assert code == 0
    rows = list(csv.DictReader((tmp_path / "table1_4_desk.csv").open()))
    assert [r["method"] for r in rows] == ["ParceLiNGAM", "DirectLiNGAM-equivalent"]
    assert all(r["n"] == "200" and r["trials"] == "2" for r in rows)
    assert float(rows[0]["max_recall"]) == pytest.approx(0.8)


def test_benchmark_bad_dim(tmp_path):
    code = cli.main(["benchmark", "--suite", "table1_4_desk", "--dims", "7", "--out", str(tmp_path)])
    assert code == 2


def test_trial_seeds_distinct():
    seeds = {cli.trial_seed(0, 5, n, t) for n in (500, 1000) for t in range(20)}
    assert len(seeds) == 40
