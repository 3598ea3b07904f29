import json
import math

import numpy as np
import pytest

from goldilocks_qca.cli import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, main
from goldilocks_qca.core import expectation_string, tilted_ferromagnet
from goldilocks_qca.output import NonFiniteOutputError, emit, format_value, read_csv


def data_section(path):
    return [line for line in open(path) if not line.startswith("# ")]


def test_format_value_round_trips():
    for v in (0.1, 1 / 3, -2.5e-300, math.pi):
        assert float(format_value(v)) == v
    assert format_value(3) == "3" and format_value(True) == "true"


def test_emit_one_record_round_trip(tmp_path):
    path = tmp_path / "one.csv"
    emit([{"t": 0, "value": 1 / 3}], path, ("t", "value"), metadata={"note": "x"})
    meta, rows = read_csv(path)
    assert meta["note"] == "x"
    assert float(rows[0]["value"]) == 1 / 3 and rows[0]["t"] == "0"


def test_emit_empty_is_header_only(tmp_path):
    path = tmp_path / "empty.csv"
    emit([], path, ("t", "k", "value"))
    assert open(path).read() == "t,k,value\n"


def test_emit_json_mirrors_records(tmp_path):
    path = tmp_path / "out.json"
    emit([{"t": 1, "value": 0.25}], path, ("t", "value"), fmt="json")
    doc = json.load(open(path))
    assert doc["columns"] == ["t", "value"] and doc["records"] == [{"t": 1, "value": 0.25}]


def test_emit_rejects_non_finite(tmp_path):
    path = tmp_path / "bad.csv"
    with pytest.raises(NonFiniteOutputError):
        emit([{"value": float("nan")}], path, ("value",))
    assert not path.exists()


def test_evolve_exact_zero_steps(tmp_path):
    out = tmp_path / "e.csv"
    code = main(["evolve-exact", "-p", "L=6", "-p", "steps=0", "-p", "alpha=pi/4",
                 "-p", "theta=0.56", "-p", "phi=3.7", "-p", "gamma=z", "--out", str(out)])
    assert code == EXIT_OK
    meta, rows = read_csv(out)
    psi = tilted_ferromagnet(6, 0.56, 3.7)
    for row in rows:
        assert row["t"] == "0"
        assert float(row["value"]) == pytest.approx(expectation_string(psi, 6, "z", int(row["k"])), abs=1e-14)
    assert meta["config"]["task"] == "evolve-exact"
    assert meta["version"]


def test_determinism_of_data_section(tmp_path):
    paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for p in paths:
        assert main(["evolve-exact", "-p", "L=6", "-p", "steps=4", "-p", "random=true",
                     "--seed", "3", "--out", str(p)]) == EXIT_OK
    assert data_section(paths[0]) == data_section(paths[1])


def test_seed_sweep_writes_consistent_median(tmp_path):
    out = tmp_path / "sweep.csv"
    code = main(["evolve-exact", "-p", "L=6", "-p", "steps=3", "-p", "seeds=[0,1,2,3,4]",
                 "-p", "gamma=z", "-p", "ks=[3]", "-p", "theta=0.56", "-p", "phi=3.7", "--out", str(out)])
    assert code == EXIT_OK
    _, rows = read_csv(out)
    _, med = read_csv(tmp_path / "sweep_median.csv")
    assert len(rows) == 5 * 4 and len(med) == 4
    for m in med:
        vals = [float(r["value"]) for r in rows if r["t"] == m["t"]]
        assert float(m["value"]) == np.median(vals)


def test_evolve_gaussian_csv(tmp_path):
    out = tmp_path / "g.csv"
    assert main(["evolve-gaussian", "-p", "L=64", "-p", "steps=5", "-p", "alpha=pi/4", "--out", str(out)]) == EXIT_OK
    _, rows = read_csv(out)
    assert len(rows) == 6 * 4
    assert float(rows[0]["value"]) == 1.0


def test_charges_search_reports_dimension(tmp_path, capsys):
    out = tmp_path / "s.json"
    code = main(["charges-search", "-p", "a=0.3+0.7j", "-p", "b=-1.0-0.5j", "-p", "support_max=3",
                 "-p", "L=8", "--format", "json", "--out", str(out)])
    assert code == EXIT_OK
    assert "dimension 1" in capsys.readouterr().err
    doc = json.load(open(out))
    assert doc["metadata"]["dimension"] == 1


def test_printed_charges_fail_numerically(tmp_path):
    code = main(["charges-verify", "-p", "alpha=0.3", "-p", "printed=true", "--out", str(tmp_path / "c.csv")])
    assert code == EXIT_NUMERICAL


def test_library_charges_verify(tmp_path):
    code = main(["charges-verify", "-p", "alpha=0.3", "--out", str(tmp_path / "c.csv")])
    assert code == EXIT_OK


def test_sixvertex_check(tmp_path):
    out = tmp_path / "v.csv"
    assert main(["sixvertex-check", "-p", "alpha=0.4", "-p", "beta=0.2", "--out", str(out)]) == EXIT_OK


def test_config_file_and_line_numbers(tmp_path, capsys):
    good = tmp_path / "good.yaml"
    good.write_text("task: gge-predict\nparameters:\n  mode: single-charge\n  L: inf\n  gamma: z\n  theta: 0.56\n")
    out = tmp_path / "p.csv"
    assert main(["run", str(good), "--out", str(out)]) == EXIT_OK
    _, rows = read_csv(out)
    assert float(rows[1]["value"]) == pytest.approx(math.cos(0.56) ** 2)
    assert float(rows[2]["value"]) == 0.0

    bad = tmp_path / "bad.yaml"
    bad.write_text("task: gge-predict\nparameters:\n  mode: library\n  bogus: 1\n")
    assert main(["run", str(bad)]) == EXIT_CONFIG
    assert "bad.yaml:4" in capsys.readouterr().err

    broken = tmp_path / "broken.yaml"
    broken.write_text("task: spectra\nparameters:\n  L: [14\n")
    assert main(["run", str(broken)]) == EXIT_CONFIG


@pytest.mark.parametrize(
    "argv",
    [
        ["evolve-exact", "-p", "steps=2"],
        ["evolve-exact", "-p", "L=7", "-p", "steps=2", "-p", "alpha=0.1"],
        ["evolve-exact", "-p", "L=24", "-p", "steps=2", "-p", "alpha=0.1"],
        ["spectra", "-p", "q1=3"],
        ["charges-search", "-p", "alpha=0.3", "-p", "L=eight"],
        ["sixvertex-check", "-p", "eps1=2"],
        ["gge-fit", "-p", "nonsense"],
    ],
)
def test_config_errors_exit_two(argv, capsys):
    assert main(argv) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_help_params(capsys):
    assert main(["spectra", "--help-params"]) == EXIT_OK
    assert "q1" in capsys.readouterr().out
