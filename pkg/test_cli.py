"""
测试命令行：各子命令的输出文件、清单文件和退出码
"""
import csv
import json
import math

import pytest
from scipy import special

from fde.cli import main
from fde.factorization import TrigCoefficientSpec, find_zeros

UNIT = {"form": "affine-power", "coeffs": {"c2": 1.0}}
SINC = {"delta0": 1.0, "families": [{"kind": "h", "count": 1, "generator": UNIT},
                                    {"kind": "gamma", "count": 1, "generator": UNIT}]}
TRANSMISSION = {"omega0": {"q": 1, "p": 3}, "a1": 1.0, "a2": 0.5, "a3": 1.0, "a4": 0.5,
                "kappa": 2.0, "s0": -2.0, "nu": 0.5, "s": 0.3}


def write_json(path, data):
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


def read_csv(path):
    with path.open(encoding="utf-8") as fh:
        return list(csv.reader(fh))


def test_zeros_writes_table_and_manifest(tmp_path):
    out = tmp_path / "zeros.csv"
    assert main(["zeros", "-o", str(out)]) == 0
    rows = read_csv(out)
    assert rows[0] == ["index", "location", "multiplicity", "residual", "bracket_lo", "bracket_hi"]
    expected = find_zeros(TrigCoefficientSpec(form="s_plus", theta1=0.0, theta2=0.0, p=4, q=1, q2=2.0))
    assert len(rows) - 1 == len(expected.entries)
    manifest = json.loads((tmp_path / "zeros.csv.manifest.json").read_text(encoding="utf-8"))
    assert manifest["outputs"] == [str(out)]
    assert "truncation" in manifest["tolerances"]


def test_zeros_output_is_reproducible(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    main(["zeros", "--theta1", "0.5", "-o", str(a)])
    main(["zeros", "--theta1", "0.5", "-o", str(b)])
    assert a.read_text(encoding="utf-8") == b.read_text(encoding="utf-8")


def test_zeros_reports_triple_multiplicity(tmp_path):
    out = tmp_path / "zeros.csv"
    args = ["zeros", "--theta1", str(math.pi / 4), "--theta2", str(math.pi / 2), "--q2", "0.5", "-o", str(out)]
    assert main(args) == 0
    rows = read_csv(out)[1:]
    assert [row[2] for row in rows] == ["1", "3", "1", "3"]
    assert float(rows[1][1]) == pytest.approx(3.92699, abs=1e-5)


def test_validate_equation_passes(tmp_path):
    spec = write_json(tmp_path / "spec.json", {
        "omega": SINC, "params": {"a1": 1.0, "a2": 0.0},
        "kernel": {"type": "constant"},
        "forcing": {"type": "gaussian", "c": 0.5},
    })
    out = tmp_path / "report.json"
    assert main(["validate", str(spec), "-o", str(out)]) == 0
    report = json.loads(out.read_text(encoding="utf-8"))
    assert report["kind"] == "equation"
    assert report["passed"] is True
    assert len(report["reports"]) == 3


def test_validate_harmonic_family_fails(tmp_path):
    harmonic = {"families": [{"kind": "h", "count": 1, "generator": UNIT}]}
    spec = write_json(tmp_path / "spec.json", {"omega": harmonic})
    out = tmp_path / "report.json"
    assert main(["validate", str(spec), "-o", str(out)]) == 2
    assert json.loads(out.read_text(encoding="utf-8"))["passed"] is False


@pytest.mark.parametrize("s, code", [(0.3, 0), (0.0, 2)])
def test_validate_transmission_weight(tmp_path, s, code):
    spec = write_json(tmp_path / "problem.json", dict(TRANSMISSION, s=s))
    out = tmp_path / "report.json"
    assert main(["validate", str(spec), "-o", str(out)]) == code
    assert json.loads(out.read_text(encoding="utf-8"))["kind"] == "transmission"


def test_bad_json_is_a_parse_error(tmp_path, capsys):
    spec = tmp_path / "spec.json"
    spec.write_text("{not json", encoding="utf-8")
    assert main(["validate", str(spec), "-o", str(tmp_path / "r.json")]) == 2
    assert "ParseError" in capsys.readouterr().err


def test_missing_input_file(tmp_path):
    out = tmp_path / "r.json"
    assert main(["validate", str(tmp_path / "nope.json"), "-o", str(out)]) == 2
    assert not (tmp_path / "r.json.manifest.json").exists()


def test_solve_gamma_and_flags_pole_line(tmp_path):
    spec = write_json(tmp_path / "spec.json", {
        "omega": {"delta0": 1.0, "deltas": {"d2": [0.0]}},
        "params": {"a1": 1.0, "a2": 0.0},
        "forcing": {"type": "zero"},
    })
    points = write_json(tmp_path / "points.json", {"sigma": 1.0, "points": [[0.5, 0.3], [-1.0, 0.5]]})
    out = tmp_path / "solution.csv"
    assert main(["solve", str(spec), str(points), "-o", str(out)]) == 0
    header, first, second = read_csv(out)
    assert header == ["re_z", "im_z", "re_Y", "im_Y", "residual", "tail_est", "flag"]
    assert first[-1] == "ok"
    value = complex(float(first[2]), float(first[3]))
    assert value == pytest.approx(special.gamma(0.5 + 0.3j), rel=1e-9)
    assert second[-1] == "region_violation"
    assert second[2] == "nan"


def test_solve_fails_when_every_point_is_flagged(tmp_path):
    spec = write_json(tmp_path / "spec.json", {
        "omega": {"delta0": 1.0, "deltas": {"d2": [0.0]}},
        "params": {"a1": 1.0, "a2": 0.0},
        "forcing": {"type": "zero"},
    })
    points = write_json(tmp_path / "points.json", {"points": [[-1.0, 0.5], [-2.0, 0.3]]})
    out = tmp_path / "solution.csv"
    assert main(["solve", str(spec), str(points), "-o", str(out)]) == 2
    assert [row[-1] for row in read_csv(out)[1:]] == ["region_violation"] * 2
    assert (tmp_path / "solution.csv.manifest.json").exists()


def test_factorize_grid(tmp_path):
    spec = write_json(tmp_path / "coef.json", {"form": "sin_shift", "q0": 1.0, "theta": 0.3})
    out = tmp_path / "factorize.csv"
    assert main(["factorize", str(spec), "--radius", "1", "--grid", "3", "--truncation", "5000",
                 "-o", str(out)]) == 0
    rows = read_csv(out)[1:]
    assert len(rows) == 9
    assert all(float(r[-1]) < 1e-2 for r in rows)


def test_bounds_writes_verdict(tmp_path):
    out = tmp_path / "bounds.csv"
    assert main(["bounds", "--im", "50", "100", "-o", str(out)]) == 0
    assert len(read_csv(out)) == 1 + 2 * 4
    verdict = json.loads((tmp_path / "bounds.verdict.json").read_text(encoding="utf-8"))
    assert len(verdict["reports"]) == 2
    manifest = json.loads((tmp_path / "bounds.csv.manifest.json").read_text(encoding="utf-8"))
    assert str(tmp_path / "bounds.verdict.json") in manifest["outputs"]


def test_transmission_rejects_weight(tmp_path, capsys):
    problem = write_json(tmp_path / "problem.json", dict(TRANSMISSION, s=0.0))
    grid = write_json(tmp_path / "grid.json", {"points": [[0.0, 0.5, 1.0]], "truncation": 500})
    out = tmp_path / "field.csv"
    assert main(["transmission", str(problem), str(grid), "-o", str(out)]) == 2
    assert "InvalidWeight" in capsys.readouterr().err
    report = json.loads((tmp_path / "field.report.json").read_text(encoding="utf-8"))
    assert report["admissibility"]["passed"] is False
    assert not out.exists()


def test_transmission_degenerate_kappa(tmp_path):
    problem = write_json(tmp_path / "problem.json", dict(TRANSMISSION, kappa=1.0))
    grid = write_json(tmp_path / "grid.json", {"points": [[0.0, 0.5, 1.0]], "truncation": 500})
    assert main(["transmission", str(problem), str(grid), "-o", str(tmp_path / "field.csv")]) == 2


def test_transmission_bad_problem_is_a_parse_error(tmp_path, capsys):
    problem = write_json(tmp_path / "problem.json", dict(TRANSMISSION, nu=1.5))
    grid = write_json(tmp_path / "grid.json", {"points": []})
    assert main(["transmission", str(problem), str(grid), "-o", str(tmp_path / "field.csv")]) == 2
    assert "ParseError" in capsys.readouterr().err
