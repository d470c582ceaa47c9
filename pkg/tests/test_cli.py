import io
import json
import subprocess
import sys
from fractions import Fraction

import pytest

from nilflow import cli, field
from nilflow.cli import execute, run
from nilflow.errors import ValidationError
from nilflow.params_io import (
    BUNDLED,
    bundle_examples,
    digest,
    load_params,
    params_from_document,
    params_to_document,
)
from nilflow.poincare import reduce
from golden_cases import CASES, check_against_golden, run_case


def call(argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(argv, stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


@pytest.mark.parametrize("name", sorted(CASES))
def test_golden(name, tmp_path):
    code, report, data = run_case(name, tmp_path)
    check_against_golden(name, code, report, data)


def test_bundled_examples_roundtrip():
    docs = bundle_examples()
    assert set(docs) == set(BUNDLED)
    for name, doc in docs.items():
        params = params_from_document(doc)
        again = params_from_document(params_to_document(params))
        assert again == params, name


def test_bundled_example_properties():
    mu_neg, _ = load_params("bundled:mu_negative")
    assert reduce(mu_neg).mu < 0
    assert reduce(load_params("mu_zero")[0]).mu == 0
    assert reduce(load_params("mu_positive")[0]).mu > 0
    big, _ = load_params("bundled:big_degree")
    assert big.d2 == 3 and big.a12 == 0
    assert field.check_nilpotent(field.build_field(big)).verdict
    trivial, _ = load_params("trivial_shift")
    assert trivial.a10 == trivial.a12 == trivial.a20 == 0
    two, _ = load_params("two_annuli")
    assert (two.P1.coeffs, two.A3) == ((-3, -1, 1), -6)


def test_params_file_path(tmp_path):
    doc = {"schema_version": "1", "P1": ["0", "1"], "P2": [0, 1], "A1": {"a12": "1/2"}, "A2": {}, "A3": "-3/4"}
    p = tmp_path / "p.json"
    p.write_text(json.dumps(doc))
    params, loaded = load_params(str(p))
    assert params.a12 == Fraction(1, 2) and params.A3 == Fraction(-3, 4)
    assert digest(loaded) == digest(json.loads(p.read_text()))
    code, out, _ = call(["nilcheck", "--params", str(p)])
    assert code == 0 and json.loads(out)["input_digest"] == digest(doc)


@pytest.mark.parametrize(
    "doc, path",
    [
        ({"P2": [0, 1], "A1": {}, "A2": {}}, "P1"),
        ({"P1": [0, 1.5], "P2": [0, 1], "A1": {}, "A2": {}}, r"P1\[1\]"),
        ({"P1": [0, 1], "P2": [0, 1], "A1": {"a12": "x"}, "A2": {}}, "A1.a12"),
        ({"P1": [0, 1], "P2": [0, 1], "A1": {"a13": 1}, "A2": {}}, "A1.a13"),
        ({"P1": [0, 1], "P2": [0, 0, 1], "A1": {"a12": 1}, "A2": {}}, "A1.a12"),
        ({"P1": [0, 1], "P2": [0, 1], "A1": {}, "A2": {}, "A3": "1/0"}, "A3"),
        ({"P1": [0, 1], "P2": [0, 1], "A1": {}, "A2": {}, "schema_version": "9"}, "schema_version"),
        ({"P1": [5], "P2": [0, 1], "A1": {}, "A2": {}}, "P1"),
    ],
)
def test_schema_errors_name_field(doc, path):
    with pytest.raises(ValidationError, match=path):
        params_from_document(doc)


def test_malformed_file_exit_1(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    code, out, err = call(["nilcheck", str(p)])
    assert code == 1 and out == "" and "malformed" in err


def test_usage_errors_exit_1():
    assert call(["nilcheck", "bundled:linear_p1", "--bogus"])[0] == 1
    assert call(["frobnicate"])[0] == 1
    assert call([])[0] == 1
    assert call(["cycles", "bundled:linear_p1"])[0] == 1
    assert call(["cycles", "bundled:linear_p1", "--length", "9"])[0] == 1
    assert call(["nilcheck"])[0] == 1
    assert call(["iterate", "bundled:linear_p1", "--start", "1,2"])[0] == 1
    assert call(["cycles", "bundled:big_degree", "--length", "4", "--exact"])[0] == 1


def test_validation_error_produces_no_report():
    code, out, err = call(["classify", "bundled:linear_p1", "--start", "0,0,1", "--frame", "unit"])
    assert code == 1 and out == "" and "mu < 0" in err


def test_exit_2_on_corrupted_closed_form(monkeypatch):
    real = field.conjugated_map_closed_form

    def corrupted(params):
        m = real(params)
        return field.PolyMap3((m[0] + 1, m[1], m[2]))

    monkeypatch.setattr(field, "conjugated_map_closed_form", corrupted)
    code, out, err = call(["normalize", "bundled:two_annuli"])
    assert code == 2 and out == "" and "consistency" in err


def test_exit_2_on_corrupted_jacobian_product(monkeypatch):
    monkeypatch.setattr(field, "matmul", lambda a, b: [[field.TriPoly.const(1)] * 3] * 3)
    assert call(["nilcheck", "bundled:quadratic_a12"])[0] == 2


def test_exit_2_on_corrupted_fixed_point(monkeypatch):
    from nilflow import discrete

    real = discrete.fixed_point

    def corrupted(params):
        fp = real(params)
        return discrete.FixedPoint(tuple(c + 1 for c in fp.original), fp.conjugated, fp.normal)

    monkeypatch.setattr(discrete, "fixed_point", corrupted)
    assert call(["fixed-point", "bundled:big_degree"])[0] == 2


def test_report_structure():
    code, out, _ = call(["cycles", "bundled:linear_p1", "--length", "3"])
    rep = json.loads(out)
    assert list(rep) == ["command", "input_digest", "results", "diagnostics", "verdicts"]
    (cyc,) = rep["results"]["cycles"]
    assert cyc["multiplier"] == "4" and cyc["classification"] == "saddle"
    assert "runtime_seconds" not in rep["diagnostics"]


def test_timings_opt_in():
    code, out, _ = call(["nilcheck", "bundled:linear_p1", "--timings"])
    assert json.loads(out)["diagnostics"]["runtime_seconds"] >= 0


def test_global_flags_before_subcommand():
    code, out, _ = call(["--seed", "3", "cycles", "bundled:linear_p1", "--length", "2", "--starts", "5"])
    assert code == 0 and json.loads(out)["diagnostics"]["seed"] == 3


def test_float_emission_rounding():
    assert cli.jsonable(0.1 + 0.2) == 0.3
    assert cli.jsonable(Fraction(-3, 4)) == "-3/4"
    assert cli.jsonable(float("inf")) == "inf"
    assert cli._cell(1 / 3) == "0.333333333333333"


def test_poincare_find_cstar_headline():
    code, out, _ = call(["poincare", "--find-cstar"])
    rep = json.loads(out)
    assert 1.6305 < rep["results"]["cstar"]["z_star"] < 1.6310
    assert all(v["passed"] for v in rep["verdicts"])


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "nilflow", "nilcheck", "bundled:quadratic_a12"], capture_output=True, text=True
    )
    assert proc.returncode == 0
    verdicts = {v["name"]: v["passed"] for v in json.loads(proc.stdout)["verdicts"]}
    assert verdicts["nilpotent"]


def test_execute_returns_report():
    code, report, err = execute(["fixed-point", "bundled:linear_p1"])
    assert code == 0 and err is None
    assert report["results"]["normal"] == ["0", "0", "0"]
