import json
from pathlib import Path

import numpy as np
import pytest

from fracperron import _json
from fracperron.asymptotics import EstimateReport
from fracperron.bounded import BoundedSolutionSet, NotHyperbolic
from fracperron.cli import (
    EXIT_NUMERICAL,
    EXIT_OK,
    EXIT_PARSE,
    EXIT_PRECONDITION,
    EXIT_VERIFY,
    main,
    parse_complex,
)
from fracperron.spectral import SpectralReport
from fracperron.system import SystemSpec, load_spec, loads_spec

SPECS = Path(__file__).resolve().parent.parent / "specs"


def _write(tmp_path, doc, name="spec.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc) if not isinstance(doc, str) else doc)
    return str(p)


def _run(tmp_path, *argv):
    out = tmp_path / "out.json"
    code = main([*argv, "--out", str(out)])
    return code, (out.read_text() if out.exists() else None)


# classify


def test_classify_saddle(tmp_path):
    code, text = _run(tmp_path, "classify", "--spec", str(SPECS / "saddle.json"))
    assert code == EXIT_OK
    d = json.loads(text)
    assert d["hyperbolic"] is True
    assert SpectralReport.from_dict(d).to_dict() == d


def test_classify_zero(tmp_path):
    code, text = _run(tmp_path, "classify", "--spec", str(SPECS / "zero.json"))
    d = json.loads(text)
    assert code == EXIT_OK and d["hyperbolic"] is False
    assert [e["class"] for e in d["eigenvalues"]] == ["Zero"]


def test_classify_rotation(tmp_path):
    code, text = _run(tmp_path, "classify", "--spec", str(SPECS / "rotation.json"))
    d = json.loads(text)
    assert code == EXIT_OK and d["hyperbolic"] is True
    assert all(e["class"] == "Stable" for e in d["eigenvalues"])


def test_classify_to_stdout(capsys):
    assert main(["classify", "--spec", str(SPECS / "saddle.json")]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["hyperbolic"] is True


# solve


def test_solve_steady_state(tmp_path):
    code, text = _run(tmp_path, "solve", "--spec", str(SPECS / "scalar_unstable.json"))
    assert code == EXIT_OK
    rows = [line.split(",") for line in text.splitlines()[2:]]
    np.testing.assert_allclose([float(r[1]) for r in rows], -2.0, atol=1e-12)


def test_solve_trivial_growth(tmp_path):
    spec = _write(tmp_path, {
        "alpha": 0.5, "matrix": [[0]], "forcing": [{"family": "Constant", "params": {"value": 0.886226925452758}}],
        "initial": [0], "grid": {"t_end": 4, "n_steps": 40},
    })
    code, text = _run(tmp_path, "solve", "--spec", spec)
    assert code == EXIT_OK
    assert float(text.splitlines()[-1].split(",")[1]) == pytest.approx(2.0, abs=1e-12)


def test_solve_needs_initial(tmp_path):
    spec = _write(tmp_path, {"alpha": 0.5, "matrix": [[-1]], "forcing": [{"family": "Constant", "params": {"value": 1}}], "grid": {"t_end": 1, "n_steps": 10}})
    assert _run(tmp_path, "solve", "--spec", spec)[0] == EXIT_PRECONDITION


def test_solve_unreachable_tolerance(tmp_path):
    spec = _write(tmp_path, {
        "alpha": 0.5, "matrix": [[1]], "forcing": [{"family": "Constant", "params": {"value": 1}}],
        "initial": [0], "grid": {"t_end": 10, "n_steps": 100},
    })
    assert _run(tmp_path, "solve", "--spec", spec, "--tol", "1e-15")[0] == EXIT_NUMERICAL


# bounded


def test_bounded_saddle(tmp_path):
    code, text = _run(tmp_path, "bounded", "--spec", str(SPECS / "saddle.json"), "--certify", "--members", "2")
    assert code == EXIT_OK
    b = BoundedSolutionSet.from_dict(json.loads(text))
    assert b.stable_dim == 1
    assert b.certification["boundedness"]["pass"] is True
    assert (tmp_path / "out_member0.csv").exists() and (tmp_path / "out_member1.csv").exists()


def test_bounded_exp_decay_value(tmp_path):
    code, text = _run(tmp_path, "bounded", "--spec", str(SPECS / "exp_decay.json"))
    b = BoundedSolutionSet.from_dict(json.loads(text))
    assert code == EXIT_OK
    assert b.unstable_init[0] == pytest.approx(-0.4, abs=1e-12)


def test_bounded_zero_verdict(tmp_path):
    code, text = _run(tmp_path, "bounded", "--spec", str(SPECS / "zero.json"), "--witness")
    v = NotHyperbolic.from_dict(json.loads(text))
    assert code == EXIT_OK and v.witness is not None


def test_bounded_members_need_output_path():
    assert main(["bounded", "--spec", str(SPECS / "saddle.json"), "--members", "1"]) == EXIT_PRECONDITION


# verify


def test_verify_lemma3_pass(tmp_path):
    csv = tmp_path / "m.csv"
    code, text = _run(tmp_path, "verify", "--lemma", "lemma3", "--part", "ii", "--alpha", "0.5", "--lambda", "-1", "--csv", str(csv))
    assert code == EXIT_OK
    rep = EstimateReport.from_dict(json.loads(text))
    assert rep.passed and csv.read_text().startswith("t,measured")


def test_verify_failure_exit_code(tmp_path):
    # the running maximum has not settled by t = 100
    code, text = _run(tmp_path, "verify", "--lemma", "L4ii", "--alpha", "0.5", "--lambda", "-1", "--horizon", "100")
    assert code == EXIT_VERIFY and json.loads(text)["pass"] is False


def test_verify_from_spec(tmp_path):
    code, text = _run(tmp_path, "verify", "--spec", str(SPECS / "exp_decay.json"))
    d = json.loads(text)
    assert code == EXIT_OK and d["lemma_id"] == "LimitLemma"
    assert _json.decode_complex(d["details"]["rhs"]) == pytest.approx(0.4)


def test_verify_wrong_sector(tmp_path):
    assert _run(tmp_path, "verify", "--lemma", "lemma3", "--part", "i", "--alpha", "0.5", "--lambda", "1j")[0] == EXIT_PRECONDITION


def test_verify_missing_lambda(tmp_path):
    assert _run(tmp_path, "verify", "--lemma", "lemma3", "--alpha", "0.5")[0] == EXIT_PARSE


# witness


def test_witness_trivial(tmp_path):
    code, text = _run(tmp_path, "witness", "trivial", "--alpha", "0.5")
    assert code == EXIT_OK and json.loads(text)["pass"] is True


def test_witness_resonant_from_spec(tmp_path):
    code, text = _run(tmp_path, "witness", "--spec", str(SPECS / "resonant.json"))
    d = json.loads(text)
    assert code == EXIT_OK and d["kind"] == "resonant"
    assert abs(d["metrics"]["ratio_at_end"] - 2.0) <= 0.4


# parsing and environment


@pytest.mark.parametrize(
    "doc,field",
    [
        ('{"alpha": 0.5, "matrix": [[1]], ', None),
        ({"alpha": 0.5, "matrix": [[1, 2]], "forcing": [{"family": "Constant", "params": {"value": 1}}]}, "matrix"),
        ({"alpha": 0.5, "matrix": [[1]], "forcing": []}, "forcing"),
        ({"alpha": 0.5, "matrix": [[1]], "forcing": [{"family": "Constant", "params": {"value": 1}}], "colour": 1}, "colour"),
        ({"matrix": [[1]], "forcing": [{"family": "Constant", "params": {"value": 1}}]}, "alpha"),
    ],
)
def test_parse_errors(tmp_path, capsys, doc, field):
    spec = _write(tmp_path, doc)
    assert main(["classify", "--spec", spec]) == EXIT_PARSE
    err = capsys.readouterr().err
    assert "ParseError" in err
    if field:
        assert field in err
    else:
        assert "line" in err


def test_alpha_out_of_range_for_bounded(tmp_path):
    spec = _write(tmp_path, {"alpha": 1.5, "matrix": [[1]], "forcing": [{"family": "Constant", "params": {"value": 1}}]})
    assert main(["bounded", "--spec", spec]) in (EXIT_PARSE, EXIT_PRECONDITION)


def test_missing_spec_file(tmp_path):
    assert main(["classify", "--spec", str(tmp_path / "nope.json")]) in (EXIT_PARSE, EXIT_PRECONDITION)


def test_thread_cap_validated(monkeypatch):
    monkeypatch.setenv("FRAC_PERRON_THREADS", "many")
    assert main(["classify", "--spec", str(SPECS / "saddle.json")]) == EXIT_PARSE
    monkeypatch.setenv("FRAC_PERRON_THREADS", "2")
    assert main(["classify", "--spec", str(SPECS / "saddle.json"), "--out", "/dev/null"]) == EXIT_OK


def test_parse_complex_forms():
    assert parse_complex("1") == 1
    assert parse_complex("-0.5+2j") == complex(-0.5, 2)
    assert parse_complex("1-1i") == complex(1, -1)
    assert parse_complex("0.3, -4") == complex(0.3, -4)


# round trip and determinism


@pytest.mark.parametrize("path", sorted(SPECS.glob("*.json")), ids=lambda p: p.stem)
def test_spec_round_trip(path):
    spec = load_spec(path)
    assert loads_spec(_json.dumps(spec.to_dict())) == spec
    assert isinstance(spec, SystemSpec)


@pytest.mark.parametrize("path", sorted(SPECS.glob("*.json")), ids=lambda p: p.stem)
@pytest.mark.parametrize("command", ["classify", "bounded"])
def test_deterministic_output(tmp_path, path, command):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main([command, "--spec", str(path), "--out", str(a)]) == EXIT_OK
    assert main([command, "--spec", str(path), "--out", str(b)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
