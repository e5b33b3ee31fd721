import json
import os
import subprocess
import sys

import numpy as np
import pytest

from pathmeasures import cli

UNIFORM = {
    "spec_version": 1, "states": ["a", "b"], "N": 1,
    "markov": {"initial": [0.5, 0.5], "kernels": [[[0.5, 0.5], [0.5, 0.5]]]},
}


def write(tmp_path, data, name="spec.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data), encoding="utf-8")
    return str(p)


def run_cli(args, capsys):
    code = cli.main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_parse_minimal(tmp_path):
    spec, raw = cli.parse_spec(write(tmp_path, UNIFORM))
    assert spec.N == 1 and spec.states.labels == ("a", "b")
    R = spec.reference()
    assert R.weights.weights.tolist() == [0.25] * 4


def test_schema_errors_name_fields(tmp_path):
    bad = dict(UNIFORM, markov={"initial": [0.5, 0.5], "kernels": [[[0.5, 0.4], [0.5, 0.5]]]},
               mu0={"c": 1.0})
    with pytest.raises(cli.SchemaError) as e:
        cli.parse_spec(write(tmp_path, bad))
    fields = dict(e.value.errors)
    assert "row 'a' sums to 0.9" in fields["markov.kernels[0][0]"]
    assert "'c'" in fields["mu0.c"]


def test_schema_requires_exactly_one_source(tmp_path):
    both = dict(UNIFORM, paths=[0.25] * 4)
    with pytest.raises(cli.SchemaError, match="exactly one"):
        cli.parse_spec(write(tmp_path, both))
    none = {k: v for k, v in UNIFORM.items() if k != "markov"}
    with pytest.raises(cli.SchemaError, match="exactly one"):
        cli.parse_spec(write(tmp_path, none))


def test_schema_misc(tmp_path):
    cases = [
        (dict(UNIFORM, spec_version=2), "spec_version"),
        (dict(UNIFORM, observable="Y_1"), "observable"),
        (dict(UNIFORM, observable="X_5"), "observable"),
        (dict(UNIFORM, paths_typo=1), "paths_typo"),
        (dict(UNIFORM, alpha={"time": 3, "values": {"a": 1}}), "alpha.time"),
        (dict(UNIFORM, options={"tol": -1.0}), "options.tol"),
    ]
    for data, field in cases:
        with pytest.raises(cli.SchemaError) as e:
            cli.parse_spec(write(tmp_path, data))
        assert any(p.startswith(field) for p, _ in e.value.errors), (field, e.value.errors)


def test_io_and_json_errors(tmp_path, capsys):
    code, _, err = run_cli(["bridge", str(tmp_path / "missing.json")], capsys)
    assert code == 2 and "cannot read" in err
    p = tmp_path / "broken.json"
    p.write_text('{"spec_version": 1,\n', encoding="utf-8")
    code, _, err = run_cli(["bridge", str(p)], capsys)
    assert code == 2 and "line 2" in err
    p.write_bytes(b"\xff\xfe")
    with pytest.raises(cli.IoError):
        cli.parse_spec(str(p))


def test_bridge_on_bundled_fixture(capsys):
    code, out, _ = run_cli(["bridge", "example:uniform2x2"], capsys)
    assert code == 0
    rep = json.loads(out)
    assert rep["status"] == "ok"
    assert np.allclose(rep["results"]["coupling"], [[0.18, 0.12], [0.42, 0.28]], atol=1e-9)
    assert max(rep["diagnostics"]["marginal_errors"]) <= 1e-10


def test_bridge_requires_marginals(tmp_path, capsys):
    code, out, _ = run_cli(["bridge", write(tmp_path, UNIFORM)], capsys)
    assert code == 2 and json.loads(out)["status"] == "schema_error"


def test_entropy_identity(tmp_path, capsys):
    code, out, _ = run_cli(["entropy", write(tmp_path, dict(UNIFORM, P=[0.25] * 4))], capsys)
    rep = json.loads(out)
    assert code == 0 and rep["results"]["relative_entropy"] == 0.0
    assert rep["results"]["decomposition"]["total"] == 0.0


def test_entropy_not_probability_is_domain_error(tmp_path, capsys):
    code, out, err = run_cli(["entropy", write(tmp_path, dict(UNIFORM, P=[0.5] * 4))], capsys)
    rep = json.loads(out)
    assert code == 1 and rep["status"] == "domain_error" and rep["error"]["type"] == "NotProbability"


def test_infeasible_bridge_exit_1(tmp_path, capsys):
    data = dict(UNIFORM, markov={"initial": [0.5, 0.5], "kernels": [[[1.0, 0.0], [0.0, 1.0]]]},
                mu0=[0.3, 0.7], mu1=[0.6, 0.4])
    code, out, _ = run_cli(["bridge", write(tmp_path, data)], capsys)
    assert code == 1 and json.loads(out)["error"]["type"] == "Infeasible"


def test_condition_tables(tmp_path, capsys):
    data = dict(UNIFORM, observable="X_0", f={"time": 1, "values": {"a": 0.0, "b": 1.0}},
                P={"a,a": 0.5, "b,b": 0.5})
    code, out, _ = run_cli(["condition", write(tmp_path, data)], capsys)
    rep = json.loads(out)
    assert code == 0
    r = rep["results"]
    assert r["pushforward"] == {"a": 0.5, "b": 0.5}
    assert r["cond_expectation"] == {"a": 0.5, "b": 0.5}
    assert r["cond_expectation_P"] == {"a": 0.0, "b": 1.0}
    assert rep["diagnostics"]["factorization_error"] <= 1e-12


def test_markov_and_factorize(tmp_path, capsys):
    code, out, _ = run_cli(["markov", "example:sticky3"], capsys)
    rep = json.loads(out)
    assert code == 0 and rep["results"]["is_markov"] and rep["results"]["conditionable"]
    code, out, _ = run_cli(["factorize", "example:sticky3"], capsys)
    rep = json.loads(out)
    assert code == 0 and rep["results"]["ok"] and len(rep["results"]["rows"]) == 3


def test_factorize_measurability_violation(tmp_path, capsys):
    data = dict(UNIFORM, alpha={"time": 1, "values": {"a": 1.0, "b": 2.0}}, t_index=0)
    code, out, _ = run_cli(["factorize", write(tmp_path, data)], capsys)
    assert code == 1 and json.loads(out)["error"]["type"] == "MeasurabilityViolation"


def test_check_battery_passes_and_is_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert cli.main(["check", "example:uniform2x2", "--seed", "7", "--output", str(a)]) == 0
    assert cli.main(["check", "example:uniform2x2", "--seed", "7", "--output", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    rep = json.loads(a.read_text())
    assert rep["seed"] == 7 and rep["status"] == "ok"
    assert all(c["passed"] is not False for c in rep["results"]["checks"])
    assert cli.main(["check", "example:uniform2x2", "--seed", "8", "--output", str(b)]) == 0
    assert a.read_bytes() != b.read_bytes()


def test_check_flags_non_markov_paths_as_informational(tmp_path, capsys):
    w = [0.25, 0.0, 0.25, 0.5]
    code, out, _ = run_cli(["check", write(tmp_path, {"spec_version": 1, "states": ["a", "b"], "N": 1,
                                                       "paths": w})], capsys)
    rep = json.loads(out)
    assert code == 0
    markov = [c for c in rep["results"]["checks"] if c["name"] == "markov"][0]
    assert markov["passed"] is None


def test_report_echo_round_trips(capsys):
    code, out, _ = run_cli(["bridge", "example:sticky3", "--tol", "1e-11"], capsys)
    rep = json.loads(out)
    again = cli.validate(rep["spec"])
    orig, _ = cli.parse_spec("example:sticky3")
    assert again == orig and hash(again) == hash(orig)
    assert rep["options"]["tol"] == 1e-11


def test_float_format():
    assert cli.dumps(0.1) == "0.10000000000000001"
    assert cli.dumps(1e12) == "1000000000000.0"
    assert cli.dumps(float("inf")) == "Infinity"
    assert cli.dumps({"b": 1, "a": [True, None]}) == '{\n  "a": [true, null],\n  "b": 1\n}'


def test_exit_zero_iff_ok(tmp_path, capsys):
    for cmd in cli.COMMANDS:
        code, out, _ = run_cli([cmd, "example:sticky3"], capsys)
        assert (code == 0) == (json.loads(out)["status"] == "ok")


def test_examples_listing(capsys):
    code, out, _ = run_cli(["examples"], capsys)
    assert code == 0 and "uniform2x2" in out.split()


def test_console_script_pure_python_backend(tmp_path):
    env = dict(os.environ, PATHMEASURES_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-m", "pathmeasures.cli", "bridge", "example:sticky3"],
                         capture_output=True, text=True, env=env, check=True)
    pure = json.loads(out.stdout)["results"]["coupling"]
    compiled = cli.run("bridge", cli.parse_spec("example:sticky3")[0])[0]["results"]["coupling"]
    assert np.allclose(pure, compiled, rtol=0, atol=1e-12)
