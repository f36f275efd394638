import json
import math
from pathlib import Path

import numpy as np
import pytest
from jsonschema import Draft202012Validator
from referencing import Registry, Resource

from discat.cli import main
from discat.models import PolychoricModel
from discat.tables import ContingencyTable

from fixtures import envious_counts

SCHEMAS = Path(__file__).resolve().parents[1] / "docs" / "schemas"


def _registry():
    res = []
    for p in SCHEMAS.glob("*.schema.json"):
        doc = json.loads(p.read_text())
        res.append((doc["$id"], Resource.from_contents(doc)))
    return Registry().with_resources(res)


def validate(obj, name):
    schema = json.loads((SCHEMAS / f"{name}.schema.json").read_text())
    Draft202012Validator(schema, registry=_registry()).validate(obj)


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def envious_csv(tmp_path):
    p = tmp_path / "envious.csv"
    p.write_text(ContingencyTable((5, 5), envious_counts()).to_long_csv())
    return p


@pytest.fixture
def items_csv(tmp_path):
    rng = np.random.default_rng(11)
    z = 0.75 * rng.standard_normal((400, 1)) + math.sqrt(1 - 0.75**2) * rng.standard_normal((400, 4))
    codes = np.digitize(z, [-1.0, 0.0, 1.0]) + 1
    p = tmp_path / "items.csv"
    p.write_text("a,b,c,d\n" + "".join(",".join(map(str, r)) + "\n" for r in codes))
    return p


def test_fit_outputs_valid_json(envious_csv, capsys):
    code, out, _ = run(["fit", "--input", envious_csv], capsys)
    assert code == 0
    payload = json.loads(out)
    validate(payload, "fit")
    assert payload["theta"]["rho"] == pytest.approx(-0.9249, abs=5e-4)
    assert payload["se"]["rho"] > 0
    assert payload["convergence"]["converged"] is True
    assert payload["manifest"]["inputs"][str(envious_csv)]


def test_fit_on_exact_table_agrees_between_c_and_mle(tmp_path, capsys):
    model = PolychoricModel(3, 3)
    theta = np.array([0.4, -0.5, 0.6, -0.3, 0.8])
    counts = np.rint(model.probs_and_grad(theta)[0] * 1e9).astype(np.int64).reshape(3, 3)
    p = tmp_path / "exact.csv"
    p.write_text(ContingencyTable((3, 3), counts).to_long_csv())
    fits = []
    for c in ("1.6", "inf"):
        code, out, _ = run(["fit", "--input", p, "--c", c], capsys)
        assert code == 0
        fits.append(json.loads(out)["theta"])
    for k in fits[0]:
        assert fits[0][k] == pytest.approx(fits[1][k], abs=1e-6)
    assert json.loads(out)["c"] == "inf"


def test_fit_from_raw_columns(items_csv, capsys):
    code, out, _ = run(["fit", "--raw", items_csv, "--cols", "a,c"], capsys)
    assert code == 0
    assert 0.3 < json.loads(out)["theta"]["rho"] < 0.8


def test_missing_column_exits_one_and_names_it(items_csv, capsys):
    code, out, err = run(["fit", "--raw", items_csv, "--cols", "a,zzz"], capsys)
    assert code == 1
    assert out == ""
    assert "zzz" in err
    assert len(err.strip().splitlines()) == 1


def test_missing_file_exits_one(tmp_path, capsys):
    code, _, err = run(["fit", "--input", tmp_path / "nope.csv"], capsys)
    assert code == 1
    assert "nope.csv" in err


def test_tuning_constant_below_one_rejected(envious_csv, capsys):
    code, _, err = run(["fit", "--input", envious_csv, "--c", "0.5"], capsys)
    assert code == 1
    assert "tuning constant" in err


def test_nonconvergence_exits_two(envious_csv, capsys):
    code, out, err = run(["fit", "--input", envious_csv, "--max-iter", "1"], capsys)
    assert code == 2
    assert "error" in err
    payload = json.loads(out)
    assert payload["convergence"]["converged"] is False
    validate(payload, "fit")


def test_config_file_prepopulates_and_flags_win(envious_csv, tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"# comment\ninput = {envious_csv}\nc = inf\n")
    code, out, _ = run(["--config", cfg, "fit"], capsys)
    assert code == 0
    assert json.loads(out)["c"] == "inf"
    code, out, _ = run(["--config", cfg, "fit", "--c", "2"], capsys)
    assert code == 0
    assert json.loads(out)["c"] == 2.0


def test_config_unknown_key_rejected(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = blue\n")
    code, _, err = run(["--config", cfg, "fit"], capsys)
    assert code == 1
    assert "colour" in err


def test_celltest_json_and_adjust_ordering(envious_csv, capsys):
    code, out, _ = run(["celltest", "--input", envious_csv], capsys)
    assert code == 0
    bh = json.loads(out)
    validate(bh, "celltest")
    code, out, _ = run(["celltest", "--input", envious_csv, "--adjust", "none"], capsys)
    raw = json.loads(out)
    validate(raw, "celltest")
    assert [c["cell"] for c in bh["cells"]] == [c["cell"] for c in raw["cells"]]
    for a, b in zip(raw["cells"], bh["cells"]):
        assert a["adjusted_p"] <= b["adjusted_p"] + 1e-15


def test_celltest_csv_format(envious_csv, capsys):
    code, out, err = run(["celltest", "--input", envious_csv, "--format", "csv"], capsys)
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "cell,statistic,raw_p,adjusted_p,reject"
    assert len(lines) == 26
    assert err.startswith("manifest: ")


def test_polymat_and_cfa(items_csv, tmp_path, capsys):
    js = tmp_path / "pm.json"
    code, out, _ = run(["polymat", "--raw", items_csv, "--json", js], capsys)
    assert code == 0
    rows = out.strip().splitlines()
    assert rows[0] == ",a,b,c,d"
    report = json.loads(js.read_text())
    validate(report, "polymat")
    R = np.array(report["matrix"])
    assert np.allclose(np.diag(R), 1.0)
    code, out, _ = run(["cfa", "--raw", items_csv], capsys)
    assert code == 0
    cfa = json.loads(out)
    validate(cfa, "cfa")
    for v in cfa["loadings"].values():
        assert 0.5 < abs(v) < 1.0


def test_cfa_from_matrix_equicorrelation(tmp_path, capsys):
    lam = 0.75
    R = np.full((6, 6), lam * lam)
    np.fill_diagonal(R, 1.0)
    names = [f"x{i}" for i in range(6)]
    p = tmp_path / "R.csv"
    p.write_text("," + ",".join(names) + "\n" + "".join(n + "," + ",".join(repr(float(v)) for v in r) + "\n" for n, r in zip(names, R)))
    code, out, _ = run(["cfa", "--from-matrix", p], capsys)
    assert code == 0
    cfa = json.loads(out)
    validate(cfa, "cfa")
    for v in cfa["loadings"].values():
        assert abs(v) == pytest.approx(lam, abs=1e-5)
    # alpha of the equicorrelation matrix with r = 0.5625 and six items
    assert cfa["cronbach_alpha"] == pytest.approx(6 * 0.5625 / (1 + 5 * 0.5625), abs=1e-9)


def test_single_item_exits_one(tmp_path, capsys):
    p = tmp_path / "one.csv"
    p.write_text("a\n1\n2\n3\n")
    code, _, err = run(["cfa", "--raw", p], capsys)
    assert code == 1
    assert "two" in err


def test_more_than_one_factor_rejected(items_csv, capsys):
    code, _, _ = run(["cfa", "--raw", items_csv, "--factors", "2"], capsys)
    assert code == 1


def test_simulate_same_seed_is_byte_identical(tmp_path, capsys):
    outs = []
    for name in ("a", "b"):
        d = tmp_path / name
        code, out, _ = run(
            ["simulate", "--reps", 3, "--n", 200, "--eps", "0,0.1", "--seed", 5, "--threads", 1, "--out-dir", d], capsys
        )
        assert code == 0
        outs.append((out, (d / "metrics.csv").read_bytes(), (d / "replications.csv").read_bytes()))
        validate(json.loads((d / "manifest.json").read_text()), "simulate-manifest")
    assert outs[0] == outs[1]
    assert outs[0][1].decode() == outs[0][0]


def test_simulate_different_seed_differs(tmp_path, capsys):
    _, a, _ = run(["simulate", "--reps", 2, "--n", 200, "--eps", "0", "--seed", 1, "--threads", 1], capsys)
    _, b, _ = run(["simulate", "--reps", 2, "--n", 200, "--eps", "0", "--seed", 2, "--threads", 1], capsys)
    assert a != b


def test_subcommand_required(capsys):
    code, _, err = run([], capsys)
    assert code == 1
    assert "subcommand" in err


def test_simulate_manifest_with_infinite_c(tmp_path, capsys):
    code, _, _ = run(["simulate", "--reps", 2, "--n", 200, "--eps", "0", "--c", "inf", "--threads", 1, "--out-dir", tmp_path], capsys)
    assert code == 0
    man = json.loads((tmp_path / "manifest.json").read_text())
    validate(man, "simulate-manifest")
    assert man["design"]["c"] == "inf"
