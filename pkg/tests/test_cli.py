import json

import numpy as np
import pytest

from _sponges import MCMULLEN_M1, m1, moran, square
from sponge_dim.cli import build_parser, run
from sponge_dim.cycles import CircularCycle, ConstantCycle, KnotCycle
from sponge_dim.gap import GapParams, build_gap_ifs
from sponge_dim.ifs import BlockIFS, DiagonalIFS
from sponge_dim.serialize import SpecError, dump_spec, dumps, load_spec, parse_spec

M1_DOC = """{
  "kind": "explicit",
  "d": 2,
  "bases": [
    [{"ratio": 0.3333333333333333, "offset": 0.0}, {"ratio": 0.3333333333333333, "offset": 0.3333333333333333},
     {"ratio": 0.3333333333333333, "offset": 0.6666666666666666}],
    [{"ratio": 0.5, "offset": 0.0}, {"ratio": 0.5, "offset": 0.5}]
  ],
  "E": [[0, 0], [1, 1], [2, 0]]
}"""


@pytest.fixture
def m1_path(tmp_path):
    p = tmp_path / "m1.json"
    p.write_text(M1_DOC)
    return str(p)


def _same(a, b):
    return dump_spec(a) == dump_spec(b)


# ---------------------------------------------------------------- documents


def test_parse_examples():
    f = parse_spec(M1_DOC)
    assert isinstance(f, DiagonalIFS) and f.size == 3
    b = parse_spec(dump_spec(build_gap_ifs(GapParams(k=50.0))))
    assert isinstance(b, BlockIFS) and b.J == 3
    with pytest.raises(SpecError, match=r"ratio not in \(0,1\)"):
        parse_spec(M1_DOC.replace('"ratio": 0.5,', '"ratio": 1.0,', 1))


@pytest.mark.parametrize("obj", [
    m1(), square(), moran(), build_gap_ifs(GapParams(k=123.0)),
    ConstantCycle(np.array([0.2, 0.3, 0.5])),
    KnotCycle(2.5, np.array([[0.2, 0.3, 0.5], [0.6, 0.1, 0.3]])),
    CircularCycle(GapParams().gamma),
])
def test_round_trip(obj):
    text = dump_spec(obj)
    back = parse_spec(text)
    assert type(back) is type(obj)
    assert dump_spec(back) == text


def test_round_trip_is_bit_exact():
    f = m1()
    g = parse_spec(dump_spec(f))
    assert np.array_equal(f.ratios, g.ratios)
    b = build_gap_ifs(GapParams(k=777.0))
    c = parse_spec(dump_spec(b))
    assert np.array_equal(b.X, c.X) and np.array_equal(b.logN, c.logN)


@pytest.mark.parametrize("text, msg", [
    ('{"kind": "explicit", "d": 1, "bases": [[{"ratio": 0.5, "offset": 0}]], "E": [[0]], "x": 1}', "unknown key"),
    ('{"kind": "explicit", "d": 1, "bases": [[{"ratio": NaN, "offset": 0}]], "E": [[0]]}', "non-finite"),
    ('{"kind": "explicit", "d": 1, "bases": [[{"ratio": 0.5, "offset": 0}]], "E": [[3]]}', r"E\[0\]\[0\]"),
    ('{"kind": "explicit", "d": 1, "bases": [[{"ratio": 0.5, "offset": 0, "orientation": 2}]], "E": [[0]]}',
     "orientation"),
    ('{"kind": "tree"}', "unknown sponge kind"),
    ('{"kind": "block", "d": 1, "J": 1, "logN": [[0.0]], "X": [[0.0]]}', "X"),
    ('{"lambda": 2, "form": "constant", "p": [1.0]}', "lambda"),
    ('{"lambda": 2, "form": "spiral"}', "unknown cycle form"),
    ('{"lambda": 2, "form": "knots", "knots": [[0.5, 0.5]], "gamma": 1}', "not allowed"),
    ('{"lambda": 2, "form": "circular", "gamma": 1.0}', "lambda"),
    ('[1, 2]', "top level"),
    ('{"kind": "explicit",\n "d": }', "line 2"),
])
def test_strict_parse_errors(text, msg):
    with pytest.raises(SpecError, match=msg):
        parse_spec(text)


def test_load_spec_missing_file(tmp_path):
    with pytest.raises(SpecError):
        load_spec(tmp_path / "nope.json")


def test_dumps_is_deterministic():
    a = dumps({"b": 0.1, "a": [1, 2.5, np.float64(1 / 3)], "c": {"z": True, "y": None}})
    assert a == dumps({"c": {"y": None, "z": True}, "a": [1, 2.5, 1 / 3], "b": 0.1})
    assert json.loads(a)["a"][2] == 1 / 3


# ---------------------------------------------------------------- commands


def _json(capsys, argv):
    code = run(argv)
    out = capsys.readouterr().out
    assert code == 0, out
    return json.loads(out)


def test_parser_rejects_unknown_flags_and_needs_a_subcommand():
    with pytest.raises(SystemExit) as e:
        build_parser().parse_args(["dynd", "--bogus"])
    assert e.value.code == 2
    with pytest.raises(SystemExit):
        build_parser().parse_args([])


def test_dynd_m1(capsys, m1_path):
    rep = _json(capsys, ["dynd", "--spec", m1_path, "--json", "--starts", "6"])
    assert abs(rep["value"] - MCMULLEN_M1) < 1e-6
    assert abs(rep["oracle"]["mcmullen_difference"]) < 1e-6
    assert rep["quantity"] == "dynamical_dimension"


def test_validate(capsys, m1_path, tmp_path):
    assert _json(capsys, ["validate", "--spec", m1_path, "--json"])["ok"]
    broken = tmp_path / "broken.json"
    broken.write_text(M1_DOC.replace('"offset": 0.5', '"offset": 0.75'))
    assert run(["validate", "--spec", str(broken), "--json"]) == 2
    rep = json.loads(capsys.readouterr().out)
    assert not rep["ok"] and rep["violations"]
    bad = tmp_path / "bad.json"
    bad.write_text(M1_DOC.replace('"ratio": 0.5,', '"ratio": 1.0,', 1))
    assert run(["validate", "--spec", str(bad)]) == 2
    assert "ratio not in (0,1)" in capsys.readouterr().err


def test_invalid_sponge_is_rejected_by_other_commands(capsys, tmp_path):
    broken = tmp_path / "broken.json"
    broken.write_text(M1_DOC.replace('"offset": 0.5', '"offset": 0.75'))
    assert run(["dynd", "--spec", str(broken)]) == 2
    assert "invalid sponge" in capsys.readouterr().err
    assert run(["dynd"]) == 2


def test_classify_and_svg(capsys, m1_path, tmp_path):
    svg = tmp_path / "c.svg"
    rep = _json(capsys, ["classify", "--spec", m1_path, "--json", "--svg", str(svg), "--depth", "2"])
    assert rep["is_baranski"] and rep["is_sierpinski"]
    assert svg.read_text().startswith("<svg")


def test_dim_bernoulli(capsys, m1_path):
    rep = _json(capsys, ["dim-bernoulli", "--spec", m1_path, "--json"])
    assert abs(rep["value"] - 1.3389157) < 1e-7
    assert abs(rep["value"] - rep["value_breakpoint_form"]) < 1e-12
    rep = _json(capsys, ["dim-bernoulli", "--spec", m1_path, "--json", "--p", "[0.5, 0.25, 0.25]"])
    assert rep["p"] == [0.5, 0.25, 0.25]
    assert run(["dim-bernoulli", "--spec", m1_path, "--p", "[0.5, 0.5]"]) == 2


def test_cycle_dim_with_artifacts(capsys, m1_path, tmp_path):
    cyc = tmp_path / "cyc.json"
    cyc.write_text(dump_spec(KnotCycle(2.0, np.array([[0.4, 0.3, 0.3], [0.3, 0.3, 0.4]]))))
    csv_path, svg_path = tmp_path / "c.csv", tmp_path / "c.svg"
    rep = _json(capsys, ["cycle-dim", "--spec", m1_path, "--cycle", str(cyc), "--json",
                         "--csv", str(csv_path), "--svg", str(svg_path), "--grid", "64"])
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "B,delta_rB" and len(lines) == 65
    assert min(float(l.split(",")[1]) for l in lines[1:]) >= rep["value"] - 1e-12
    assert "<polyline" in svg_path.read_text()
    assert run(["cycle-dim", "--spec", m1_path]) == 2


def test_hausdorff_lb_command(capsys, m1_path):
    rep = _json(capsys, ["hausdorff-lb", "--spec", m1_path, "--json", "--starts", "4", "--budget", "80"])
    assert abs(rep["value"] - MCMULLEN_M1) <= 1e-4


def test_oracle_commands(capsys, m1_path, tmp_path):
    rep = _json(capsys, ["oracle-closed-form", "--spec", m1_path, "--json"])
    assert rep["moran"] == "not-applicable" and abs(rep["mcmullen"] - MCMULLEN_M1) < 1e-12
    csv_path = tmp_path / "e.csv"
    rep = _json(capsys, ["oracle-empirical", "--spec", m1_path, "--json", "--samples", "2000",
                         "--csv", str(csv_path)])
    assert abs(rep["estimate"] - rep["delta_p"]) <= 4 * rep["stderr"]
    assert len(csv_path.read_text().splitlines()) == 2001


def test_gap_commands(capsys, tmp_path):
    out = tmp_path / "gap.json"
    assert run(["gap-build", "--k", "1e4", "--out", str(out)]) == 0
    assert isinstance(load_spec(out), BlockIFS)
    rep = _json(capsys, ["gap-verify", "--json"])
    assert abs(rep["quadratic_forms"]["c1"] - 1.5) < 1e-12
    assert rep["beta_min"] > 0
    assert run(["gap-build", "--k", "0.1"]) == 2
    assert "k too small" in capsys.readouterr().err
    assert run(["gap-verify", "--epsilon", "0.9"]) == 2


def test_gap_report_fields(capsys):
    rep = _json(capsys, ["gap-report", "--epsilon", "0.05", "--ell", "8", "--k", "1e4", "--json", "--starts", "4"])
    assert abs(rep["delta0"] - 1.5) <= 1e-9
    assert rep["gap_limit"] > 0
    for key in ("gap", "gap_finite_k", "gap_positive", "prediction", "identities"):
        assert key in rep


def test_reports_are_byte_identical(tmp_path, m1_path):
    outs = []
    for n in range(2):
        o, c = tmp_path / f"r{n}.json", tmp_path / f"r{n}.csv"
        assert run(["oracle-empirical", "--spec", m1_path, "--json", "--samples", "500", "--seed", "4",
                    "--out", str(o), "--csv", str(c)]) == 0
        assert run(["dynd", "--spec", m1_path, "--json", "--seed", "4", "--starts", "4",
                    "--out", str(tmp_path / f"d{n}.json")]) == 0
        outs.append((o.read_bytes(), c.read_bytes(), (tmp_path / f"d{n}.json").read_bytes()))
    assert outs[0] == outs[1]


def test_thread_cap_does_not_change_reports(tmp_path, m1_path, monkeypatch):
    texts = []
    for cap in ("1", "3"):
        monkeypatch.setenv("SPONGE_DIM_THREADS", cap)
        o = tmp_path / f"t{cap}.json"
        assert run(["dynd", "--spec", m1_path, "--json", "--starts", "5", "--out", str(o)]) == 0
        texts.append(o.read_bytes())
    assert texts[0] == texts[1]
    monkeypatch.setenv("SPONGE_DIM_THREADS", "many")
    assert run(["dynd", "--spec", m1_path]) == 2


def test_text_output(capsys, m1_path):
    assert run(["dim-bernoulli", "--spec", m1_path]) == 0
    assert "value: 1.33891" in capsys.readouterr().out
