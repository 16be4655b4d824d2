import json
from fractions import Fraction

import gmpy2
import pytest

from circle_renorm.cli import main
from circle_renorm.errors import ConfigError
from circle_renorm.numerics import working_precision
from circle_renorm.io import emit_decay_plot, format_number, inventory, write_csv, write_json
from circle_renorm.pipeline import RunConfig, demo_config, load_manifest, run
from circle_renorm.reports import censor_floor, fit_decay, make_report

SMALL = {"f": {"family": "arnold2"}, "g": {"family": "perturbed2", "coeffs": ["0.01"]},
         "cf": [1] * 9, "depth": 5, "precision": 256,
         "audits": ["criterion", "fundamental", "signature"], "svg": True}


def test_format_number():
    assert format_number(3, 512) == "3"
    assert format_number(0.1, 512) == "0.1"
    assert format_number(None, 512) == ""
    assert format_number(True, 64) == "true"
    assert format_number(gmpy2.mpfr(0), 512) == "0"
    with working_precision(512):
        third = gmpy2.mpfr(1) / 3
    # 512 bits are capped at 40 digits, 64 bits give 19
    assert format_number(third, 512) == "3." + "3" * 39 + "e-01"
    assert format_number(third, 64) == "3." + "3" * 18 + "e-01"
    assert format_number(Fraction(1, 4), 64) == "2.5" + "0" * 17 + "e-01"


def test_json_keeps_short_numbers_and_strings_long_ones(tmp_path):
    with working_precision(256):
        third = gmpy2.mpfr(1) / 3
    obj = {"b": 0.25, "a": third, "n": 10**20, "k": [1, None]}
    data = json.loads(write_json(tmp_path / "x.json", obj, 256).read_text())
    assert list(data) == ["a", "b", "k", "n"]
    assert data["b"] == 0.25
    assert isinstance(data["a"], str) and data["a"].startswith("3.333")
    assert data["n"] == str(10**20)


def test_csv_rows(tmp_path):
    path = write_csv(tmp_path / "t.csv", ["n", "value"], [(1, 0.5), (2, gmpy2.mpfr("0.125", 64))], 64)
    assert path.read_text().splitlines() == ["n,value", "1,0.5", "2,1.25" + "0" * 16 + "e-01"]


def test_fit_recovers_geometric_rate():
    pts = [(n, 3 * 0.5**n) for n in range(12)]
    rep = make_report("x", pts, 512)
    assert abs(rep.lam - 0.5) < 1e-6 and abs(rep.C - 3) < 1e-6
    assert rep.residual < 1e-9
    assert fit_decay([4], [1.0]) is None


def test_censoring_and_zero_sequences():
    floor = censor_floor(128)
    rep = make_report("z", [(n, floor / 2) for n in range(8)], 128)
    assert rep.all_zero() and rep.censored == 8 and not rep.fitted
    with pytest.raises(ValueError):
        make_report("neg", [(0, -1.0)], 128)


def test_plots(tmp_path):
    zero = emit_decay_plot(make_report("z", [(n, 0.0) for n in range(8)], 128), tmp_path / "z.svg")
    assert "censored" in zero.read_text()
    one = emit_decay_plot(make_report("o", [(5, 0.1)], 128), tmp_path / "o.svg")
    assert "lambda" not in one.read_text()
    geo = make_report("g", [(n, 2.0**-n) for n in range(10)], 128)
    assert abs(geo.lam - 0.5) < 1e-6
    text = emit_decay_plot(geo, tmp_path / "g.svg").read_text()
    assert "lambda=0.5" in text
    assert emit_decay_plot(geo, tmp_path / "g2.svg").read_text() == text
    with pytest.raises(ValueError):
        emit_decay_plot(make_report("e", [], 128), tmp_path / "e.svg")


def test_config_validation(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig.from_dict(dict(SMALL, out=str(tmp_path), bogus=1))
    with pytest.raises(ConfigError):
        RunConfig.from_dict(dict(SMALL, out=str(tmp_path), depth=0))
    with pytest.raises(ConfigError):
        RunConfig.from_dict(dict(SMALL, out=str(tmp_path), audits=["nope"]))
    a = RunConfig.from_dict(dict(SMALL, out="x", jobs=1))
    b = RunConfig.from_dict(dict(SMALL, out="y", jobs=3))
    assert a.digest() == b.digest()
    assert demo_config("d").depth == 10


def test_run_is_deterministic(tmp_path):
    runs = []
    for name, jobs in (("a", 1), ("b", 2)):
        cfg = RunConfig.from_dict(dict(SMALL, out=str(tmp_path / name), jobs=jobs))
        man = run(cfg)
        assert man.error is None
        runs.append(inventory(tmp_path / name))
    for inv in runs:
        inv.pop("manifest.json")
    assert runs[0] == runs[1]
    assert any(k.endswith(".svg") for k in runs[0])
    man = load_manifest(tmp_path / "a")
    assert set(man["files"]) == set(runs[0])


def test_empty_audits_write_manifest_only(tmp_path):
    cfg = RunConfig.from_dict(dict(SMALL, out=str(tmp_path / "m"), audits=[]))
    run(cfg, stages=())
    assert [p.name for p in (tmp_path / "m").iterdir()] == ["manifest.json"]


def test_cli_exit_codes(tmp_path):
    cf = "1,1,1,1,1,1,1"
    assert main(["partition", "--depth", "4", "--cf", cf, "--out", str(tmp_path / "ok")]) == 0
    assert (tmp_path / "ok" / "partitions.csv").exists()
    assert main(["tune", "--map", '{"family": "nope"}', "--out", str(tmp_path / "c")]) == 2
    assert main(["tune", "--map", "[1]", "--out", str(tmp_path / "c2")]) == 2
    assert main(["tune", "--budget", "5", "--out", str(tmp_path / "b")]) == 3
    code = main(["conjugacy", "--depth", "4", "--cf", cf, "--g", '{"family": "arnold2", "a": "0.3"}',
                 "--audits", "criterion", "--out", str(tmp_path / "m")])
    assert code == 4
    err = load_manifest(tmp_path / "m")["error"]
    assert err["diff"]["level"] == 0 and err["diff"]["kind"] == "partial quotient"
