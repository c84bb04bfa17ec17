"""Config validation, cache garbage collection and the command-line driver."""
import json
import subprocess
import sys

import numpy as np
import pytest

from ultralab import cli, config
from ultralab.cache import Cache, cache_gc
from ultralab.errors import ConfigInvalid


# ---------------------------------------------------------------- config

def test_defaults_filled():
    cfg = config.loads('[[experiment]]\nid = "lemma-min"\nm = [0.3]\n')
    (e,) = cfg.experiments
    assert e.params == {"m": [0.3], "rho": [100.0]}
    assert cfg.thresholds["tau"] == 1.0


@pytest.mark.parametrize("text", [
    "",
    "[thresholds]\ntau = 2.0\n",
    '[[experiment]]\nid = "lemma-min"\nrhoo = [3]\n',
    '[[experiment]]\nid = "nope"\n',
    '[[experiment]]\nm = 2\n',
    '[thresholds]\ntaux = 1\n[[experiment]]\nid = "lemma-min"\n',
    '[thresholds]\ntau = -1\n[[experiment]]\nid = "lemma-min"\n',
    '[[experiment]]\nid = "null-decay"\nkind = "sinc"\n',
    '[[experiment]]\nid = "prop-aba"\nmu = 3.0\nlam = 2.0\n',
    '[[experiment]]\nid = "null-decay"\ncontrol = 1\n',
    '[[experiment]]\nid = "mollifier-certify"\nn = "1..x"\n',
    'extra = 1\n[[experiment]]\nid = "lemma-min"\n',
    "[[experiment\n",
])
def test_invalid_configs(text):
    with pytest.raises(ConfigInvalid):
        config.loads(text)


def test_parse_range():
    assert config.parse_range("2..5") == [2, 3, 4, 5]
    assert config.parse_range("1,4,9") == [1, 4, 9]
    assert config.parse_range([3, 4]) == [3, 4]


def test_every_schema_entry_validates_with_defaults():
    for eid in config.SCHEMA:
        config.validate_experiment({"id": eid})


def test_overrides_are_toml_literals():
    raw = cli._parse_overrides("lemma-min", ["--m", "0.3,0.5", "--rho", "[3, 10]"])
    assert raw == {"id": "lemma-min", "m": [0.3, 0.5], "rho": [3, 10]}
    with pytest.raises(ConfigInvalid):
        cli._parse_overrides("lemma-min", ["--m"])


# ---------------------------------------------------------------- cache-gc

def test_cache_gc_empty_dir(tmp_path):
    s = cache_gc(tmp_path)
    assert s.kept == 0 and s.removed == [] and s.reclaimed_bytes == 0


def test_cache_gc_removes_only_corrupt(tmp_path):
    c = Cache(tmp_path)
    c.write("good", {"a": np.arange(4.0)}, {"x": 1})
    bad = c.write("bad", {"a": np.arange(4.0)}, {"x": 2})
    raw = bytearray(bad.read_bytes())
    raw[-40] ^= 0xFF
    bad.write_bytes(bytes(raw))
    s = cache_gc(tmp_path)
    assert s.removed == ["bad.npz"] and s.kept == 1 and s.reclaimed_bytes > 0
    assert c.read("good")[1]["x"] == 1
    assert cache_gc(tmp_path).removed == []


def test_cli_cache_gc(tmp_path, capsys):
    assert cli.main(["cache-gc", str(tmp_path)]) == 0
    assert json.loads(capsys.readouterr().out)["kept"] == 0


# ---------------------------------------------------------------- runs

def _strip(report):
    report = dict(report)
    report.pop("wall_clock")
    return report


def test_report_deterministic_except_wall_clock(tmp_path):
    cfg = config.loads('[[experiment]]\nid = "abe-classify"\n[[experiment]]\nid = "lemma-min"\nm = [0.3]\n')
    a = cli.run(cfg, tmp_path / "a")
    b = cli.run(cfg, tmp_path / "b", threads=2)
    assert _strip(a) == _strip(b)
    assert (tmp_path / "a" / "report.json").read_text().count("wall_clock") == 1
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert files == sorted(p.name for p in (tmp_path / "b").iterdir())
    assert any(f.startswith("00-abe-classify") for f in files)


def test_exit_codes(tmp_path, capsys):
    out = str(tmp_path / "o")
    assert cli.main(["--out", out, "abe-classify"]) == 0
    # the stronger bound on the minimum is asserted and fails for every rho
    assert cli.main(["--out", out, "lemma-min", "--m", "0.5", "--rho", "100"]) == 1
    assert cli.main(["--out", out, "lemma-min", "--mm", "0.5"]) == 2
    assert cli.main(["--out", out, "run", str(tmp_path / "missing.toml")]) == 2
    lines = capsys.readouterr().out.splitlines()
    assert "PASS abe-classify" in lines and "FAIL lemma-min" in lines


def test_run_config_file(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text('[thresholds]\ntau_c = 0.05\n[[experiment]]\nid = "abe-classify"\nsequence = "ones"\n')
    assert cli.main(["--out", str(tmp_path / "o"), "run", str(p)]) == 0
    rep = json.loads((tmp_path / "o" / "report.json").read_text())
    assert rep["thresholds"]["tau_c"] == 0.05
    assert rep["results"][0]["params"]["sequence"] == "ones"


def test_module_entry_point_version():
    out = subprocess.run([sys.executable, "-m", "ultralab.cli", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.startswith("ultralab ")
