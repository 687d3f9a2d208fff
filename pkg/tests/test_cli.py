import json
import shlex
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from topoindex import cli
from topoindex.errors import ConfigError

README = Path(__file__).resolve().parents[1] / "README.md"


def run(argv):
    return cli.main(argv)


def _json(path):
    return json.loads(Path(path).read_text())


@pytest.fixture(autouse=True)
def _in_tmp(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("TOPOINDEX_THREADS", raising=False)


# -- configuration ------------------------------------------------------------

def test_defaults_are_complete():
    cfg = cli.load_config()
    assert cfg["command"] == "index" and cfg["model"]["builder"] == "ssh"


def test_precedence(tmp_path):
    f = tmp_path / "c.json"
    f.write_text(json.dumps({"model": {"s": 0.3, "L": 8}, "seed": 5}))
    cfg = cli.load_config(str(f), ["model.s=0.7"], seed=9)
    assert cfg["model"]["s"] == 0.7 and cfg["model"]["L"] == 8 and cfg["seed"] == 9


@pytest.mark.parametrize("bad", ["model.nope=1", "nope=1", "model=3", "model.s"])
def test_bad_overrides(bad):
    with pytest.raises(ConfigError):
        cli.load_config(None, [bad])


def test_unknown_file_key(tmp_path):
    f = tmp_path / "c.json"
    f.write_text(json.dumps({"model": {"size": 8}}))
    assert run(["run", "--config", str(f)]) == 2


def test_override_parsing():
    cfg = cli.load_config(None, ["edge.sizes=[8,12]", "twist.convention=cellB_dual"])
    assert cfg["edge"]["sizes"] == [8, 12] and cfg["twist"]["convention"] == "cellB_dual"


def test_config_hash_ignores_output_and_threads():
    a = cli.load_config(None, [], out="x", threads=1)
    b = cli.load_config(None, [], out="y", threads=4)
    assert cli.config_sha256(a) == cli.config_sha256(b)
    c = cli.load_config(None, ["model.s=0.3"])
    assert cli.config_sha256(a) != cli.config_sha256(c)


# -- commands ------------------------------------------------------------------

def test_index_command(capsys):
    assert run(["run", "index", "--set", "model.s=0.8", "--out", "o"]) == 0
    rep = _json("o/index.json")
    assert rep["index"] == 1 and rep["convention"] == "cellA"
    man = _json("o/run.manifest.json")
    assert man["status"] == 0 and man["summary"] == {"index": 1}
    assert set(man["outputs"]) == {"index.json", "index.csv"}
    assert "index" in capsys.readouterr().out


def test_undefined_index_exit_code():
    assert run(["run", "index", "--set", "model.s=0.5", "--set", "model.L=8", "--out", "o"]) == 4
    assert _json("o/index.json")["index"] is None


def test_domain_error_writes_record():
    assert run(["run", "index", "--set", "model.L=7", "--out", "o"]) == 2
    err = _json("o/error.json")
    assert err["error"] == "DomainError" and err["exit_code"] == 2


def test_resource_error_exit_code():
    code = run(["run", "index", "--set", "model.L=16", "--set", "solver.max_dim=100", "--out", "o"])
    assert code == 3
    assert _json("o/error.json")["error"] == "ResourceError"


def test_sweep_outputs():
    assert run(["run", "sweep", "--set", "model.L=8", "--set", "sweep.num=11", "--out", "o"]) == 0
    data = np.loadtxt("o/sweep_re.dat")
    assert data.shape == (11, 2)
    assert Path("o/sweep.png").exists()
    assert _json("o/sweep.json")["transitions"] == [pytest.approx([0.4, 0.6])]


def test_no_plot():
    assert run(["run", "sweep", "--set", "model.L=8", "--set", "sweep.num=5", "--out", "o", "--no-plot"]) == 0
    assert not Path("o/sweep.png").exists()
    assert _json("o/run.manifest.json")["figures"] == []


def test_hubbard_duality():
    args = ["run", "duality", "--set", "model.builder=hubbard_ssh", "--set", "model.L=8",
            "--set", "model.U=3", "--set", "model.s=0.0", "--out", "o"]
    assert run(args) == 0
    assert _json("o/run.manifest.json")["summary"] == {"index": 0, "dual_index": 1, "sum": 1}


def test_atomic_site_centered():
    args = ["run", "index", "--set", "model.builder=atomic", "--set", "model.potential=-1",
            "--set", "twist.convention=site_centered", "--out", "o"]
    assert run(args) == 0
    assert _json("o/index.json")["index"] == 1


def test_ensemble_explicit_seeds():
    args = ["run", "ensemble", "--set", "model.L=8", "--set", "ensemble.seeds=[3,4]", "--out", "o", "--no-plot"]
    assert run(args) == 0
    assert [r["seed"] for r in _json("o/ensemble.json")["records"]] == [3, 4]


def test_winding_command():
    args = ["run", "winding", "--set", "model.builder=rice_mele", "--set", "model.L=8",
            "--set", "winding.method=slater", "--out", "o", "--no-plot"]
    assert run(args) == 0
    assert _json("o/winding.json")["q"] == 1


def test_zak_command():
    assert run(["run", "zak", "--out", "o"]) == 0
    assert _json("o/run.manifest.json")["summary"] == {"nu": [0, 0, 1, 1]}


def test_threads_do_not_change_outputs():
    base = ["run", "sweep", "--set", "model.L=8", "--set", "sweep.num=9", "--no-plot"]
    assert run(base + ["--out", "a", "--threads", "1"]) == 0
    assert run(base + ["--out", "b", "--threads", "3"]) == 0
    ma, mb = _json("a/run.manifest.json"), _json("b/run.manifest.json")
    assert ma["outputs"] == mb["outputs"]


# -- reproduce ---------------------------------------------------------------------

def test_reproduce_round_trip(capsys):
    assert run(["run", "index", "--set", "model.s=0.9", "--out", "o"]) == 0
    assert run(["reproduce", "o/run.manifest.json"]) == 0
    assert "identically" in capsys.readouterr().out
    assert Path("o/reproduce/index.json").read_bytes() == Path("o/index.json").read_bytes()


def test_reproduce_refuses_seed_mismatch():
    assert run(["run", "index", "--out", "o"]) == 0
    assert run(["reproduce", "o/run.manifest.json", "--seed", "7"]) == 2


def test_reproduce_refuses_edited_config():
    assert run(["run", "index", "--out", "o"]) == 0
    man = _json("o/run.manifest.json")
    man["config"]["model"]["s"] = 0.3
    Path("o/run.manifest.json").write_text(json.dumps(man))
    assert run(["reproduce", "o/run.manifest.json"]) == 2
    # with --override the rerun differs from the recorded hashes
    assert run(["reproduce", "o/run.manifest.json", "--override"]) == 1


def test_reproduce_missing_manifest():
    assert run(["reproduce", "nothing.json"]) == 2


# -- documentation --------------------------------------------------------------------

def _readme_commands():
    text = README.read_text(encoding="utf-8")
    return [line[2:].strip() for line in text.splitlines() if line.startswith("$ topoindex ")]


def test_readme_has_examples():
    assert len(_readme_commands()) >= 8


def test_readme_examples_run_verbatim(tmp_path):
    """Each documented command runs as a subprocess, in order, and exits 0."""
    exe = Path(sys.executable).with_name("topoindex")
    for cmd in _readme_commands():
        argv = shlex.split(cmd)
        if exe.exists():
            argv[0] = str(exe)
        else:
            argv = [sys.executable, "-m", "topoindex.cli"] + argv[1:]
        proc = subprocess.run(argv, cwd=tmp_path, capture_output=True, text=True)
        assert proc.returncode == 0, f"{cmd}\n{proc.stderr}"


def test_readme_python_snippet(tmp_path):
    text = README.read_text(encoding="utf-8")
    block = text.split("```python\n", 1)[1].split("```", 1)[0]
    proc = subprocess.run([sys.executable, "-c", block], cwd=tmp_path, capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.startswith("1 ")
