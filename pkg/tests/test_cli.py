import json
import subprocess
import sys

import pytest

from gwl import fixtures, nn
from gwl.cli import git_blob_sha1, main
from gwl.histogram import read_csv


@pytest.fixture(autouse=True)
def _in_tmp(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)


def run(*argv):
    return main([str(a) for a in argv])


def test_git_blob_hash():
    assert git_blob_sha1(b"") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391"
    assert git_blob_sha1(b"hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a"


def test_sample_ising_example(tmp_path):
    code = run("sample", "--model", "ising:L=4", "--proposal", "random", "--bins", "-40:40:1",
               "--iters", "15", "--seed", "7", "--out", "h.csv")
    assert code == 0
    rows = (tmp_path / "h.csv").read_text().splitlines()
    assert rows[0] == "bin_lo,s,h,visited" and len(rows) == 81
    manifest = json.loads((tmp_path / "h.manifest.json").read_text())
    assert manifest["seed"] == 7 and manifest["iterations"] == 15
    assert manifest["bins"] == {"lo": -40.0, "hi": 40.0, "width": 1.0}
    assert manifest["proposal"] == "random" and manifest["model"] == "ising:L=4"
    assert "started" in manifest and "finished" in manifest
    for side in ("h.json", "h.reps.json", "h.ck.json"):
        assert (tmp_path / side).exists()


def test_bad_bins(capsys):
    assert run("sample", "--model", "ising:L=4", "--bins", "10:-10:1") == 2
    assert "bin range empty" in capsys.readouterr().err
    assert run("sample", "--model", "ising:L=4", "--bins", "1:2") == 2


def test_unknown_model(capsys):
    assert run("sample", "--model", "potts:Q=3") == 2
    assert "unknown model" in capsys.readouterr().err


def test_usage_errors():
    assert run("sample", "--model", "ising:L=2", "--proposal", "hmc") == 2
    assert run("nonsense") == 2
    assert run() == 2


def _small(*extra):
    return run("sample", "--model", "ising:L=2", "--bins", "-10:10:1", "--check-stride", "500", *extra)


def test_identical_seeds_identical_outputs(tmp_path):
    assert _small("--iters", "3", "--seed", "3", "--out", "a.csv", "--sample-stride", "100") == 0
    assert _small("--iters", "3", "--seed", "3", "--out", "b.csv", "--sample-stride", "100") == 0
    for ext in (".csv", ".json", ".reps.json"):
        assert (tmp_path / f"a{ext}").read_bytes() == (tmp_path / f"b{ext}").read_bytes()


def test_resume_finished_is_noop(tmp_path, capsys):
    assert _small("--iters", "2", "--out", "h.csv") == 0
    before = (tmp_path / "h.ck.json").read_bytes()
    assert run("sample", "--resume", "h.ck.json", "--out", "again.csv") == 0
    assert "nothing to do" in capsys.readouterr().err
    assert not (tmp_path / "again.csv").exists()
    assert (tmp_path / "h.ck.json").read_bytes() == before


def test_resume_extends_run_exactly(tmp_path):
    assert _small("--iters", "4", "--seed", "5", "--out", "full.csv") == 0
    assert _small("--iters", "2", "--seed", "5", "--out", "part.csv") == 0
    assert run("sample", "--resume", "part.ck.json", "--iters", "4", "--out", "rest.csv") == 0
    assert (tmp_path / "full.csv").read_bytes() == (tmp_path / "rest.csv").read_bytes()


def test_timeout_flushes_checkpoint(tmp_path):
    code = _small("--iters", "2", "--max-steps", "50", "--out", "t.csv")
    assert code == 3
    doc = json.loads((tmp_path / "t.ck.json").read_text())
    assert doc["step_count"] == 50 and doc["iteration"] == 0


def test_walkers(tmp_path):
    assert _small("--iters", "1", "--walkers", "2", "--seed", "1", "--out", "w.csv") == 0
    a, b = (tmp_path / "w.w0.csv").read_text(), (tmp_path / "w.w1.csv").read_text()
    assert a != b
    assert json.loads((tmp_path / "w.w1.manifest.json").read_text())["seed"] == 2


def test_init_file(tmp_path):
    (tmp_path / "x0.json").write_text("[1, 1, 1, 1]")
    assert _small("--iters", "1", "--init", "x0.json", "--out", "i.csv") == 0
    (tmp_path / "bad.json").write_text("[1, 2]")
    assert _small("--iters", "1", "--init", "bad.json", "--out", "i.csv") == 2


def test_nn_manifest_hash(tmp_path):
    net = nn.tiny_cnn(2, 2, seed=0)
    nn.save(net, tmp_path / "w.json")
    assert run("sample", "--model", "nn:w.json", "--proposal", "gwg", "--bins", "-5:5:0.5",
               "--iters", "1", "--check-stride", "200", "--out", "n.csv") == 0
    manifest = json.loads((tmp_path / "n.manifest.json").read_text())
    assert manifest["weights_sha1"] == git_blob_sha1((tmp_path / "w.json").read_bytes())
    assert manifest["mix"] == 0.1


# -- enumerate / compare ----------------------------------------------------------


def test_enumerate_ising(tmp_path):
    assert run("enumerate", "--model", "ising:L=2", "--bins", "-10:10:1", "--out", "ex.csv") == 0
    h = read_csv((tmp_path / "ex.csv").read_text())
    assert {int(c): int(n) for c, n in zip(h.spec.centers(), h.h) if n} == {-8: 2, 0: 12, 8: 2}


def test_enumerate_budget_and_io(capsys, monkeypatch):
    assert run("enumerate", "--model", "ising:L=6", "--bins", "-80:80:1", "--out", "x.csv") == 4
    assert "68719476736" in capsys.readouterr().err
    monkeypatch.setenv("GWL_ENUM_BUDGET", "4")
    assert run("enumerate", "--model", "ising:L=2", "--bins", "-10:10:1", "--out", "x.csv") == 4
    monkeypatch.delenv("GWL_ENUM_BUDGET")
    assert run("enumerate", "--model", "ising:L=2", "--bins", "-10:10:1", "--out", "no/such/dir/x.csv") == 5


def test_compare(tmp_path, capsys):
    run("enumerate", "--model", "ising:L=2", "--bins", "-10:10:1", "--out", "ex.csv")
    capsys.readouterr()
    assert run("compare", "ex.csv", "ex.csv", "--tolerance", "0") == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["mean_abs"] == 0 and doc["pass"]
    _small("--iters", "2", "--out", "est.csv")
    capsys.readouterr()
    assert run("compare", "ex.csv", "est.csv", "--tolerance", "0") == 1
    out = capsys.readouterr().out
    assert len(out.strip().splitlines()) == 1 and json.loads(out)["mean_abs"] > 0
    run("enumerate", "--model", "ising:L=2", "--bins", "-10:10:2", "--out", "ex2.csv")
    assert run("compare", "ex.csv", "ex2.csv") == 2
    assert run("compare", "ex.csv", "missing.csv") == 5


# -- train -------------------------------------------------------------------------


@pytest.fixture
def idx_files(tmp_path):
    imgs, labs = fixtures.synthetic_idx(120, seed=2)
    (tmp_path / "img.idx").write_bytes(imgs)
    (tmp_path / "lab.idx").write_bytes(labs)
    return "img.idx", "lab.idx"


def test_train_deterministic(tmp_path, idx_files, capsys):
    args = ["train", "--idx-images", idx_files[0], "--idx-labels", idx_files[1], "--side", "4",
            "--epochs", "3", "--seed", "1"]
    assert run(*args, "--out", "a.json") == 0
    first = json.loads(capsys.readouterr().out)
    assert run(*args, "--out", "b.json") == 0
    second = json.loads(capsys.readouterr().out)
    assert first["weights_sha1"] == second["weights_sha1"]
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    assert 0.0 <= first["train_accuracy"] <= 1.0


def test_train_zero_epochs(tmp_path, idx_files, capsys):
    assert run("train", "--idx-images", idx_files[0], "--idx-labels", idx_files[1],
               "--epochs", "0", "--out", "w.json") == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["final_loss"] is None
    assert nn.dumps(nn.load(tmp_path / "w.json")) == nn.dumps(nn.tiny_cnn(4, 4, seed=0))


def test_train_errors(tmp_path, idx_files):
    assert run("train", "--idx-images", idx_files[0], "--idx-labels", "nope.idx", "--out", "w.json") == 2
    (tmp_path / "junk.idx").write_bytes(b"\x00\x00\x08\x02" + bytes(12))
    assert run("train", "--idx-images", "junk.idx", "--idx-labels", idx_files[1], "--out", "w.json") == 2
    assert run("train", "--idx-images", idx_files[1], "--idx-labels", idx_files[0], "--out", "w.json") == 2


# -- plot ----------------------------------------------------------------------------


def test_plot(tmp_path):
    run("enumerate", "--model", "ising:L=2", "--bins", "-10:10:1", "--out", "ex.csv")
    assert run("plot", "--in", "ex.csv", "--out", "p.svg") == 0
    svg = (tmp_path / "p.svg").read_text()
    assert svg.startswith("<?xml") and 'version="1.1"' in svg
    assert svg.count("<polyline") == 1
    points = svg.split('points="')[1].split('"')[0].split()
    assert len(points) == 3
    _small("--iters", "1", "--out", "est.csv")
    assert run("plot", "--in", "ex.csv", "--overlay", "est.csv", "--out", "q.svg") == 0
    assert (tmp_path / "q.svg").read_text().count("<polyline") == 2
    import xml.etree.ElementTree as ET

    ET.fromstring((tmp_path / "q.svg").read_bytes())


def test_plot_errors(tmp_path, capsys):
    (tmp_path / "bad.csv").write_text("bin_lo,s,h,visited\n0,1,1,1\n1,x,1,1\n")
    assert run("plot", "--in", "bad.csv", "--out", "p.svg") == 2
    assert "line 3" in capsys.readouterr().err
    (tmp_path / "empty.csv").write_text("bin_lo,s,h,visited\n0,0,0,0\n1,0,0,0\n")
    assert run("plot", "--in", "empty.csv", "--out", "p.svg") == 1
    assert "nothing to plot" in capsys.readouterr().err


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "gwl", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and "0.1.0" in out.stdout
