import json

import numpy as np
import pytest

from phasecluster import fileio
from phasecluster.cli import EXIT_PARSE, EXIT_USAGE, OUT_DIR_ENV, main


def band_matrices(seed, k, band=0.6, spread=0.3):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(k):
        G = (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))) / np.sqrt(2)
        out.append(np.exp(1j * rng.uniform(-band, band)) * (np.eye(2) + spread * G))
    return out


@pytest.fixture
def mset(tmp_path):
    f = tmp_path / "agents.mset"
    fileio.write_matrix_set(f, band_matrices(0, 8))
    return f


def run(*argv):
    return main([str(a) for a in argv])


def test_phases_and_boundary(tmp_path, mset):
    out = tmp_path / "ph"
    assert run("phases", mset, "--boundary", 16, "--out-dir", out) == 0
    lines = (out / "phases.csv").read_text().splitlines()
    assert lines[1] == "matrix,class,center,rank,j,phase"
    assert len(lines) == 2 + 8 * 2
    assert len((out / "boundary_0.csv").read_text().splitlines()) == 2 + 16


def test_divergence(tmp_path, mset):
    assert run("divergence", mset, "--members", "0,1", "--out-dir", tmp_path) == 0
    obj = json.loads((tmp_path / "diversity.json").read_text())
    assert obj["members"] == [0, 1] and 0 <= obj["diversity"] < np.pi / 2


def test_graph_then_cluster_from_graph(tmp_path, mset):
    assert run("graph", mset, "--alpha", 0.5, "--out-dir", tmp_path) == 0
    g = tmp_path / "similarity.csv"
    assert run("cluster-exact", mset, "--alpha", 0.5, "--graph", g,
               "--out-dir", tmp_path / "a") == 0
    assert run("cluster-exact", mset, "--alpha", 0.5, "--out-dir", tmp_path / "b") == 0
    a = json.loads((tmp_path / "a" / "partition.json").read_text())
    b = json.loads((tmp_path / "b" / "partition.json").read_text())
    assert a["clusters"] == b["clusters"]


def test_exact_matches_brute_force(tmp_path, mset):
    assert run("cluster-exact", mset, "--alpha", 0.4, "--out-dir", tmp_path / "bnr") == 0
    assert run("cluster-exact", mset, "--alpha", 0.4, "--brute-force",
               "--out-dir", tmp_path / "bf") == 0
    bnr = json.loads((tmp_path / "bnr" / "partition.json").read_text())
    bf = json.loads((tmp_path / "bf" / "partition.json").read_text())
    assert bnr["count"] == bf["count"]
    assert bnr["source"] == "BnR" and bf["source"] == "BruteForce"


def test_hbnb_is_byte_reproducible(tmp_path, mset):
    for d in ("r1", "r2"):
        assert run("cluster-hbnb", mset, "--alpha", 0.5, "--seed", 7, "--out-dir",
                   tmp_path / d) == 0
    for name in ("partition.json", "convergence.csv"):
        assert (tmp_path / "r1" / name).read_bytes() == (tmp_path / "r2" / name).read_bytes()


def test_synth_and_simulate(tmp_path, mset):
    assert run("cluster-exact", mset, "--alpha", 0.5, "--out-dir", tmp_path) == 0
    assert run("synth", mset, tmp_path / "partition.json", "--out-dir", tmp_path) == 0
    clusters, ks = fileio.read_controllers(tmp_path / "controllers.json")
    assert sorted(v for c in clusters for v in c) == list(range(8))
    assert all(K.shape == (2, 2) for K in ks)


def test_pipeline_then_resimulate(tmp_path, capsys):
    out = tmp_path / "pipe"
    assert run("pipeline", "--agents", 10, "--seed", 3, "--record-every", 1000,
               "--out-dir", out) == 0
    for name in ("agents.mset", "partition.json", "controllers.json", "network.json",
                 "convergence.csv", "trace.csv"):
        assert (out / name).exists()
    summary = capsys.readouterr().out
    ratio = float(summary.split("residual ratio ")[1].split()[0])
    assert ratio <= 1e-3
    part = fileio.read_partition(out / "partition.json", fileio.read_matrix_set(out / "agents.mset"))
    assert len(part) < 10
    assert run("simulate", out / "network.json", "--record-every", 1000,
               "--out-dir", tmp_path / "sim") == 0
    lines = (tmp_path / "sim" / "trace.csv").read_text().splitlines()
    e0, e1 = float(lines[2].split(",")[-1]), float(lines[-1].split(",")[-1])
    assert e1 <= 1e-3 * e0


def test_out_dir_from_environment(tmp_path, mset, monkeypatch):
    monkeypatch.setenv(OUT_DIR_ENV, str(tmp_path / "env"))
    assert run("graph", mset, "--alpha", 0.3) == 0
    assert (tmp_path / "env" / "similarity.csv").exists()


def test_parse_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.mset"
    bad.write_text("{not json")
    assert run("phases", bad) == EXIT_PARSE
    assert "bad.mset:1:" in capsys.readouterr().err
    assert run("phases", tmp_path / "missing.mset") == EXIT_PARSE
    mixed = tmp_path / "mixed.mset"
    mixed.write_text(json.dumps({"format": "matrix-set",
                                 "matrices": [{"re": [[1]]}, {"re": [[1, 0], [0, 1]]}]}))
    assert run("graph", mixed, "--alpha", 0.3) == EXIT_PARSE


def test_bad_config_is_a_parse_error(tmp_path, mset):
    cfg = tmp_path / "anneal.cfg"
    cfg.write_text("temperature = 4\n")
    assert run("cluster-hbnb", mset, "--alpha", 0.5, "--config", cfg,
               "--out-dir", tmp_path) == EXIT_PARSE


def test_usage_errors_exit_64(mset):
    with pytest.raises(SystemExit) as exc:
        run("cluster-exact", mset)
    assert exc.value.code == EXIT_USAGE == 64
    with pytest.raises(SystemExit) as exc:
        run("no-such-command")
    assert exc.value.code == 64
