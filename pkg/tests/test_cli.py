import csv
import json

import pytest

from semot import io
from semot.cli import main


@pytest.fixture(scope="module")
def gen_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    spec = out / "spec.json"
    spec.write_text(json.dumps({"features_per_layer": 8, "tokens_per_feature": 16, "seed": 2,
                                "planted_supernodes": [["0:0", "0:1"], ["1:2", "1:3"]]}))
    assert main(["gen", "--spec", str(spec), "--out", str(out)]) == 0
    return out


def test_gen_outputs(gen_dir):
    for name in ("manifest.json", "layer0.bin", "layer1.bin", "events.ndjson", "truth.json", "nodes.json"):
        assert (gen_dir / name).exists()
    assert len(json.loads((gen_dir / "truth.json").read_text())["pairs"]) == 8


def test_match_recovers_planted_pairs(gen_dir, tmp_path):
    out = tmp_path / "m.json"
    rc = main(["match", "--manifest", str(gen_dir / "manifest.json"), "--target-layer", "0",
               "--source-layer", "1", "--epsilon", "0.01", "--out", str(out), "--threads", "2"])
    assert rc == 0
    truth = dict(tuple(p) for p in json.loads((gen_dir / "truth.json").read_text())["pairs"])
    got = {str(r.target): str(r.matched) for r in io.read_matches(out)}
    assert got == truth


def test_dist_independent_of_threads(gen_dir, tmp_path):
    args = ["dist", "--manifest", str(gen_dir / "manifest.json"), "--nodes", str(gen_dir / "nodes.json")]
    assert main(args + ["--out", str(tmp_path / "a.csv"), "--threads", "1"]) == 0
    assert main(args + ["--out", str(tmp_path / "b.csv"), "--threads", "4"]) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_compress_and_modular(gen_dir, tmp_path):
    man, nodes = str(gen_dir / "manifest.json"), str(gen_dir / "nodes.json")
    assert main(["dist", "--manifest", man, "--nodes", nodes, "--out", str(tmp_path / "d.csv")]) == 0
    parts = []
    for m in (2, 3):
        p = tmp_path / f"p{m}.json"
        assert main(["compress", "--manifest", man, "--nodes", nodes, "--m", str(m),
                     "--distances", str(tmp_path / "d.csv"), "--out", str(p)]) == 0
        part = io.read_partition(p)
        assert len(part.groups) == m
        parts.append(str(p))
    assert main(["modular", "--partitions", *parts, "--groups", "2", "--out", str(tmp_path / "g.json")]) == 0
    assert len(io.read_groups(tmp_path / "g.json")) == 2


def test_compress_without_cached_distances(gen_dir, tmp_path):
    assert main(["compress", "--manifest", str(gen_dir / "manifest.json"), "--nodes", str(gen_dir / "nodes.json"),
                 "--m", "2", "--solver", "exact", "--out", str(tmp_path / "p.json")]) == 0


@pytest.mark.parametrize("kind", ["match-l2", "featflow", "naive"])
def test_baselines(gen_dir, tmp_path, kind):
    out = tmp_path / "b.csv"
    assert main(["baseline", "--kind", kind, "--manifest", str(gen_dir / "manifest.json"),
                 "--target-layer", "0", "--source-layer", "1", "--out", str(out)]) == 0
    r = io.read_rect_csv(out)
    assert len(r.rows) == len(r.cols) == 8


def test_verify_voronoi(tmp_path, capsys):
    rc = main(["verify", "--suite", "voronoi", "--trials", "20", "--out", str(tmp_path)])
    assert rc == 0 and "PASS" in capsys.readouterr().out
    with open(tmp_path / "voronoi_summary.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [int(r["T"]) for r in rows][-1] == 10000
    assert float(rows[-1]["recovery_rate"]) == 1.0


@pytest.mark.parametrize("suite", ["invariance", "stability", "constants", "recovery"])
def test_verify_suites(tmp_path, suite):
    assert main(["verify", "--suite", suite, "--trials", "10", "--out", str(tmp_path)]) == 0
    assert (tmp_path / f"{suite}_summary.json").exists()


def test_usage_error_exits_2():
    with pytest.raises(SystemExit) as exc:
        main(["verify", "--suite", "nope", "--out", "x"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["match", "--manifest", "m", "--target-layer", "0", "--source-layer", "1", "--eps", "-1", "--out", "x"])
    assert exc.value.code == 2


def test_data_errors_exit_1(tmp_path, gen_dir):
    assert main(["dist", "--manifest", str(tmp_path / "missing.json"), "--nodes", "n", "--out", "o"]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text('{"version": "other"}')
    assert main(["dist", "--manifest", str(bad), "--nodes", str(gen_dir / "nodes.json"), "--out", "o"]) == 1
    assert main(["compress", "--manifest", str(gen_dir / "manifest.json"), "--nodes", str(gen_dir / "nodes.json"),
                 "--m", "999", "--out", str(tmp_path / "p.json")]) == 1
