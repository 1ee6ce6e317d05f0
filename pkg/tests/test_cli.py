import json

import pytest

from codecurate.cli import build_parser, main
from codecurate.corpus import write_dataset

from conftest import SHIM_PATH, make_dataset, make_sample
from codecurate.corpus import Dataset


def write_fixture(tmp_path, name, texts):
    path = tmp_path / f"{name}.jsonl"
    write_dataset(make_dataset(texts, name=name), path)
    return path


SUBCOMMANDS = [
    ["ingest", "--help"],
    ["pool", "--help"],
    ["score", "--help"],
    ["select", "--help"],
    ["decontam", "--help"],
    ["decontam", "tli", "--help"],
    ["decontam", "clean", "--help"],
    ["bon", "--help"],
    ["report", "--help"],
]


@pytest.mark.parametrize("argv", SUBCOMMANDS)
def test_help_exits_zero(argv):
    assert main(argv) == 0


def test_unknown_flag_is_usage_error(capsys):
    assert main(["ingest", "--nonsense"]) == 1
    assert "usage" in capsys.readouterr().err.lower()


def test_ingest_round_trip(tmp_path, capsys):
    raw = tmp_path / "raw.jsonl"
    raw.write_text(json.dumps({"instruction": "write add", "output": "def add(): pass"}) + "\n")
    out = tmp_path / "canonical.jsonl"
    rc = main(["ingest", "--input", str(raw), "--schema", "instruction-response",
               "--out", str(out)])
    assert rc == 0
    assert out.exists()
    report = json.loads((tmp_path / "canonical.jsonl.report.json").read_text())
    assert report["loaded"] == 1
    assert "tool_version" in report


def test_decontam_tli_matches_module(tmp_path):
    train = write_fixture(tmp_path, "train", ["aa bb cc dd", "t0a t0b t0c t0d t0e"])
    test = tmp_path / "test.jsonl"
    write_dataset(make_dataset([f"t{i}a t{i}b t{i}c t{i}d t{i}e" for i in range(4)],
                               name="test"), test)
    out = tmp_path / "report.json"
    rc = main(["decontam", "tli", "--train", str(train), "--test", str(test),
               "--n", "3", "--basis", "instruction", "--out", str(out)])
    assert rc == 0
    report = json.loads(out.read_text())
    assert report["tli"] == pytest.approx(0.25, abs=1e-12)
    assert report["n"] == 3
    assert report["config"]["n"] == 3


def test_decontam_clean(tmp_path):
    train = write_fixture(tmp_path, "train", ["keep me text", "t1a t1b t1c t1d"])
    test = write_fixture(tmp_path, "test", ["t1a t1b t1c t1d"])
    out = tmp_path / "cleaned.jsonl"
    report_path = tmp_path / "clean-report.json"
    rc = main(["decontam", "clean", "--train", str(train), "--test", str(test),
               "--n", "2", "--target-tli", "0.05",
               "--out", str(out), "--report", str(report_path)])
    assert rc == 0
    report = json.loads(report_path.read_text())
    assert report["tli"] <= 0.05
    assert report["removed_ids"] == ["train:1"]


def test_select_echoes_config_into_manifest(tmp_path):
    pool = write_fixture(tmp_path, "pool",
                         [f"question number {i} subject {i % 3}" for i in range(12)])
    out_dir = tmp_path / "sel"
    rc = main(["select", "--input", str(pool), "--q", "4", "--tau", "0.945",
               "--alpha", "0.5", "--out-dir", str(out_dir),
               "--embedding-backend", "hashed-bag-of-words",
               "--testgen-endpoint", "http://unused.invalid",
               "--shim", str(SHIM_PATH)])
    # testgen endpoint is unreachable -> every sample untestable (q=0) but run completes
    assert rc == 0
    manifest = json.loads((out_dir / "manifest.json").read_text())
    assert manifest["config"]["q_budget"] == 4
    assert manifest["config"]["tau"] == 0.945
    assert manifest["config"]["alpha"] == 0.5


def test_report_composition(tmp_path):
    ds = Dataset(name="mix", samples=[make_sample("a1", "q1", source="alpha"),
                                      make_sample("b1", "q2", source="beta")])
    path = tmp_path / "mix.jsonl"
    write_dataset(ds, path)
    out = tmp_path / "comp.json"
    # source is re-derived from file stem on load; both samples land under "mix"
    rc = main(["report", "--input", str(path), "--criterion", "selected",
               "--out", str(out), "--csv", str(tmp_path / "comp.csv")])
    assert rc == 0
    data = json.loads(out.read_text())
    assert sum(data["counts"].values()) == 2


def test_pipeline_error_exit_code(tmp_path):
    rc = main(["decontam", "tli", "--train", str(tmp_path / "missing.jsonl"),
               "--test", str(tmp_path / "missing2.jsonl"), "--out", str(tmp_path / "r.json")])
    assert rc == 2


def test_version_flag(capsys):
    assert main(["--version"]) == 0
