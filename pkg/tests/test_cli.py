import csv
import io
import json

import pytest

from annotaudit.cli import main
from annotaudit.corpus import dataset_from_records, write_dataset
from annotaudit.errors import ConfigError, CorpusError, ReportError
from annotaudit.pipeline import RunConfig, build_config, class_breakdown, load_config, parse_config_text
from annotaudit.report import render_report
from annotaudit.synth import SynthSpec, generate_corpus, inject_label_noise

EXPECTED = ["contentious.csv", "pairs.csv", "matrix.csv", "duplicates.csv", "unmatched.csv",
            "breakdown.csv", "tfidf_model.tsv", "run.json", "summary.md", "augmented.csv"]


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    d, _ = inject_label_noise(generate_corpus(SynthSpec(n_docs=200, seed=11)), 0.05, 11)
    path = tmp_path_factory.mktemp("data") / "corpus.csv"
    write_dataset(d, path, "csv")
    return path


@pytest.fixture(scope="module")
def run_dir(corpus, tmp_path_factory):
    out = tmp_path_factory.mktemp("runs") / "r1"
    assert main(["run", "--input", str(corpus), "--format", "csv", "--text-col", "text",
                 "--label-col", "label", "--id-col", "id", "--out", str(out)]) == 0
    return out


def _csv(path):
    with path.open(newline="") as fh:
        return list(csv.DictReader(fh))


def test_run_writes_all_artifacts(run_dir):
    for name in EXPECTED:
        assert (run_dir / name).is_file(), name
    run = json.loads((run_dir / "run.json").read_text())
    assert run["config"]["k_folds"] == 5
    assert [c["kind"] for c in run["config"]["classifiers"]] == [
        "multinomial_nb", "complement_nb", "softmax_lr", "linear_svm", "knn"]
    assert run["majority_threshold"] == 3
    assert {"annotaudit", "python", "numpy", "scipy"} <= set(run["versions"])


def test_run_conservation(run_dir):
    pairs = _csv(run_dir / "pairs.csv")
    cont = _csv(run_dir / "contentious.csv")
    unmatched = _csv(run_dir / "unmatched.csv")
    matrix = list(csv.reader((run_dir / "matrix.csv").open()))
    total = sum(int(x) for row in matrix[1:] for x in row[1:])
    assert total == len(pairs)
    assert len(pairs) + len(unmatched) == len(cont)
    assert len(_csv(run_dir / "augmented.csv")) == 200
    ids = {r["id"] for r in _csv(run_dir / "augmented.csv")}
    assert {p["query_id"] for p in pairs} | {p["neighbor_id"] for p in pairs} <= ids
    breakdown = _csv(run_dir / "breakdown.csv")
    assert sum(int(b["contentious"]) + int(b["non_contentious"]) for b in breakdown) == 200


def test_invalid_input_leaves_no_output(tmp_path, capsys):
    out = tmp_path / "never"
    assert main(["run", "--input", str(tmp_path / "missing.csv"), "--out", str(out)]) == 1
    assert not out.exists()
    assert "[corpus]" in capsys.readouterr().err
    assert [p.name for p in tmp_path.iterdir()] == []


def test_report_md_and_csv(run_dir, capsys):
    assert main(["report", "--run", str(run_dir), "--format", "md"]) == 0
    md = capsys.readouterr().out
    for heading in ("## Dataset", "## Inconsistency matrix", "mismatched pairs", "## Duplicate texts"):
        assert heading in md
    assert main(["report", "--run", str(run_dir), "--format", "csv"]) == 0
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert rows[0] == ["section", "key", "subkey", "value"]
    assert all(len(r) == 4 for r in rows)
    assert {r[0] for r in rows} >= {"dataset", "class_count", "breakdown", "matrix", "stats"}


def test_report_missing_artifacts(tmp_path):
    with pytest.raises(ReportError):
        render_report(tmp_path)
    assert main(["report", "--run", str(tmp_path)]) == 1


def test_report_zero_mismatch(tmp_path):
    rows = [(f"a{i}", f"apple pie {i}", "A") for i in range(10)] + [(f"b{i}", f"blue sky {i}", "B") for i in range(10)]
    path = tmp_path / "c.csv"
    write_dataset(dataset_from_records(rows), path)
    out = tmp_path / "run"
    assert main(["run", "--input", str(path), "--id-col", "id", "--out", str(out)]) == 0
    md = render_report(out)
    assert "No mismatched pairs." in md
    matrix = list(csv.reader((out / "matrix.csv").open()))
    assert all(int(matrix[i][j]) == 0 for i in range(1, 3) for j in range(1, 3) if i != j)


def test_config_file_and_override(tmp_path, corpus):
    cfg_path = tmp_path / "cfg.txt"
    cfg_path.write_text(f"""
# audit settings
input = {corpus}
id_col = id
k_folds = 4
seed = 3
classifiers = multinomial_nb, knn, softmax_lr
knn.k = 3
softmax_lr.epochs = 5
""")
    cfg = load_config(cfg_path, {"seed": 9})
    assert cfg.k_folds == 4 and cfg.seed == 9
    assert [s.kind for s in cfg.classifiers] == ["multinomial_nb", "knn", "softmax_lr"]
    assert cfg.classifiers[1].params["k"] == 3
    assert cfg.classifiers[2].params["epochs"] == 5
    out = tmp_path / "run"
    assert main(["run", "--config", str(cfg_path), "--k-folds", "3", "--out", str(out)]) == 0
    run = json.loads((out / "run.json").read_text())
    assert run["config"]["k_folds"] == 3
    assert run["majority_threshold"] == 2


@pytest.mark.parametrize("text", ["nonsense line", "bogus = 1", "knn.alpha = 2", "k_folds = x", "tfidf_scope = both"])
def test_config_errors(tmp_path, text):
    p = tmp_path / "c.txt"
    p.write_text(text + "\n")
    with pytest.raises(ConfigError):
        load_config(p)


def test_parse_config_text():
    assert parse_config_text("a = b # c\n\n d=e=f") == {"a": "b", "d": "e=f"}


def test_defaults_match_protocol():
    cfg = build_config({})
    assert cfg.k_folds == 5 and len(cfg.classifiers) == 5 and cfg.tfidf_scope == "global"
    assert RunConfig().seed == 42


def test_per_fold_scope_run(tmp_path, corpus):
    out = tmp_path / "pf"
    assert main(["run", "--input", str(corpus), "--id-col", "id", "--tfidf-scope", "per_fold",
                 "--duplicate-mode", "retweet_core", "--out", str(out)]) == 0
    assert json.loads((out / "run.json").read_text())["config"]["tfidf_scope"] == "per_fold"


def test_class_breakdown():
    d = dataset_from_records([("1", "a", "x"), ("2", "b", "x"), ("3", "c", "y")])
    b = class_breakdown(d, [])
    assert all(b.fraction(i) == 0 for i in range(2))
    b = class_breakdown(d, ["1", "2", "3"])
    assert all(b.fraction(i) == 1 for i in range(2))
    b = class_breakdown(d, ["1"])
    assert b.contentious == (1, 0) and b.non_contentious == (1, 1)
    with pytest.raises(CorpusError):
        class_breakdown(d, ["nope"])


def test_synth_command(tmp_path, capsys):
    out = tmp_path / "syn"
    assert main(["synth", "--docs", "300", "--classes", "3", "--noise", "0.1", "--seed", "2", "--out", str(out)]) == 0
    assert "recall" in capsys.readouterr().out
    for name in ("corpus.csv", "noise_log.csv", "summary.md", "pairs.csv"):
        assert (out / name).is_file()
    assert len(_csv(out / "noise_log.csv")) == 30
    run = json.loads((out / "run.json").read_text())
    assert run["detection"]["n_flipped"] == 30
    assert "## Injected-noise detection" in (out / "summary.md").read_text()
