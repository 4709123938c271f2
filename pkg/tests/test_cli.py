import numpy as np
import pytest

from bilstm_crf import cli, nn_core, selfcheck, synthetic
from bilstm_crf.corpus import parse_bio, read_bio, validate_bio, write_bio
from bilstm_crf.metrics import parse_kv, parse_report_table

SMALL = ["--embed-dim", "12", "--hidden-dim", "6"]


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("corpus")
    tr, dev, test = synthetic.generate_splits(20, 6, 6, seed=3)
    for name, sents in [("train", tr), ("dev", dev), ("test", test)]:
        write_bio(d / f"{name}.bio", sents)
    return d


@pytest.fixture(scope="module")
def model_path(corpus_dir):
    path = corpus_dir / "model.json"
    rc = cli.main(["train", "--train", str(corpus_dir / "train.bio"), "--dev", str(corpus_dir / "dev.bio"),
                   "--model-out", str(path), "--epochs", "3", "--history-out",
                   str(corpus_dir / "hist.tsv")] + SMALL)
    assert rc == 0
    return path


def test_train_outputs(model_path, corpus_dir):
    assert model_path.exists()
    assert (corpus_dir / "model.json.best").exists()
    lines = (corpus_dir / "hist.tsv").read_text().splitlines()
    assert lines[0] == "epoch\tloss\tlr\tdev_f1" and len(lines) == 4


def test_train_defaults_match_config():
    args = cli.build_parser().parse_args(["train", "--train", "a", "--model-out", "b"])
    assert (args.embed_dim, args.max_len, args.epochs, args.batch_size, args.dropout) == (200, 300, 300, 16, 0.5)
    assert args.optimizer == "adam" and args.lr is None


def test_eval_report(model_path, corpus_dir, capsys, tmp_path):
    kv = tmp_path / "r.txt"
    rc = cli.main(["eval", "--model", str(model_path), "--test", str(corpus_dir / "test.bio"),
                   "--report-out", str(kv)])
    assert rc == 0
    table = parse_report_table(capsys.readouterr().out)
    assert list(table) == ["overall", "PER", "LOC", "ORG", "NUM", "CRI"]
    assert float(parse_kv(kv.read_text())["overall.f1"]) == pytest.approx(table["overall"][2], abs=5e-4)


def test_eval_on_own_predictions_is_perfect(model_path, corpus_dir, tmp_path, capsys):
    tagged = tmp_path / "self.bio"
    assert cli.main(["tag", "--model", str(model_path), "--input", str(corpus_dir / "test.bio"),
                     "--output", str(tagged)]) == 0
    assert cli.main(["eval", "--model", str(model_path), "--test", str(tagged)]) == 0
    out = capsys.readouterr().out
    assert parse_report_table(out)["overall"] in [(1.0, 1.0, 1.0), (0.0, 0.0, 0.0)]
    first = out
    cli.main(["eval", "--model", str(model_path), "--test", str(tagged)])
    assert capsys.readouterr().out == first


def test_eval_label_mismatch(model_path, tmp_path):
    bad = tmp_path / "bad.bio"
    bad.write_text("a\tB-MISC\n", encoding="utf-8")
    assert cli.main(["eval", "--model", str(model_path), "--test", str(bad)]) == cli.EXIT_DATA


def test_tag_raw_text(model_path, tmp_path, caplog):
    raw = tmp_path / "raw.txt"
    raw.write_text("abAB cd\n\nxyGH12\n", encoding="utf-8")
    out = tmp_path / "out.bio"
    assert cli.main(["tag", "--model", str(model_path), "--input", str(raw), "--output", str(out)]) == 0
    sents = parse_bio(out.read_text(encoding="utf-8"))
    assert ["".join(s.chars) for s in sents] == ["abABcd", "xyGH12"]
    assert "empty line skipped" in caplog.text


def test_tag_empty_input(model_path, tmp_path):
    empty = tmp_path / "empty.txt"
    empty.write_text("", encoding="utf-8")
    out = tmp_path / "out.bio"
    assert cli.main(["tag", "--model", str(model_path), "--input", str(empty), "--output", str(out)]) == 0
    assert out.read_text() == ""


def test_tag_column_input_with_constraints(model_path, tmp_path):
    col = tmp_path / "col.txt"
    col.write_text("a\nB\nC\n\nI\nJ\nk\n", encoding="utf-8")
    out = tmp_path / "out.bio"
    assert cli.main(["tag", "--model", str(model_path), "--input", str(col), "--output", str(out),
                     "--hard-bio-constraints"]) == 0
    sents = read_bio(out)
    assert ["".join(s.chars) for s in sents] == ["aBC", "IJk"]
    assert all(validate_bio(s.labels) == [] for s in sents)


def test_usage_and_data_errors(tmp_path):
    with pytest.raises(SystemExit) as exc:
        cli.main(["train"])
    assert exc.value.code == cli.EXIT_USAGE
    with pytest.raises(SystemExit) as exc:
        cli.main(["bogus"])
    assert exc.value.code == cli.EXIT_USAGE
    assert cli.main(["train", "--train", str(tmp_path / "missing"), "--model-out", "x"]) == cli.EXIT_DATA
    bad = tmp_path / "bad.bio"
    bad.write_text("ab O\n", encoding="utf-8")
    assert cli.main(["train", "--train", str(bad), "--model-out", "x"]) == cli.EXIT_DATA
    assert cli.main(["train", "--train", str(bad), "--model-out", "x", "--dropout", "1.5"]) == cli.EXIT_USAGE


def test_check_passes(capsys):
    assert cli.main(["check", "--crf-instances", "100"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert [l.split()[:2] for l in out] == [["PASS", "crf-oracle:"], ["PASS", "gradients:"],
                                            ["PASS", "optimizers:"]]


def test_check_detects_corrupted_backward(monkeypatch, capsys):
    original = nn_core.lstm_cell_backward

    def corrupted(dh, dc_next, cache):
        dz, dc_prev = original(dh, dc_next, cache)
        return dz, 0.9 * dc_prev  # drop part of the cell-state carry

    monkeypatch.setattr(nn_core, "lstm_cell_backward", corrupted)
    result = selfcheck.check_gradients()
    assert not result.passed and "fwd.W_f" in result.detail
    assert cli.main(["check", "--crf-instances", "10"]) == cli.EXIT_NUMERIC
    assert "FAIL  gradients" in capsys.readouterr().out


def test_check_detects_corrupted_crf(monkeypatch):
    from bilstm_crf import crf
    original = crf.logsumexp
    monkeypatch.setattr(crf, "logsumexp", lambda x, axis: np.max(x, axis=axis) if x.ndim == 3 else original(x, axis))
    assert not selfcheck.check_crf_oracle(50).passed
