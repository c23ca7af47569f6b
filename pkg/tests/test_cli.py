import csv

import pytest

from lexmdl.cli import main
from lexmdl.lexicon import deserialize

TEXT = "the cat sat. the cat ran. the hat sat. a cat sat on the hat. " * 6


@pytest.fixture
def corpus(tmp_path):
    path = tmp_path / "corpus.txt"
    path.write_text(TEXT)
    return path


def run_train(tmp_path, corpus, tag, *extra):
    out, log = tmp_path / f"{tag}.tsv", tmp_path / f"{tag}_trace.tsv"
    code = main(["train", str(corpus), "--iters", "4", "--out", str(out), "--log", str(log),
                 "--threads", "1", *extra])
    return code, out, log


def test_train_writes_lexicon_and_trace(tmp_path, corpus, capsys):
    code, out, log = run_train(tmp_path, corpus, "a")
    assert code == 0
    lex = deserialize(out)
    assert len(lex.nonterminals()) > 0
    rows = list(csv.reader(log.open(), delimiter="\t"))
    assert rows[0] == ["iteration", "input_bits", "dictionary_bits", "total_bits",
                       "words_added", "words_deleted", "lexicon_size"]
    assert [int(r[0]) for r in rows[1:]] == list(range(len(rows) - 1))
    totals = [float(r[3]) for r in rows[1:]]
    assert totals[-1] < totals[0]
    assert "bits" in capsys.readouterr().out


def test_training_is_reproducible(tmp_path, corpus):
    _, out_a, log_a = run_train(tmp_path, corpus, "a", "--seed", "3")
    _, out_b, log_b = run_train(tmp_path, corpus, "b", "--seed", "3")
    assert out_a.read_bytes() == out_b.read_bytes()
    assert log_a.read_bytes() == log_b.read_bytes()


def test_missing_corpus_is_a_data_error(tmp_path, capsys):
    code = main(["train", str(tmp_path / "missing.txt")])
    assert code == 2
    assert "missing.txt" in capsys.readouterr().err


def test_usage_errors(capsys):
    assert main(["train"]) == 1
    assert main(["frobnicate"]) == 1
    assert main(["train", "x", "--bogus"]) == 1
    assert main([]) == 1
    assert "usage" in capsys.readouterr().err


def test_config_file_is_read_and_flags_win(tmp_path, corpus):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("iters = 1\n")
    out, log = tmp_path / "c.tsv", tmp_path / "c_trace.tsv"
    assert main(["train", str(corpus), "--config", str(cfg), "--out", str(out),
                 "--log", str(log)]) == 0
    assert len(log.read_text().splitlines()) <= 3
    cfg.write_text("iters = nope\n")
    assert main(["train", str(corpus), "--config", str(cfg), "--out", str(out),
                 "--log", str(log)]) == 2


def test_eval_with_gold(tmp_path, corpus, capsys):
    _, out, _ = run_train(tmp_path, corpus, "a")
    gold = tmp_path / "gold.seg"
    gold.write_text("the|cat|sat.\nthe|hat|sat.\n")
    capsys.readouterr()
    assert main(["eval", str(out), str(corpus), "--gold", str(gold)]) == 0
    rows = dict(line.split("\t") for line in capsys.readouterr().out.splitlines())
    assert rows["metric"] == "value"
    assert 0.0 <= float(rows["recall"]) <= 1.0
    assert 0.0 <= float(rows["crossing"]) <= 1.0
    assert rows["region_count"] == "6"
    assert float(rows["bits_per_char"]) > 0


def test_segment_and_inspect(tmp_path, corpus, capsys):
    _, out, _ = run_train(tmp_path, corpus, "a")
    short = tmp_path / "short.txt"
    short.write_text("the cat sat.")
    capsys.readouterr()
    assert main(["segment", str(out), str(short), "--deep"]) == 0
    assert capsys.readouterr().out.strip()
    assert main(["inspect", str(out), "--top", "3"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("rank") and len(lines) <= 4


def test_synth_round_trip(tmp_path, capsys):
    lex = tmp_path / "true.tsv"
    lex.write_text("p aa\t2\nt iy k\t1\n")
    out, gold = tmp_path / "syn.txt", tmp_path / "syn.seg"
    args = ["synth", "--lexicon", str(lex), "--mode", "phoneme", "--n", "20", "--seed", "7",
            "--out", str(out), "--gold-out", str(gold)]
    assert main(args) == 0
    first = out.read_text()
    assert main(args) == 0
    assert out.read_text() == first
    assert len(first.splitlines()) == 20
    assert set(first.split()) <= {"p", "aa", "t", "iy", "k"}
    assert main(args + ["--corrupt"]) == 0
    assert main(["synth", "--lexicon", str(lex), "--mode", "phoneme", "--corrupt",
                 "--config", str(tmp_path / "nope.cfg")]) == 2


def test_channel_score(capsys):
    assert main(["channel-score", "--pi", "d uw ih n", "--phi", "d uw ih ng"]) == 0
    out = dict(line.split("\t") for line in capsys.readouterr().out.splitlines())
    assert float(out["best_log2_p"]) <= float(out["log2_p"]) < 0
    assert out["alignment"].startswith("copy:d")
    assert main(["channel-score", "--pi", "zz", "--phi", "d"]) == 2


def test_phones(capsys):
    assert main(["phones"]) == 0
    assert "ng" in capsys.readouterr().out.split()
