import json

import refparse as rp
from refparse.cli import run
from refparse.crf import save_model

from conftest import FIGURE1_TEXT


def test_version_exits_zero(capsys):
    assert run(["--version"]) == 0
    out = capsys.readouterr().out
    assert "refparse 0.1.0" in out
    assert "refparse-model-v1" in out


def test_unknown_subcommand_is_usage_error(capsys):
    assert run(["frobnicate"]) == 1
    err = capsys.readouterr().err
    assert "No such command" in err


def test_help_exits_zero():
    assert run(["--help"]) == 0
    assert run(["train", "--help"]) == 0


def test_records_generate_split_sample_filter(tmp_path, capsys):
    records = tmp_path / "r.jsonl"
    corpus = tmp_path / "c.xml"
    assert run(["records", "--n", "40", "--seed", "1", "--out", str(records)]) == 0
    assert (
        run(
            [
                "generate", "--records", str(records), "--styles", "builtin:A",
                "--n", "60", "--seed", "2", "--out", str(corpus),
            ]
        )
        == 0
    )
    got = rp.read_inline_xml(corpus)
    assert len(got) == 60

    train_p, eval_p = tmp_path / "tr.xml", tmp_path / "ev.xml"
    assert (
        run(
            [
                "split", str(corpus), "--ratio", "0.7", "--seed", "7",
                "--train-out", str(train_p), "--eval-out", str(eval_p),
            ]
        )
        == 0
    )
    assert len(rp.read_inline_xml(train_p)) == 42
    assert len(rp.read_inline_xml(eval_p)) == 18

    sampled = tmp_path / "s.xml"
    assert run(["sample", str(corpus), str(sampled), "--n", "10", "--seed", "3"]) == 0
    assert len(rp.read_inline_xml(sampled)) == 10

    filtered = tmp_path / "f.xml"
    assert run(["filter", str(corpus), str(filtered), "--keep", "author,title,date"]) == 0
    assert rp.read_inline_xml(filtered).labels == ("author", "title", "date")


def test_generate_per_author_mode(tmp_path):
    records = tmp_path / "r.jsonl"
    corpus = tmp_path / "c.xml"
    assert run(["records", "--n", "20", "--seed", "8", "--out", str(records)]) == 0
    assert (
        run(
            [
                "generate", "--records", str(records), "--styles", "builtin:B",
                "--n", "30", "--seed", "9", "--per-author", "--out", str(corpus),
            ]
        )
        == 0
    )
    got = rp.read_inline_xml(corpus)
    author_seg_counts = [
        sum(
            1
            for s in rp.segments_from_tags(i.tags, i.tokens)
            if s.field == "author"
        )
        for i in got.instances
    ]
    assert max(author_seg_counts) > 1  # multi-author records yield one span each


def test_split_reproduces_paper_counts(tmp_path):
    corpus = tmp_path / "big.xml"
    line = "<author>A. B</author>, <title>T</title>."
    corpus.write_text("\n".join([line] * 7800) + "\n", encoding="utf-8")
    train_p, eval_p = tmp_path / "tr.xml", tmp_path / "ev.xml"
    assert (
        run(
            [
                "split", str(corpus), "--ratio", "0.7", "--seed", "7",
                "--train-out", str(train_p), "--eval-out", str(eval_p),
            ]
        )
        == 0
    )
    # minus one #labels header line each
    assert len(train_p.read_text().splitlines()) - 1 == 5460
    assert len(eval_p.read_text().splitlines()) - 1 == 2340


def test_convert_round_trip(tmp_path):
    src = tmp_path / "c.xml"
    src.write_text("<author>A. B</author>, <title>T</title>.\n", encoding="utf-8")
    conll = tmp_path / "c.conll"
    back = tmp_path / "back.xml"
    assert run(["convert", str(src), str(conll)]) == 0
    assert run(["convert", str(conll), str(back)]) == 0
    assert "B-author" in conll.read_text()


def test_malformed_corpus_is_data_error(tmp_path, capsys):
    bad = tmp_path / "bad.xml"
    bad.write_text("<title>a <note>nested</note></title>\n", encoding="utf-8")
    assert run(["convert", str(bad), str(tmp_path / "out.conll")]) == 2
    assert "data error" in capsys.readouterr().err


def test_bad_ratio_is_usage_error(tmp_path, capsys):
    src = tmp_path / "c.xml"
    src.write_text("<author>A</author>\n", encoding="utf-8")
    code = run(
        [
            "split", str(src), "--ratio", "1.5", "--seed", "1",
            "--train-out", str(tmp_path / "a"), "--eval-out", str(tmp_path / "b"),
        ]
    )
    assert code == 1
    assert "usage error" in capsys.readouterr().err


def test_parse_figure_string_end_to_end(tmp_path, small_model_and_eval, capsys):
    model, _ = small_model_and_eval
    model_path = tmp_path / "model.gz"
    save_model(model, model_path)
    refs = tmp_path / "refs.txt"
    refs.write_text(FIGURE1_TEXT + "\n", encoding="utf-8")
    out = tmp_path / "parsed.xml"
    assert (
        run(["parse", "--model", str(model_path), "--in", str(refs), "--out", str(out)])
        == 0
    )
    text = out.read_text(encoding="utf-8")
    for tag in ("author", "title", "journal", "volume", "issue", "pages", "date"):
        assert f"<{tag}>" in text, f"missing <{tag}> in {text}"
    assert "<date>2015</date>" in text
    assert "Metalearning" in text

    # conll output shape
    assert (
        run(
            [
                "parse", "--model", str(model_path), "--in", str(refs),
                "--format", "conll",
            ]
        )
        == 0
    )
    lines = capsys.readouterr().out.splitlines()
    assert any("\tB-author" in line for line in lines)


def test_eval_writes_csv_and_table(tmp_path, small_model_and_eval, capsys):
    model, eval_c = small_model_and_eval
    model_path = tmp_path / "model.gz"
    save_model(model, model_path)
    gold_path = tmp_path / "gold.xml"
    rp.write_inline_xml(eval_c, gold_path)
    csv_path = tmp_path / "report.csv"
    assert (
        run(
            [
                "eval", "--model", str(model_path), "--gold", str(gold_path),
                "--out", str(csv_path),
            ]
        )
        == 0
    )
    out = capsys.readouterr().out
    assert "micro-avg" in out and "macro-avg" in out
    assert csv_path.exists()


def test_train_subcommand_small(tmp_path):
    records = tmp_path / "r.jsonl"
    corpus = tmp_path / "c.xml"
    model_path = tmp_path / "m.gz"
    assert run(["records", "--n", "30", "--seed", "4", "--out", str(records)]) == 0
    assert (
        run(
            [
                "generate", "--records", str(records), "--styles", "builtin:B",
                "--n", "60", "--seed", "5", "--out", str(corpus),
            ]
        )
        == 0
    )
    assert (
        run(
            [
                "train", str(corpus), "--model", str(model_path),
                "--max-epochs", "25", "--tol", "1e-3",
            ]
        )
        == 0
    )
    model = rp.load_model(model_path)
    decoded = rp.decode(model, rp.read_inline_xml(corpus).instances[0].raw)
    assert len(decoded.tags) == len(decoded.tokens)


def test_matrix_subcommand(tmp_path):
    records = tmp_path / "r.jsonl"
    assert run(["records", "--n", "30", "--seed", "6", "--out", str(records)]) == 0
    paths = {}
    for name, fam, seed in (("tr", "A", 1), ("ev", "A", 2)):
        p = tmp_path / f"{name}.xml"
        assert (
            run(
                [
                    "generate", "--records", str(records), "--styles", f"builtin:{fam}",
                    "--n", "40", "--seed", str(seed), "--out", str(p),
                ]
            )
            == 0
        )
        paths[name] = str(p)
    plan = {
        "trains": {"t": paths["tr"]},
        "evals": {"e": paths["ev"]},
        "sizes": [],
        "keep_labels": [],
        "seed": 0,
        "out_dir": str(tmp_path / "out"),
    }
    plan_path = tmp_path / "plan.json"
    plan_path.write_text(json.dumps(plan), encoding="utf-8")
    assert run(["matrix", str(plan_path), "--max-epochs", "20", "--tol", "1e-3"]) == 0
    assert (tmp_path / "out" / "matrix.csv").exists()


def test_tokenize_subcommand(tmp_path, capsys):
    src = tmp_path / "in.txt"
    src.write_text("vol. 44, no. 1\n", encoding="utf-8")
    assert run(["tokenize", "--in", str(src)]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0] == "vol\t0\t3"
