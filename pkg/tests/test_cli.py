"""End-to-end command-line coverage over a small synthetic corpus."""

from __future__ import annotations

import contextlib
import io
import json

import pytest

from versekit.cli import main
from versekit.corpus import write_songs
from versekit.synthetic import make_songs
from versekit.util import read_jsonl


def run(*argv: str) -> tuple[int, str, str]:
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        code = main(list(argv))
    return code, out.getvalue(), err.getvalue()


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    songs = root / "songs.jsonl"
    write_songs(songs, make_songs(80, seed=0))
    dataset = root / "dataset.jsonl"
    code, _, err = run("build-dataset", str(songs), str(dataset),
                       "--split", "0.8,0.1,0.1", "--seed", "1")
    assert code == 0, err
    model = root / "model.json"
    code, _, err = run("train-lm", str(dataset.with_suffix("")) + ".train.jsonl",
                       str(model), "--order", "3")
    assert code == 0, err
    return {"root": root, "songs": songs, "dataset": dataset, "model": model}


class TestBuildDataset:
    def test_counts_table_and_rows(self, workspace):
        code, out, _ = run(
            "build-dataset", str(workspace["songs"]),
            str(workspace["root"] / "again.jsonl"),
        )
        assert code == 0
        assert "language" in out and "total" in out
        rows = list(read_jsonl(workspace["root"] / "again.jsonl"))
        assert rows
        for key in ("song_id", "prompt", "target_lwf", "target_plain", "schema"):
            assert key in rows[0]

    def test_split_writes_three_partitions(self, workspace):
        base = workspace["dataset"]
        parts = [base.parent / f"dataset.{name}.jsonl" for name in ("train", "dev", "test")]
        sizes = [len(list(read_jsonl(p))) for p in parts]
        assert all(sizes)
        assert sum(sizes) == len(list(read_jsonl(base)))

    def test_empty_corpus_is_an_error(self, tmp_path):
        empty = tmp_path / "none.jsonl"
        empty.write_text("")
        code, _, err = run("build-dataset", str(empty), str(tmp_path / "out.jsonl"))
        assert code == 1
        assert err.startswith("error:")


class TestAnnotate:
    def test_reference_schemas(self):
        code, out, _ = run("annotate", "--last-words",
                           "tell,hell,pain,field,rail,veil,tell")
        assert code == 0
        assert out.strip() == "A A B C D D A"
        code, out, _ = run("annotate", "--last-words", "river,dive,ride")
        assert code == 0
        assert out.strip() == "A B B"

    def test_no_words_is_an_error(self):
        code, _, err = run("annotate", "--last-words", "")
        assert code == 1
        assert err.startswith("error:") and "\n" not in err.strip()


class TestTrainLm:
    def test_model_file_shape(self, workspace):
        payload = json.loads(workspace["model"].read_text())
        assert payload["format"] == "versekit-ngram"
        assert payload["order"] == 3
        assert payload["mode"] == "lwf"

    def test_config_supplies_defaults_and_flags_override(self, workspace, tmp_path):
        config = tmp_path / "conf.cfg"
        config.write_text("[ngram]\norder = 2\n")
        out_a = tmp_path / "a.json"
        code, _, _ = run("train-lm", str(workspace["dataset"]), str(out_a),
                         "--config", str(config))
        assert code == 0
        assert json.loads(out_a.read_text())["order"] == 2
        out_b = tmp_path / "b.json"
        code, _, _ = run("train-lm", str(workspace["dataset"]), str(out_b),
                         "--config", str(config), "--order", "4")
        assert code == 0
        assert json.loads(out_b.read_text())["order"] == 4

    def test_missing_dataset_is_an_error(self, tmp_path):
        code, _, err = run("train-lm", str(tmp_path / "nope.jsonl"),
                           str(tmp_path / "m.json"))
        assert code == 1
        assert err.startswith("error:")


class TestGenerate:
    def test_jsonl_row_shape(self, workspace):
        code, out, err = run(
            "generate", str(workspace["model"]),
            "--schema", "A B B", "--title", "The River",
            "--strategy", "sample-rerank", "--k", "5", "--seed", "3",
        )
        assert code == 0, err
        row = json.loads(out.strip())
        assert row["strategy"] == "sample-rerank"
        assert row["spec"]["schema"] == "A B B"
        assert len(row["stanza"]["verses"]) == 3

    def test_pretty_output(self, workspace):
        code, out, _ = run(
            "generate", str(workspace["model"]),
            "--schema", "A A", "--pretty", "--seed", "1",
        )
        assert code == 0
        assert len([l for l in out.splitlines() if l.strip()]) >= 2

    def test_forced_word(self, workspace):
        code, out, _ = run(
            "generate", str(workspace["model"]),
            "--schema", "A B", "--force-word", "0=river", "--seed", "2",
        )
        assert code == 0
        row = json.loads(out.strip())
        assert row["stanza"]["verses"][0]["last_word"] == "river"

    def test_deterministic_outputs(self, workspace, tmp_path):
        args = (
            "generate", str(workspace["model"]),
            "--schema", "A B A B", "--strategy", "beam", "--beam", "3",
        )
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        assert run(*args, "--out", str(a))[0] == 0
        assert run(*args, "--out", str(b))[0] == 0
        assert a.read_bytes() == b.read_bytes()

    def test_batch_specs(self, workspace, tmp_path):
        batch = tmp_path / "specs.jsonl"
        batch.write_text(
            '{"schema": "A A"}\n{"schema": "A B B", "title": "Two"}\n'
        )
        code, out, _ = run(
            "generate", str(workspace["model"]), "--batch", str(batch), "--seed", "5",
        )
        assert code == 0
        rows = [json.loads(line) for line in out.strip().splitlines()]
        assert [len(r["stanza"]["verses"]) for r in rows] == [2, 3]

    def test_plain_model_is_rejected(self, workspace, tmp_path):
        plain = tmp_path / "plain.json"
        code, _, _ = run("train-lm", str(workspace["dataset"]), str(plain),
                         "--mode", "plain")
        assert code == 0
        code, _, err = run("generate", str(plain), "--schema", "A")
        assert code == 1
        assert "lwf" in err

    def test_schema_required_without_batch(self, workspace):
        code, _, err = run("generate", str(workspace["model"]))
        assert code == 1
        assert err.startswith("error:")


@pytest.fixture(scope="module")
def generations(workspace):
    path = workspace["root"] / "gens.jsonl"
    code, _, err = run(
        "generate", str(workspace["model"]),
        "--schema", "A A B B", "--strategy", "sample-rerank",
        "--k", "8", "--seed", "7", "--out", str(path),
    )
    assert code == 0, err
    return path


class TestEvaluate:
    def test_table_output(self, workspace, generations):
        test_split = workspace["root"] / "dataset.test.jsonl"
        code, out, err = run(
            "evaluate", str(generations), str(test_split),
            str(workspace["root"] / "dataset.train.jsonl"),
            "--model", str(workspace["model"]),
            "--copyright-threshold", "12",
        )
        assert code == 0, err
        assert "RP" in out and "PPL" in out

    def test_json_report(self, workspace, generations, tmp_path):
        report_path = tmp_path / "report.json"
        code, out, _ = run(
            "evaluate", str(generations),
            str(workspace["root"] / "dataset.test.jsonl"),
            str(workspace["root"] / "dataset.train.jsonl"),
            "--json", "--report-out", str(report_path),
        )
        assert code == 0
        payload = json.loads(out)
        assert "rhyme_precision" in payload["report"]
        assert payload["items"]
        assert json.loads(report_path.read_text()) == payload

    def test_missing_generation_file(self, workspace, tmp_path):
        code, _, err = run(
            "evaluate", str(tmp_path / "missing.jsonl"),
            str(workspace["root"] / "dataset.test.jsonl"),
            str(workspace["root"] / "dataset.train.jsonl"),
        )
        assert code == 1
        assert err.startswith("error:")


class TestParser:
    def test_unknown_subcommand_is_a_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            run("frobnicate")
        assert exc.value.code == 2

    def test_no_subcommand_is_a_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            run()
        assert exc.value.code == 2
