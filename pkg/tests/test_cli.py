"""Command-line workflow: corpus ingest, dictionary+topic training,
metric evaluation, polar-coordinate export, schedule scans, vector
rebuilds, the nightly job, and per-user score listings — run end to end
on a themed synthetic corpus against a sqlite store."""

import json
import math
import re
from datetime import date, datetime, timezone

import numpy as np
import pytest
from click.testing import CliRunner

import helpers
from arxrank.api import DEFAULT_CATEGORIES, make_account
from arxrank.cli import _load_model_map, main
from arxrank.lda import ModelLoadError, load_model
from arxrank.ranking import ClickEvent
from arxrank.store import open_store

DAY1 = date(2026, 8, 10)
DAY2 = date(2026, 8, 11)


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """Run the whole CLI workflow once; tests assert on the pieces."""
    root = tmp_path_factory.mktemp("cli")
    runner = CliRunner()
    rng = np.random.default_rng(2026)
    release = helpers.themed_release(DAY1, 60, rng, prefix="c")
    corpus_path = root / "corpus.jsonl"
    helpers.write_jsonl(corpus_path, release)

    paths = {
        "root": root,
        "corpus": corpus_path,
        "model": root / "model",
        "pizza": root / "pizza.csv",
        "scan": root / "scan.csv",
        "db": root / "store.db",
        "source": root / "source",
    }
    results = {}

    def run(name, args):
        res = runner.invoke(main, args, catch_exceptions=False)
        assert res.exit_code == 0, f"{name}: {res.output}"
        results[name] = res
        return res

    run(
        "train",
        [
            "train",
            "--corpus", str(corpus_path),
            "--topics", "4",
            "--passes", "12",
            "--iters", "50",
            "--batch-size", "32",
            "--seed", "5",
            "--min-docs", "5",
            "--out", str(paths["model"]),
        ],
    )
    run(
        "eval_perplexity",
        [
            "eval",
            "--model", str(paths["model"]),
            "--heldout", str(corpus_path),
            "--metric", "perplexity",
        ],
    )
    run(
        "eval_coherence",
        [
            "eval",
            "--model", str(paths["model"]),
            "--heldout", str(corpus_path),
            "--metric", "coherence",
            "--topn", "6",
        ],
    )
    run(
        "pizza",
        [
            "pizza",
            "--model", str(paths["model"]),
            "--corpus", str(corpus_path),
            "--seed", "9",
            "--out", str(paths["pizza"]),
        ],
    )
    run(
        "scan",
        [
            "scan",
            "--corpus", str(corpus_path),
            "--topics", "2,4",
            "--passes", "3",
            "--iters", "30",
            "--seed", "3",
            "--out", str(paths["scan"]),
        ],
    )
    run(
        "ingest",
        ["ingest", "--input", str(corpus_path), "--store", str(paths["db"])],
    )
    run(
        "reingest",
        ["ingest", "--input", str(corpus_path), "--store", str(paths["db"])],
    )

    # one account with two hep-ph clicks, added before vectors exist
    clicked = [r.id for r in release if r.categories == ("hep-ph",)][:2]
    with open_store(paths["db"]) as store:
        store.put_user(make_account("alice", "pw1", DEFAULT_CATEGORIES))
        for i, pid in enumerate(clicked):
            store.append_event(
                ClickEvent(
                    user_id="alice",
                    paper_id=pid,
                    kind="pdf_open",
                    timestamp=datetime(2026, 8, 10, 10, i, tzinfo=timezone.utc),
                )
            )

    run(
        "rebuild",
        [
            "rebuild-users",
            "--store", str(paths["db"]),
            "--model-dir", str(paths["model"]),
        ],
    )
    run(
        "score",
        [
            "score",
            "--store", str(paths["db"]),
            "--user", "alice",
            "--date", DAY1.isoformat(),
            "--limit", "5",
        ],
    )

    paths["source"].mkdir()
    helpers.write_jsonl(
        paths["source"] / f"{DAY2.isoformat()}.jsonl",
        helpers.themed_release(DAY2, 2, rng, prefix="n"),
    )
    nightly_args = [
        "nightly",
        "--store", str(paths["db"]),
        "--source", str(paths["source"]),
        "--date", DAY2.isoformat(),
    ]
    run("nightly", nightly_args)
    run("nightly_rerun", nightly_args)

    return paths, results


class TestTrain:
    def test_reports_corpus_and_vocabulary_size(self, pipeline):
        _, results = pipeline
        first = results["train"].output.splitlines()[0]
        m = re.fullmatch(r"trained K=4 on 240 documents, V=(\d+); saved to .*", first)
        assert m, first
        assert int(m.group(1)) >= 40  # 48 themed stems, minus any rare ones

    def test_prints_top_words_per_topic(self, pipeline):
        _, results = pipeline
        lines = results["train"].output.splitlines()
        topic_lines = [l for l in lines if l.startswith("topic ")]
        assert len(topic_lines) == 4
        for line in topic_lines:
            words = line.split(": ", 1)[1].split(", ")
            assert len(words) == 8

    def test_topics_recover_the_themes(self, pipeline):
        _, results = pipeline
        topic_lines = [
            l for l in results["train"].output.splitlines() if l.startswith("topic ")
        ]
        # each topic's top words should come from a single theme's stems
        theme_stems = {
            theme: {w[:4] for w in words} for theme, words in helpers.THEME_WORDS.items()
        }
        matched_themes = set()
        for line in topic_lines:
            words = line.split(": ", 1)[1].split(", ")
            for theme, stems in theme_stems.items():
                if sum(any(w.startswith(s) for s in stems) for w in words) >= 6:
                    matched_themes.add(theme)
        assert matched_themes == set(helpers.THEMES)

    def test_saved_container_loads(self, pipeline):
        paths, _ = pipeline
        model = load_model(paths["model"])
        assert model.K == 4
        assert model.dictionary is not None


class TestEval:
    def test_perplexity_lines_parse_and_agree(self, pipeline):
        _, results = pipeline
        out = results["eval_perplexity"].output
        log_p = float(re.search(r"log_perplexity (\S+)", out).group(1))
        p = float(re.search(r"\nperplexity (\S+)", out).group(1))
        # the first line is the per-word predictive log-likelihood bound
        assert p == pytest.approx(math.exp(-log_p), rel=1e-12)
        assert 1.0 <= p <= 48.0  # no worse than uniform over the vocabulary

    def test_coherence_reports_each_topic_and_the_mean(self, pipeline):
        _, results = pipeline
        out = results["eval_coherence"].output
        topic_values = [
            float(m.group(1)) for m in re.finditer(r"topic \d+: (\S+)", out)
        ]
        assert len(topic_values) == 4
        mean = float(re.search(r"mean (\S+)", out).group(1))
        assert mean == pytest.approx(sum(topic_values) / 4, rel=1e-12)
        assert mean <= 0.0  # log of co-occurrence ratios


class TestPizza:
    def test_writes_one_point_per_document(self, pipeline):
        paths, results = pipeline
        assert f"wrote 240 points to {paths['pizza']}" in results["pizza"].output
        lines = paths["pizza"].read_text("utf-8").splitlines()
        assert lines[0] == "doc_id,main_topic,radius,angle"
        assert len(lines) == 241
        for line in lines[1:]:
            doc_id, main_topic, radius, angle = line.split(",")
            assert doc_id.startswith("c-2026-08-10-")
            assert 0 <= int(main_topic) < 4
            assert 0.0 <= float(radius) < 1.0
            assert 0.0 <= float(angle) <= 2 * math.pi


class TestScan:
    def test_grid_rows_sorted_by_topic_count(self, pipeline):
        paths, results = pipeline
        assert f"wrote 2 rows to {paths['scan']}" in results["scan"].output
        lines = paths["scan"].read_text("utf-8").splitlines()
        assert lines[0] == "K,passes,iters,coherence,log_perplexity"
        rows = [line.split(",") for line in lines[1:]]
        assert [(r[0], r[1], r[2]) for r in rows] == [("2", "3", "30"), ("4", "3", "30")]
        # four clean themes: the four-topic model has the higher per-word
        # predictive log-likelihood on the held-out slice
        assert float(rows[1][4]) > float(rows[0][4])

    def test_iters_list_must_match_passes(self, tmp_path):
        corpus = tmp_path / "c.jsonl"
        helpers.write_jsonl(corpus, [helpers.make_paper("p")])
        res = CliRunner().invoke(
            main,
            [
                "scan",
                "--corpus", str(corpus),
                "--topics", "2",
                "--passes", "3,5",
                "--iters", "10,20,30",
                "--out", str(tmp_path / "s.csv"),
            ],
        )
        assert res.exit_code == 2
        assert "--iters" in res.output


class TestStoreCommands:
    def test_ingest_counts_then_rerun_is_idempotent(self, pipeline):
        _, results = pipeline
        assert "ingested 240 records: 240 new, 0 updated" in results["ingest"].output
        assert "ingested 240 records: 0 new, 0 updated" in results["reingest"].output

    def test_rebuild_summarizes_papers_and_users(self, pipeline):
        _, results = pipeline
        assert (
            "model 0001: 240 paper vectors (0 failures), 1 user vectors"
            " (0 events skipped)" in results["rebuild"].output
        )

    def test_score_lists_clicked_theme_first(self, pipeline):
        _, results = pipeline
        lines = results["score"].output.splitlines()
        assert len(lines) == 5
        scores = []
        for line in lines:
            m = re.fullmatch(r"\s*(-?\d+\.\d{6})  (\d{4}-\d{2}-\d{2})  (\S+)  (.+)", line)
            assert m, line
            assert m.group(2) == "2026-08-10"
            scores.append(float(m.group(1)))
        assert scores == sorted(scores, reverse=True)
        assert scores[0] > 0.0
        assert "-hep-ph-" in lines[0]  # alice clicked hep-ph papers

    def test_nightly_prints_summary_and_reruns_clean(self, pipeline):
        _, results = pipeline
        assert json.loads(results["nightly"].output) == {
            "new": 8,
            "updated": 0,
            "inferred": 8,
            "failures": 0,
        }
        assert json.loads(results["nightly_rerun"].output) == {
            "new": 0,
            "updated": 0,
            "inferred": 0,
            "failures": 0,
        }

    def test_day_two_papers_have_vectors(self, pipeline):
        paths, _ = pipeline
        with open_store(paths["db"]) as store:
            day2 = store.list_papers(date_from=DAY2, date_to=DAY2)
            assert len(day2) == 8
            assert all(store.get_paper_vector(p.id) is not None for p in day2)


class TestErrors:
    def test_ingest_malformed_jsonl_fails_cleanly(self, tmp_path):
        bad = tmp_path / "bad.jsonl"
        bad.write_text("this is not json\n", "utf-8")
        res = CliRunner().invoke(
            main, ["ingest", "--input", str(bad), "--store", str(tmp_path / "s")]
        )
        assert res.exit_code == 1
        assert "line 1" in res.output

    def test_ingest_oai_xml_format(self, tmp_path):
        doc = tmp_path / "r.xml"
        doc.write_bytes(
            b"<records><record><id>x1</id><title>T</title>"
            b"<abstract>A body.</abstract><created>2026-08-01</created>"
            b"<authors><author>Doe, J.</author></authors>"
            b"<categories>astro-ph</categories></record></records>"
        )
        res = CliRunner().invoke(
            main,
            [
                "ingest",
                "--input", str(doc),
                "--format", "oai-xml",
                "--store", str(tmp_path / "s"),
            ],
        )
        assert res.exit_code == 0, res.output
        assert "ingested 1 records: 1 new, 0 updated" in res.output

    def test_nightly_rejects_bad_date(self, tmp_path):
        (tmp_path / "src").mkdir()
        res = CliRunner().invoke(
            main,
            [
                "nightly",
                "--store", str(tmp_path / "s"),
                "--source", str(tmp_path / "src"),
                "--date", "08/10/2026",
            ],
        )
        assert res.exit_code == 2
        assert "--date" in res.output

    def test_score_unknown_user_fails(self, tmp_path):
        res = CliRunner().invoke(
            main, ["score", "--store", str(tmp_path / "s"), "--user", "ghost"]
        )
        assert res.exit_code == 1
        assert "unknown user" in res.output

    def test_rebuild_without_any_model_fails(self, tmp_path):
        res = CliRunner().invoke(
            main, ["rebuild-users", "--store", str(tmp_path / "s")]
        )
        assert res.exit_code != 0
        assert isinstance(res.exception, ModelLoadError)


class TestLoadModelMap:
    def test_none_directory_is_none(self, tmp_path):
        with open_store(tmp_path / "s") as store:
            assert _load_model_map(store, None) is None

    def test_flat_container_serves_every_category(self, pipeline, tmp_path):
        paths, _ = pipeline
        with open_store(tmp_path / "s") as store:
            mapping = _load_model_map(store, str(paths["model"]))
            assert mapping == {c: "0001" for c in DEFAULT_CATEGORIES}
            assert store.model_versions() == ["0001"]

    def test_per_category_subdirectories(self, pipeline, tmp_path):
        paths, _ = pipeline
        models_root = tmp_path / "models"
        for cat in ("astro-ph", "hep-ph"):
            sub = models_root / cat
            sub.mkdir(parents=True)
            for part in ("model.json", "lambda.f64le", "dictionary.tsv"):
                sub.joinpath(part).write_bytes(
                    paths["model"].joinpath(part).read_bytes()
                )
        with open_store(tmp_path / "s") as store:
            mapping = _load_model_map(store, str(models_root))
            assert mapping == {"astro-ph": "astro-ph", "hep-ph": "hep-ph"}
            assert store.model_versions() == ["astro-ph", "hep-ph"]

    def test_empty_directory_is_none(self, tmp_path):
        (tmp_path / "empty").mkdir()
        with open_store(tmp_path / "s") as store:
            assert _load_model_map(store, str(tmp_path / "empty")) is None
