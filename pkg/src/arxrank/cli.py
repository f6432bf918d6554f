"""Command-line entry points for the ranking engine."""

from __future__ import annotations

import json
import sys
from datetime import date, datetime, timezone
from pathlib import Path

import click

from . import api as service
from .evaluate import (
    log_perplexity,
    metric_scan,
    perplexity,
    pizza_csv,
    pizza_points,
    scan_csv,
    umass_coherence,
)
from .ingest import DirectoryReleaseSource, IngestError, load_corpus
from .lda import (
    TrainSchedule,
    infer_theta,
    load_model,
    save_model,
    top_words,
    train_online,
)
from .ranking import RankingConfig
from .store import open_store
from .textpipe import PipelineConfig, build_dictionary, default_config, preprocess, to_bow


def _corpus_bows(corpus, dictionary):
    cfg = default_config()
    return [to_bow(preprocess(rec.text, cfg), dictionary) for rec in corpus.records]


def _int_list(value: str) -> list[int]:
    try:
        return [int(x) for x in value.split(",") if x.strip()]
    except ValueError:
        raise click.BadParameter(f"expected comma-separated integers, got {value!r}")


@click.group()
def main():
    """Personalized paper ranking: topic training, evaluation, serving."""


@main.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--format", "fmt", type=click.Choice(["jsonl", "oai-xml"]), default="jsonl")
@click.option("--store", "store_path", required=True, type=click.Path())
def ingest(input_path, fmt, store_path):
    """Parse a release file and upsert it into a store."""
    try:
        corpus = load_corpus(input_path, fmt)
    except IngestError as exc:
        raise click.ClickException(str(exc))
    with open_store(store_path) as store:
        new, updated = store.upsert_papers(corpus.records)
    click.echo(f"ingested {len(corpus)} records: {new} new, {updated} updated")


@main.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--format", "fmt", type=click.Choice(["jsonl", "oai-xml"]), default="jsonl")
@click.option("--topics", "K", required=True, type=int)
@click.option("--passes", default=100, type=int, show_default=True)
@click.option("--iters", default=100, type=int, show_default=True)
@click.option("--seed", default=0, type=int, show_default=True)
@click.option("--batch-size", default=256, type=int, show_default=True)
@click.option("--min-docs", default=50, type=int, show_default=True)
@click.option("--max-frac", default=0.90, type=float, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
def train(corpus_path, fmt, K, passes, iters, seed, batch_size, min_docs, max_frac, out_dir):
    """Build a dictionary from a corpus and train a topic model on it."""
    corpus = load_corpus(corpus_path, fmt)
    cfg = default_config()
    pipeline = PipelineConfig(
        stop_words=cfg.stop_words,
        tech_words=cfg.tech_words,
        min_docs=min_docs,
        max_frac=max_frac,
    )
    docs = [preprocess(rec.text, pipeline) for rec in corpus.records]
    dictionary = build_dictionary(docs, pipeline)
    bows = [to_bow(doc, dictionary) for doc in docs]
    schedule = TrainSchedule(
        passes=passes, e_step_iters=iters, batch_size=batch_size, seed=seed
    )
    model = train_online(bows, K, schedule=schedule, dictionary=dictionary)
    save_model(model, out_dir)
    click.echo(
        f"trained K={K} on {len(bows)} documents, V={len(dictionary)}; saved to {out_dir}"
    )
    for k in range(K):
        words = ", ".join(w for w, _ in top_words(model, k, 8))
        click.echo(f"topic {k}: {words}")


@main.command("eval")
@click.option("--model", "model_dir", required=True, type=click.Path(exists=True))
@click.option("--heldout", "heldout_path", required=True, type=click.Path(exists=True))
@click.option("--format", "fmt", type=click.Choice(["jsonl", "oai-xml"]), default="jsonl")
@click.option("--metric", type=click.Choice(["perplexity", "coherence"]), required=True)
@click.option("--topn", default=10, type=int, show_default=True)
def eval_cmd(model_dir, heldout_path, fmt, metric, topn):
    """Score a saved model on held-out documents."""
    model = load_model(model_dir)
    if model.dictionary is None:
        raise click.ClickException(f"{model_dir}: model has no dictionary")
    corpus = load_corpus(heldout_path, fmt)
    bows = _corpus_bows(corpus, model.dictionary)
    if metric == "perplexity":
        click.echo(f"log_perplexity {log_perplexity(model, bows)!r}")
        click.echo(f"perplexity {perplexity(model, bows)!r}")
    else:
        res = umass_coherence(model, bows, topn=topn)
        for k, c in enumerate(res.per_topic):
            click.echo(f"topic {k}: {c!r}")
        click.echo(f"mean {res.mean!r}")
        if res.skipped_pairs:
            click.echo(f"skipped {res.skipped_pairs} word pairs absent from the corpus")


@main.command()
@click.option("--model", "model_dir", required=True, type=click.Path(exists=True))
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--format", "fmt", type=click.Choice(["jsonl", "oai-xml"]), default="jsonl")
@click.option("--seed", default=0, type=int, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
def pizza(model_dir, corpus_path, fmt, seed, out_path):
    """Polar-plot coordinates (dominant topic, concentration radius)."""
    model = load_model(model_dir)
    if model.dictionary is None:
        raise click.ClickException(f"{model_dir}: model has no dictionary")
    corpus = load_corpus(corpus_path, fmt)
    thetas = [infer_theta(b, model) for b in _corpus_bows(corpus, model.dictionary)]
    points = pizza_points(thetas, seed, doc_ids=[r.id for r in corpus.records])
    Path(out_path).write_text(pizza_csv(points), "utf-8")
    click.echo(f"wrote {len(points)} points to {out_path}")


@main.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--format", "fmt", type=click.Choice(["jsonl", "oai-xml"]), default="jsonl")
@click.option("--topics", required=True, help="comma-separated topic counts, e.g. 2,4,8")
@click.option("--passes", required=True, help="comma-separated pass counts, e.g. 10,100")
@click.option("--iters", default=None, help="comma-separated inference iteration caps; defaults to the pass counts")
@click.option("--seed", default=0, type=int, show_default=True)
@click.option("--topn", default=10, type=int, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
def scan(corpus_path, fmt, topics, passes, iters, seed, topn, out_path):
    """Grid-scan topic count and training schedule; write a metrics CSV."""
    K_values = _int_list(topics)
    pass_values = _int_list(passes)
    iter_values = _int_list(iters) if iters is not None else pass_values
    if len(iter_values) == 1:
        iter_values = iter_values * len(pass_values)
    if len(iter_values) != len(pass_values):
        raise click.BadParameter("--iters must match --passes in length (or be one value)")
    schedule_values = list(zip(pass_values, iter_values))
    corpus = load_corpus(corpus_path, fmt)
    cfg = default_config()
    docs = [preprocess(rec.text, cfg) for rec in corpus.records]
    dictionary = build_dictionary(docs, cfg)
    bows = [to_bow(doc, dictionary) for doc in docs]
    rows = metric_scan(
        bows, K_values, schedule_values, V=len(dictionary), topn=topn, seed=seed
    )
    Path(out_path).write_text(scan_csv(rows), "utf-8")
    click.echo(f"wrote {len(rows)} rows to {out_path}")


@main.command("rebuild-users")
@click.option("--store", "store_path", required=True, type=click.Path())
@click.option("--model", "version", default=None, help="model version in the store; defaults to latest")
@click.option("--model-dir", default=None, type=click.Path(exists=True), help="import a model container from a directory first")
def rebuild_users(store_path, version, model_dir):
    """Recompute all paper vectors and replay all user histories."""
    with open_store(store_path) as store:
        if model_dir is not None:
            model = load_model(model_dir)
            version = store.save_model(model, version)
        else:
            model, version = store.load_model(version)
        summary = service.rebuild_vectors(store, model, version)
    click.echo(
        f"model {version}: {summary['papers']} paper vectors "
        f"({summary['paper_failures']} failures), {summary['users']} user vectors "
        f"({summary['events_skipped']} events skipped)"
    )


@main.command()
@click.option("--store", "store_path", required=True, type=click.Path())
@click.option("--source", "source_dir", required=True, type=click.Path(exists=True))
@click.option("--format", "fmt", type=click.Choice(["jsonl", "oai-xml"]), default="jsonl")
@click.option("--date", "day", required=True, help="release date, YYYY-MM-DD")
def nightly(store_path, source_dir, fmt, day):
    """Run the nightly pull-ingest-infer job for one release date."""
    try:
        parsed = date.fromisoformat(day)
    except ValueError:
        raise click.BadParameter(f"--date must be YYYY-MM-DD, got {day!r}")
    source = DirectoryReleaseSource(source_dir, fmt)
    with open_store(store_path) as store:
        summary = service.nightly_job(store, source, parsed)
    click.echo(json.dumps(summary, sort_keys=True))


@main.command()
@click.option("--store", "store_path", required=True, type=click.Path())
@click.option("--user", required=True)
@click.option("--date", "day", default=None, help="score as of this date (default: today)")
@click.option("--limit", default=20, type=int, show_default=True)
def score(store_path, user, day, limit):
    """Print a user's ranked listing for one day's papers."""
    if day is not None:
        try:
            parsed = date.fromisoformat(day)
        except ValueError:
            raise click.BadParameter(f"--date must be YYYY-MM-DD, got {day!r}")
    else:
        parsed = datetime.now(timezone.utc).date()
    now = datetime(parsed.year, parsed.month, parsed.day, 23, 59, 59, tzinfo=timezone.utc)
    config = RankingConfig()
    with open_store(store_path) as store:
        account = store.get_user(user)
        if account is None:
            raise click.ClickException(f"unknown user {user!r}")
        cats = list(account.categories) or list(service.DEFAULT_CATEGORIES)
        versions = service._resolve_versions(store, cats, None)
        vectors = {
            c: service.current_user_vector(
                store, user, c, versions.get(c), now, config
            )
            for c in cats
        }
        papers = store.list_papers(categories=cats, date_from=parsed, date_to=parsed)
        if not papers:  # no release that day: fall back to everything up to it
            papers = store.list_papers(categories=cats, date_to=parsed)
        scored = service.score_listing(papers, store, cats, vectors, versions)[:limit]
    for sp in scored:
        click.echo(f"{sp.score:12.6f}  {sp.paper.submitted}  {sp.paper.id}  {sp.paper.title}")


def _load_model_map(store, models_dir: str | None):
    """Import model containers from a directory into the store.

    A directory holding model.json directly becomes the shared model for
    every category; otherwise each subdirectory named after a category
    becomes that category's model.
    """
    if models_dir is None:
        return None
    root = Path(models_dir)
    if (root / "model.json").exists():
        version = store.save_model(load_model(root))
        return {c: version for c in service.DEFAULT_CATEGORIES}
    model_map = {}
    for sub in sorted(p for p in root.iterdir() if (p / "model.json").exists()):
        model_map[sub.name] = store.save_model(load_model(sub), sub.name)
    return model_map or None


@main.command()
@click.option("--addr", default="127.0.0.1:8000", show_default=True)
@click.option("--data", "store_path", required=True, type=click.Path())
@click.option("--models", "models_dir", default=None, type=click.Path(exists=True))
@click.option("--categories", default=",".join(service.DEFAULT_CATEGORIES), show_default=True)
def serve(addr, store_path, models_dir, categories):
    """Serve the HTTP API over a store."""
    import uvicorn

    host, _, port_s = addr.partition(":")
    try:
        port = int(port_s) if port_s else 8000
    except ValueError:
        raise click.BadParameter(f"bad --addr {addr!r}")
    store = open_store(store_path)
    cats = tuple(c.strip() for c in categories.split(",") if c.strip())
    model_map = _load_model_map(store, models_dir)
    app = service.create_app(store, categories=cats, model_map=model_map)
    uvicorn.run(app, host=host or "127.0.0.1", port=port)


if __name__ == "__main__":
    sys.exit(main())
