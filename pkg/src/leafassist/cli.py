"""Command-line entry points: serve, ingest, query, detect, ask, eval."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .boxes import ClassList
from .config import load_config
from .errors import LeafAssistError
from .evaluation import (evaluate_dataset, load_size_manifest, render_table,
                         report_to_json, sizes_from_images)
from .ingest import ChunkSpec, ingest as ingest_kb
from .ragchat import RagChat
from .service import build_detector, build_embedder, build_llm, create_app, load_or_create_store
from .vectorstore import VectorStore


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="TOML config file; env vars override its values.")
@click.pass_context
def main(ctx, config_path):
    """Coffee-leaf disease assistant: detection, grounded chat, and evaluation."""
    ctx.ensure_object(dict)
    try:
        ctx.obj["config"] = load_config(config_path)
    except LeafAssistError as exc:
        raise click.ClickException(str(exc))


@main.command()
@click.pass_context
def serve(ctx):
    """Run the HTTP API."""
    import uvicorn

    config = ctx.obj["config"]
    app = create_app(config)
    uvicorn.run(app, host=config.server.host, port=config.server.port,
                log_level="info")


@main.command("ingest")
@click.argument("kb_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--chunk-size", type=int, default=None, help="Max characters per chunk.")
@click.option("--overlap", type=int, default=None, help="Characters carried between chunks.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None,
              help="Store file to write (default: store.path from config).")
@click.pass_context
def ingest_command(ctx, kb_dir, chunk_size, overlap, out_path):
    """Chunk and embed a knowledge-base directory into a store file."""
    config = ctx.obj["config"]
    spec = ChunkSpec(chunk_size or config.chunking.chunk_size,
                     overlap if overlap is not None else config.chunking.overlap)
    try:
        chunks = ingest_kb(kb_dir, spec)
        embedder = build_embedder(config)
        vectors = embedder.embed_texts([c.text for c in chunks])
        store = VectorStore(dim=config.embedding.dim)
        added = store.add(zip(chunks, vectors))
        target = out_path or config.store.path
        store.persist(target)
    except LeafAssistError as exc:
        raise click.ClickException(str(exc))
    documents = len({c.source_id for c in chunks})
    click.echo(f"ingested {documents} documents into {added} chunks -> {target}")


@main.command()
@click.argument("store_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("text")
@click.option("-k", "top_k", type=int, default=4, show_default=True,
              help="Number of results.")
@click.pass_context
def query(ctx, store_path, text, top_k):
    """Search a store file and print scored chunk ids."""
    config = ctx.obj["config"]
    try:
        store = VectorStore.load(store_path)
        embedder = build_embedder(config)
        vector = embedder.embed_texts([text])[0]
        results = store.search(vector, top_k)
    except LeafAssistError as exc:
        raise click.ClickException(str(exc))
    for scored in results:
        click.echo(f"{scored.score: .6f}  {scored.chunk.chunk_id}")


@main.command()
@click.argument("image_path", type=click.Path(exists=True, dir_okay=False))
@click.pass_context
def detect(ctx, image_path):
    """Run the configured detector on one image and print detections as JSON."""
    config = ctx.obj["config"]
    try:
        detector = build_detector(config)
        detections = detector.detect(Path(image_path).read_bytes(),
                                     Path(image_path).name)
    except LeafAssistError as exc:
        raise click.ClickException(str(exc))
    click.echo(json.dumps([
        {"class_id": d.class_id, "class_name": d.class_name,
         "x1": d.bbox.x1, "y1": d.bbox.y1, "x2": d.bbox.x2, "y2": d.bbox.y2,
         "confidence": d.confidence}
        for d in detections
    ], indent=2))


@main.command()
@click.argument("question")
@click.option("--store", "store_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Store file (default: store.path from config).")
@click.pass_context
def ask(ctx, question, store_path):
    """Answer one question against the knowledge base (no detection step)."""
    config = ctx.obj["config"]
    try:
        if store_path:
            store = VectorStore.load(store_path)
        else:
            store = load_or_create_store(config)
        chat = RagChat(store, build_embedder(config), build_llm(config),
                       k=config.retrieval.k,
                       context_char_budget=config.retrieval.context_char_budget)
        from .ragchat import Session

        answer = chat.answer(question, Session("cli", config.chat.window_size))
    except LeafAssistError as exc:
        raise click.ClickException(str(exc))
    click.echo(answer.text)
    if answer.sources:
        click.echo("sources: " + ", ".join(cid for _, cid in answer.sources))


@main.command("eval")
@click.option("--pred", "pred_dir", required=True,
              type=click.Path(exists=True, file_okay=False),
              help="Directory of prediction label files.")
@click.option("--gt", "gt_dir", required=True,
              type=click.Path(exists=True, file_okay=False),
              help="Directory of ground-truth label files.")
@click.option("--classes", "classes_file", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Text file with one class name per line.")
@click.option("--sizes", "sizes_csv", type=click.Path(exists=True, dir_okay=False),
              default=None, help="CSV manifest: filename,width,height.")
@click.option("--images", "images_dir", type=click.Path(exists=True, file_okay=False),
              default=None, help="Image directory to read sizes from.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False),
              default="report.json", show_default=True,
              help="Where to write the JSON report.")
def eval_command(pred_dir, gt_dir, classes_file, sizes_csv, images_dir, out_path):
    """Evaluate predictions against ground truth and print the metric table."""
    if (sizes_csv is None) == (images_dir is None):
        raise click.ClickException("provide exactly one of --sizes or --images")
    try:
        names = [line.strip() for line in
                 Path(classes_file).read_text(encoding="utf-8").splitlines()
                 if line.strip()]
        classes = ClassList(names)
        sizes = (load_size_manifest(sizes_csv) if sizes_csv
                 else sizes_from_images(images_dir))
        report = evaluate_dataset(pred_dir, gt_dir, classes, sizes)
    except (LeafAssistError, ValueError, OSError) as exc:
        raise click.ClickException(str(exc))
    click.echo(render_table(report))
    Path(out_path).write_text(report_to_json(report), encoding="utf-8")
    click.echo(f"report written to {out_path}", err=True)


if __name__ == "__main__":
    main(sys.argv[1:])
