"""Command line: benchmark reports, synthetic dataset generation, HTTP server."""

import os
from pathlib import Path

import click
import numpy as np

from .baselines import mds_smacof, pca_project, sirius_dual_update, tsne_project
from .datasets import resolve_dataset
from .genomics import generate_synthetic_dataset, save_dataset
from .metrics import (
    MetricReport,
    continuity,
    time_update,
    trustworthiness,
    write_report_csv,
    write_report_json,
)
from .projection import TrainConfig, train_projection
from .session import DualSession, ModificationEvent

METHODS = ("pca", "tsne", "sirius", "ours")


@click.group()
def main():
    """Dual projection toolkit."""


def _train_cfg(n, epochs, seed):
    # Shrink neighborhood sizes for small inputs so both sides stay trainable.
    k = max(2, min(10, n // 4))
    return TrainConfig(
        epochs=epochs, seed=seed, knn_positive_k=k, phi_k=k, batch_size=min(64, n)
    )


def _move_event(n):
    return ModificationEvent(
        side="rows", indices=tuple(range(min(10, n))), kind="move", delta=(0.5, 0.5)
    )


def _bench_one(method, X, name, ks, epochs, seed):
    if method == "pca":
        Y, seconds = pca_project(X), None
    elif method == "tsne":
        Y, seconds = tsne_project(X, seed=seed), None
    elif method == "sirius":
        Y = mds_smacof(X, seed=seed)
        target = Y.copy()
        target[: min(10, len(Y))] += 0.5 * np.abs(Y).max()
        # One reweighting step, no column re-embedding: the cheapest update
        # this baseline can produce, so its reported time is a lower bound.
        seconds = sirius_dual_update(
            X, target, iters=1, embed_cols=False
        ).elapsed_seconds
    else:
        rows, _ = train_projection(X, _train_cfg(X.shape[0], epochs, seed))
        cols, _ = train_projection(X.T, _train_cfg(X.shape[1], epochs, seed))
        session = DualSession(X, rows, cols)
        Y = session.S
        seconds = time_update(session, _move_event(X.shape[0]))
    T = {k: trustworthiness(X, Y, k) for k in ks}
    C = {k: continuity(X, Y, k) for k in ks}
    return MetricReport(method=method, dataset=name, T=T, C=C, update_seconds=seconds)


@main.command()
@click.option("--dataset", "dataset_name", required=True,
              help="digits, genomic, gaussians, a feature .csv, or a manifest .json")
@click.option("--methods", default="pca,tsne,sirius,ours", show_default=True)
@click.option("--k", "k_list", default="20,30,40", show_default=True,
              help="comma-separated neighborhood sizes")
@click.option("--out", default="report.csv", show_default=True, type=click.Path())
@click.option("--epochs", default=300, show_default=True,
              help="training epochs for the 'ours' method")
@click.option("--seed", default=0, show_default=True)
def bench(dataset_name, methods, k_list, out, epochs, seed):
    """Score projection methods on a dataset and write CSV + JSON reports."""
    try:
        X, name = resolve_dataset(dataset_name)
    except (ValueError, OSError) as e:
        raise click.UsageError(str(e))
    methods = [m.strip() for m in methods.split(",") if m.strip()]
    unknown = [m for m in methods if m not in METHODS]
    if unknown:
        raise click.UsageError(
            f"unknown method {unknown[0]!r}: choose from {', '.join(METHODS)}"
        )
    try:
        ks = [int(k) for k in k_list.split(",") if k.strip()]
    except ValueError:
        raise click.UsageError(f"bad --k list {k_list!r}")
    limit = X.shape[0] // 2
    bad = [k for k in ks if not 1 <= k < limit]
    if not ks or bad:
        raise click.UsageError(f"each k must lie in [1, {limit - 1}] for {name}")

    reports = []
    for method in methods:
        click.echo(f"scoring {method} on {name} ({X.shape[0]} x {X.shape[1]}) ...")
        reports.append(_bench_one(method, X, name, ks, epochs, seed))

    out = Path(out)
    write_report_csv(reports, out)
    write_report_json(reports, out.with_suffix(".json"))
    for rep in reports:
        for k in ks:
            stamp = "" if rep.update_seconds is None else f"  update {rep.update_seconds:.4f}s"
            click.echo(f"{rep.method:>7}  k={k:<3d} T={rep.T[k]:.3f} C={rep.C[k]:.3f}{stamp}")
    click.echo(f"wrote {out} and {out.with_suffix('.json')}")


@main.command("make-dataset")
@click.option("--out", required=True, type=click.Path())
@click.option("--n-hybrids", default=600, show_default=True)
@click.option("--n-genes", default=400, show_default=True)
@click.option("--n-regulatory", default=30, show_default=True)
@click.option("--effect-size", default=1.0, show_default=True)
@click.option("--noise", default=0.5, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--n-parents", type=int, default=None,
              help="breeding panel size (default: a pool wide enough that crosses rarely repeat)")
def make_dataset(out, n_hybrids, n_genes, n_regulatory, effect_size, noise, seed, n_parents):
    """Generate a synthetic genomic dataset and write it to a directory."""
    ds = generate_synthetic_dataset(
        n_hybrids, n_genes, n_regulatory,
        effect_size=effect_size, seed=seed, noise=noise, n_parents=n_parents,
    )
    manifest = save_dataset(ds, out)
    click.echo(str(manifest))


@main.command()
@click.option("--bind", default=None, help="host:port (default: BIND_ADDR or 127.0.0.1:8000)")
@click.option("--data-dir", default=None, help="persistence root (default: DATA_DIR)")
@click.option("--max-pool", type=int, default=None, help="candidate cap (default: MAX_POOL)")
def serve(bind, data_dir, max_pool):
    """Run the HTTP session service."""
    import uvicorn

    from .service import create_app

    bind = bind or os.environ.get("BIND_ADDR", "127.0.0.1:8000")
    host, _, port = bind.rpartition(":")
    host = host or "127.0.0.1"
    app = create_app(data_dir=data_dir, max_pool=max_pool)
    uvicorn.run(app, host=host, port=int(port))


if __name__ == "__main__":
    main()
