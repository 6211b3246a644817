"""Command-line pipeline: train, importance, proximity, mds, outliers,
mem-estimate, viz-export, bench.

Every subcommand is idempotent: identical flags and inputs produce
bit-identical output files.  RFX_THREADS caps worker threads without
changing any result.  Exit codes: 0 success, 2 usage, 3 data error,
4 budget refusal, 5 internal error.

All flags can also be supplied through one JSON config file
(``--config settings.json``): top-level keys apply to every subcommand,
per-subcommand sections override them, and explicit flags win over both.
"""

import functools
import json
import sys

import click
import numpy as np

from . import __version__, bundle as bundle_mod
from . import importance as importance_mod
from . import mds as mds_mod
from . import proximity as proximity_mod
from .dataset import Dataset, load_csv, read_schema
from .errors import BudgetError, DataError, RfxError
from .forest import TrainConfig, load_forest, oob_report, save_forest, train


_QUANT_ALIASES = {"fp32": "f32", "fp16": "f16", "int8": "i8",
                  "f32": "f32", "f16": "f16", "i8": "i8", "nf4": "nf4"}
_QUANT_CHOICES = sorted(_QUANT_ALIASES)


def _parse_bytes(text: str) -> int:
    """Parse a byte budget like '32GB', '1.5GiB', '900MB', or plain bytes."""
    s = text.strip().upper().replace(" ", "")
    units = [("GIB", 2**30), ("MIB", 2**20), ("KIB", 2**10),
             ("GB", 10**9), ("MB", 10**6), ("KB", 10**3), ("B", 1)]
    for suffix, mult in units:
        if s.endswith(suffix):
            return int(float(s[: -len(suffix)]) * mult)
    return int(float(s))


def _human_bytes(num: float) -> str:
    for unit, div in (("GB", 1e9), ("MB", 1e6), ("KB", 1e3)):
        if num >= div:
            return f"{num / div:.1f} {unit}"
    return f"{num:.0f} B"


def _handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except BudgetError as e:
            click.echo(f"refused: {e}", err=True)
            click.echo(json.dumps(e.plan, indent=1), err=True)
            sys.exit(4)
        except DataError as e:
            click.echo(f"data error: {e}", err=True)
            sys.exit(3)
        except click.ClickException:
            raise
        except RfxError as e:
            click.echo(f"error: {e}", err=True)
            sys.exit(5)
    return wrapper


def _load_dataset(data, schema, label) -> Dataset:
    if schema is not None:
        spec = read_schema(schema)
    else:
        # no schema file: treat every non-label column as numeric
        import csv as _csv
        with open(data, "r", encoding="utf-8", newline="") as fh:
            header = next(_csv.reader(fh))
        spec = {h.strip(): ("numeric", None) for h in header if h.strip() != label}
    return load_csv(data, spec, label)


@click.group()
@click.version_option(version=__version__, prog_name="rfx")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="JSON file of default flag values.")
@click.pass_context
def main(ctx, config_path):
    """Random forest training, importance, proximity, and MDS pipeline."""
    if config_path:
        with open(config_path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
        commands = set(main.commands)
        flat = {k: v for k, v in cfg.items()
                if not (k in commands and isinstance(v, dict))}
        default_map = {}
        for name in commands:
            section = cfg.get(name) if isinstance(cfg.get(name), dict) else {}
            default_map[name] = {**flat, **section}
        ctx.default_map = default_map


_data_opts = [
    click.option("--data", required=True, type=click.Path(exists=True, dir_okay=False),
                 help="CSV file with a header row."),
    click.option("--schema", type=click.Path(exists=True, dir_okay=False), default=None,
                 help="JSON schema file; omitted means all-numeric features."),
    click.option("--label", required=True, help="Name of the label column."),
]


def _add_options(opts):
    def deco(fn):
        for opt in reversed(opts):
            fn = opt(fn)
        return fn
    return deco


@main.command("train")
@_add_options(_data_opts)
@click.option("--trees", type=click.IntRange(min=1), default=500, show_default=True)
@click.option("--mtry", type=click.IntRange(min=1), default=None,
              help="Features tried per split; default floor(sqrt(p)).")
@click.option("--min-node-size", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--max-nodes", type=click.IntRange(min=1), default=None)
@click.option("--seed", type=int, default=1, show_default=True)
@click.option("--casewise", is_flag=True, default=False,
              help="Record casewise mode in the forest (importance default).")
@click.option("--out", type=click.Path(dir_okay=False), default="forest.rfx",
              show_default=True)
@_handle_errors
def cmd_train(data, schema, label, trees, mtry, min_node_size, max_nodes, seed,
              casewise, out):
    """Train a forest and print its OOB report."""
    dataset = _load_dataset(data, schema, label)
    cfg = TrainConfig(ntree=trees, mtry=mtry, iseed=seed,
                      min_node_size=min_node_size, max_nodes=max_nodes,
                      casewise=casewise)
    forest = train(dataset, cfg)
    save_forest(forest, out)
    rep = oob_report(forest, dataset)

    click.echo(f"forest: {trees} trees, mtry={forest.config.mtry}, seed={seed} -> {out}")
    click.echo(f"OOB Error Rate   {100 * rep.error_rate:.1f}%")
    click.echo(f"OOB Accuracy     {100 * (1 - rep.error_rate):.1f}%")
    for c, name in enumerate(dataset.class_names):
        click.echo(f"Class {c} accuracy {100 * rep.per_class_accuracy[c]:.1f}%  ({name})")
    click.echo("Confusion matrix (rows true, cols predicted):")
    for row in rep.confusion:
        click.echo("  " + " ".join(f"{v:6d}" for v in row))
    if len(rep.uncovered):
        click.echo(f"samples never out-of-bag: {rep.uncovered.tolist()}")


@main.command("importance")
@_add_options(_data_opts)
@click.option("--forest", "forest_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--casewise/--no-casewise", default=None,
              help="Default: the mode recorded in the forest file.")
@click.option("--out-csv", type=click.Path(dir_okay=False), default=None)
@click.option("--out-json", type=click.Path(dir_okay=False), default=None)
@click.option("--top", type=int, default=10, show_default=True)
@_handle_errors
def cmd_importance(data, schema, label, forest_path, casewise, out_csv, out_json, top):
    """Overall and local importance from a trained forest."""
    dataset = _load_dataset(data, schema, label)
    forest = load_forest(forest_path)
    cw = forest.config.casewise if casewise is None else casewise
    report = importance_mod.compute_report(forest, dataset, casewise=cw)
    if out_csv:
        importance_mod.write_report_csv(report, out_csv)
        click.echo(f"wrote {out_csv}")
    if out_json:
        importance_mod.write_report_json(report, out_json)
        click.echo(f"wrote {out_json}")
    order = np.argsort(report.overall_perm)[::-1][:top]
    click.echo(f"mode: {'casewise' if cw else 'non-casewise'}  trees: {report.trees_used}")
    click.echo(f"{'feature':<32} {'perm_mean':>10} {'perm_sd':>10} {'gini':>8}")
    for j in order:
        click.echo(f"{report.feature_names[j]:<32} {report.overall_perm[j]:>10.4f} "
                   f"{report.overall_perm_sd[j]:>10.4f} {report.overall_gini[j]:>8.4f}")


@main.command("proximity")
@_add_options(_data_opts)
@click.option("--forest", "forest_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--backend", type=click.Choice(["full", "triblock", "lowrank"]),
              default="full", show_default=True)
@click.option("--rank", type=click.IntRange(min=1), default=32, show_default=True)
@click.option("--quant", type=click.Choice(_QUANT_CHOICES), default="i8",
              show_default=True)
@click.option("--tau", type=float, default=proximity_mod.DEFAULT_TAU, show_default=True)
@click.option("--budget", default="32GiB", show_default=True,
              help="Memory budget, e.g. 32GiB, 900MB, or plain bytes.")
@click.option("--seed", type=int, default=0, show_default=True,
              help="Factorization seed (lowrank backend).")
@click.option("--out", type=click.Path(dir_okay=False), default="proximity.rfx",
              show_default=True)
@click.option("--export-csv", type=click.Path(dir_okay=False), default=None,
              help="Also export the TriBlock dense tier as CSV (+ summary JSON).")
@_handle_errors
def cmd_proximity(data, schema, label, forest_path, backend, rank, quant, tau,
                  budget, seed, out, export_csv):
    """Compute a proximity representation and report its footprint."""
    quant = _QUANT_ALIASES[quant]
    dataset = _load_dataset(data, schema, label)
    forest = load_forest(forest_path)
    membership = proximity_mod.leaf_membership(forest, dataset)
    budget_bytes = _parse_bytes(budget)
    n = dataset.n

    plan = proximity_mod.memory_plan(n, tree_count=forest.ntree, rank=rank,
                                     mode=quant, backend=backend)
    if backend == "full":
        rep = proximity_mod.full_proximity(membership, budget_bytes=budget_bytes)
        stored = rep.nbytes()
        click.echo(f"full triangle: {stored} bytes ({_human_bytes(stored)})")
    elif backend == "triblock":
        rep = proximity_mod.triblock_proximity(membership, tau=tau,
                                               budget_bytes=budget_bytes)
        stored = rep.nbytes()
        click.echo(f"triblock tau={tau}: dense={rep.dense_count} "
                   f"sparse={rep.sparse_count} "
                   f"zero={n * (n - 1) // 2 - rep.stored_pairs}")
        click.echo(f"stored {stored} bytes ({_human_bytes(stored)}), "
                   f"pair compression {rep.compression_ratio():.1f}x")
        if export_csv:
            summary = export_csv + ".summary.json"
            proximity_mod.export_triblock_csv(rep, export_csv, summary)
            click.echo(f"wrote {export_csv} and {summary}")
    else:
        rep = proximity_mod.lowrank_proximity(membership, rank=rank, mode=quant,
                                              seed=seed)
        stored = rep.nbytes()
        two_factor = plan["requested"]["bytes"]["two_factor"]
        click.echo(f"lowrank rank={rep.rank} mode={quant}: "
                   f"{two_factor} bytes two-factor convention "
                   f"({_human_bytes(two_factor)}), "
                   f"{stored} bytes stored ({_human_bytes(stored)})")
        if rep.rank_degraded:
            click.echo(f"note: rank degraded to the membership bound {rep.rank}")
    headline = plan["full_headline_bytes"]
    click.echo(f"compression vs 8n^2 ({_human_bytes(headline)}): "
               f"{headline / max(stored, 1):.0f}x")
    proximity_mod.save_proximity(rep, out)
    click.echo(f"wrote {out}")


@main.command("mds")
@click.option("--prox", "prox_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--out-csv", type=click.Path(dir_okay=False), default=None)
@click.option("--out-json", type=click.Path(dir_okay=False), default=None)
@click.option("--compare", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Embedding JSON to print a pairwise-distance correlation against.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--max-iters", type=int, default=300, show_default=True)
@click.option("--tol", type=float, default=1e-8, show_default=True)
@click.option("--data", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Optional CSV to carry labels into the coordinate export.")
@click.option("--schema", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--label", default=None)
@_handle_errors
def cmd_mds(prox_path, out_csv, out_json, compare, seed, max_iters, tol,
            data, schema, label):
    """3-D MDS embedding from any proximity representation."""
    rep = proximity_mod.load_proximity(prox_path)
    if isinstance(rep, proximity_mod.LowRankQuantized):
        cfg = mds_mod.PowerIterConfig(max_iterations=max_iters, tol=tol, seed=seed)
        emb = mds_mod.mds_lowrank(rep, cfg)
        route = "lowrank power iteration"
    else:
        emb = mds_mod.mds_full(rep)
        route = "dense eigendecomposition"
    click.echo(f"route: {route}")
    click.echo("eigenvalues: " + " ".join(f"{v:.6g}" for v in emb.eigenvalues))
    click.echo("residuals:   " + " ".join(f"{v:.3g}" for v in emb.residuals))
    labels = None
    if data is not None and label is not None:
        labels = _load_dataset(data, schema, label).labels
    if out_csv:
        mds_mod.embedding_to_csv(emb, out_csv, labels=labels)
        click.echo(f"wrote {out_csv}")
    if out_json:
        mds_mod.embedding_to_json(emb, out_json)
        click.echo(f"wrote {out_json}")
    if compare:
        other = mds_mod.embedding_from_json(compare)
        rho = mds_mod.mds_correlation(emb, other)
        click.echo(f"mds correlation vs {compare}: {rho:.4f}")


@main.command("outliers")
@click.option("--prox", "prox_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@click.option("--top", type=int, default=10, show_default=True)
@_handle_errors
def cmd_outliers(prox_path, out, top):
    """Outlier measure (mean inverse squared proximity) per sample."""
    rep = proximity_mod.load_proximity(prox_path)
    scores = proximity_mod.outlier_scores(rep)
    order = np.argsort(scores)[::-1]
    click.echo(f"{'sample':>8} {'score':>12}")
    for i in order[:top]:
        click.echo(f"{i:>8d} {scores[i]:>12.4f}")
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write("sample_id,score\n")
            for i in range(len(scores)):
                fh.write(f"{i},{scores[i]:.10g}\n")
        click.echo(f"wrote {out}")


@main.command("mem-estimate")
@click.option("--samples", type=click.IntRange(min=1), required=True)
@click.option("--trees", type=click.IntRange(min=1), default=10000, show_default=True)
@click.option("--features", type=click.IntRange(min=1),
              default=proximity_mod.PLAN_FEATURES, show_default=True)
@click.option("--classes", type=click.IntRange(min=2),
              default=proximity_mod.PLAN_CLASSES, show_default=True)
@click.option("--maxnode", type=click.IntRange(min=1),
              default=proximity_mod.PLAN_MAXNODE, show_default=True)
@click.option("--rank", type=click.IntRange(min=1), default=None)
@click.option("--quant", type=click.Choice(_QUANT_CHOICES), default=None)
@click.option("--backend", type=click.Choice(["full", "triblock", "lowrank"]),
              default=None)
@click.option("--retention", type=float, default=proximity_mod.DEFAULT_RETENTION,
              show_default=True, help="TriBlock retained fraction of the triangle.")
@_handle_errors
def cmd_mem_estimate(samples, trees, features, classes, maxnode, rank, quant,
                     backend, retention):
    """Closed-form memory plan; needs no data files."""
    if quant is not None:
        quant = _QUANT_ALIASES[quant]
    plan = proximity_mod.memory_plan(samples, tree_count=trees, rank=rank,
                                     mode=quant, backend=backend,
                                     retention=retention, n_features=features,
                                     maxnode=maxnode, n_classes=classes)
    click.echo(json.dumps(plan, indent=1))


@main.command("viz-export")
@_add_options(_data_opts)
@click.option("--forest", "forest_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--prox", "prox_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Proximity file; default computes a full matrix.")
@click.option("--embedding", "embedding_path",
              type=click.Path(exists=True, dir_okay=False), default=None,
              help="Embedding JSON; default computes MDS from the proximity.")
@click.option("--casewise/--no-casewise", default=None)
@click.option("--sample", "sample_size", type=click.IntRange(min=1), default=None,
              help="Subsample this many rows for the bundle.")
@click.option("--stratified", is_flag=True, default=False,
              help="Stratify the subsample by class.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default="bundle.json",
              show_default=True)
@_handle_errors
def cmd_viz_export(data, schema, label, forest_path, prox_path, embedding_path,
                   casewise, sample_size, stratified, seed, out):
    """Bundle features, votes, importance, embedding, and outliers for the
    exploration UI."""
    dataset = _load_dataset(data, schema, label)
    forest = load_forest(forest_path)
    if forest.n != dataset.n:
        raise DataError(f"forest was trained on n={forest.n}, dataset has n={dataset.n}")
    cw = forest.config.casewise if casewise is None else casewise

    if prox_path is not None:
        rep = proximity_mod.load_proximity(prox_path)
        backend = type(rep).__name__
    else:
        membership = proximity_mod.leaf_membership(forest, dataset)
        rep = proximity_mod.full_proximity(membership)
        backend = "FullTriangle"
    if rep.n != dataset.n:
        raise DataError(f"proximity has n={rep.n}, dataset has n={dataset.n}")

    if embedding_path is not None:
        emb = mds_mod.embedding_from_json(embedding_path)
        if emb.n != dataset.n:
            raise DataError(f"embedding has n={emb.n}, dataset has n={dataset.n}")
    elif isinstance(rep, proximity_mod.LowRankQuantized):
        emb = mds_mod.mds_lowrank(rep, mds_mod.PowerIterConfig(seed=seed))
    else:
        emb = mds_mod.mds_full(rep)

    report = importance_mod.compute_report(forest, dataset, casewise=cw)
    outliers = proximity_mod.outlier_scores(rep)

    subset = None
    if sample_size is not None and sample_size < dataset.n:
        subset = bundle_mod.sample_indices(
            dataset.n, sample_size,
            labels=dataset.labels if stratified else None, seed=seed)
        click.echo(f"subsampled {len(subset)} of {dataset.n} rows"
                   + (" (stratified)" if stratified else ""))

    doc = bundle_mod.build_bundle(forest, dataset, report, emb, outliers,
                                  backend=backend, subset=subset)
    bundle_mod.write_bundle(doc, out)
    click.echo(f"wrote {out} ({doc['n']} samples, "
               f"per-tree votes: {'yes' if doc['per_tree_votes'] else 'no'})")


@main.command("bench")
@_add_options(_data_opts)
@click.option("--trees", type=click.IntRange(min=1), default=100, show_default=True)
@click.option("--seed", type=int, default=1, show_default=True)
@_handle_errors
def cmd_bench(data, schema, label, trees, seed):
    """Time the train / proximity / MDS stages on one dataset."""
    import time

    dataset = _load_dataset(data, schema, label)
    t0 = time.perf_counter()
    forest = train(dataset, TrainConfig(ntree=trees, iseed=seed))
    t_train = time.perf_counter() - t0
    t0 = time.perf_counter()
    membership = proximity_mod.leaf_membership(forest, dataset)
    rep = proximity_mod.full_proximity(membership)
    t_prox = time.perf_counter() - t0
    t0 = time.perf_counter()
    mds_mod.mds_full(rep)
    t_mds = time.perf_counter() - t0
    click.echo(f"{'stage':<12} {'seconds':>9} {'rate':>14}")
    click.echo(f"{'train':<12} {t_train:>9.3f} {trees / t_train:>10.1f} t/s")
    click.echo(f"{'proximity':<12} {t_prox:>9.3f} {trees / t_prox:>10.1f} t/s")
    click.echo(f"{'mds':<12} {t_mds:>9.3f} {'':>14}")


if __name__ == "__main__":
    main()
