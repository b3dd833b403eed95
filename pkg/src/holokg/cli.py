"""Command-line entry points: train, evaluate, predict, memdemo, build-countries.

Every command takes a single --seed that feeds all randomness through
labeled substreams, accepts a flat key=value config file whose entries
are overridden by explicit flags, and writes a manifest.json recording
the fully resolved configuration. Exit codes: 0 success, 1 runtime
failure, 2 usage or config error.
"""

from __future__ import annotations

import json
import os
import subprocess
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__
from .checkpoint import load_checkpoint, save_checkpoint, verify_vocabularies
from .countries import SETTINGS, build_countries, load_raw, read_queries, write_queries
from .data import load_store, write_triples
from .evaluation import auc_pr, evaluate_link_prediction
from .exceptions import HolokgError, UnknownEntity, UnknownRelation
from .memory import capacity_sweep, sweep_csv
from .models import FAMILIES, ModelSpec, probability, score_all_candidates, score_batch, sigmoid
from .training import TrainConfig, train


def _git_describe() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True,
            text=True,
            timeout=10,
        )
        if out.returncode == 0:
            return out.stdout.strip()
    except OSError:
        pass
    return "unknown"


def _thread_limit(n: int | None):
    """Cap BLAS/FFT worker threads for the duration of a command."""
    try:
        from threadpoolctl import threadpool_limits

        return threadpool_limits(limits=n)
    except ImportError:  # pragma: no cover - threadpoolctl ships with scipy stacks
        import contextlib

        return contextlib.nullcontext()


def _read_config_file(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").split("\n"), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise click.UsageError(f"{path}:{line_no}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _apply_config_file(ctx: click.Context, values: dict) -> dict:
    """Fill non-flag parameters from the config file; flags win."""
    path = values.get("config")
    if not path:
        return values
    file_values = _read_config_file(path)
    params = {p.name: p for p in ctx.command.params}
    for key, raw in file_values.items():
        if key not in params or key == "config":
            raise click.UsageError(f"unknown config key {key!r} in {path}")
        if ctx.get_parameter_source(key) == click.core.ParameterSource.COMMANDLINE:
            continue
        values[key] = params[key].type.convert(raw, params[key], ctx)
    return values


def _write_manifest(out_dir: Path, command: str, resolved: dict) -> None:
    manifest = {
        "command": command,
        "config": {k: (str(v) if isinstance(v, Path) else v) for k, v in resolved.items()},
        "seed": resolved.get("seed"),
        "git_describe": _git_describe(),
        "holokg_version": __version__,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _fail(message: str, code: int = 1):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


@click.group()
@click.version_option(version=__version__)
def main():
    """Knowledge-graph embedding trainer, evaluator, and memory demo."""


_data_options = [
    click.option("--train", "train_path", type=click.Path(exists=True, dir_okay=False), required=True, help="Training triples TSV."),
    click.option("--valid", "valid_path", type=click.Path(exists=True, dir_okay=False), default=None, help="Validation triples TSV."),
    click.option("--test", "test_path", type=click.Path(exists=True, dir_okay=False), default=None, help="Test triples TSV."),
]


def data_options(fn):
    for opt in reversed(_data_options):
        fn = opt(fn)
    return fn


@main.command("train")
@click.option("--config", type=click.Path(exists=True, dir_okay=False), default=None, help="Flat key=value config file; flags override.")
@click.option("--model", type=click.Choice(FAMILIES), required=True, help="Model family.")
@click.option("--dim", type=int, default=150, show_default=True, help="Entity embedding dimension.")
@click.option("--ermlp-hidden", type=int, default=200, show_default=True, help="Hidden width (ermlp only).")
@click.option("--transe-norm", type=click.Choice(["l1", "l2"]), default="l2", show_default=True)
@data_options
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True, help="Output directory.")
@click.option("--loss", type=click.Choice(["ranking", "logistic"]), default="ranking", show_default=True)
@click.option("--margin", type=float, default=0.2, show_default=True)
@click.option("--l2", type=float, default=0.0, show_default=True, help="L2 regularization weight (logistic loss).")
@click.option("--lr", type=float, default=0.1, show_default=True, help="AdaGrad learning rate.")
@click.option("--adagrad-eps", type=float, default=1e-8, show_default=True)
@click.option("--negatives", type=int, default=1, show_default=True, help="Corruptions per positive.")
@click.option("--batch-size", type=int, default=128, show_default=True)
@click.option("--epochs", type=int, default=500, show_default=True, help="Maximum training epochs.")
@click.option("--patience", type=int, default=5, show_default=True, help="Evaluations without improvement before stopping.")
@click.option("--eval-every", type=int, default=10, show_default=True)
@click.option("--eval-sample", type=int, default=None, help="Cap validation triples used for model selection.")
@click.option("--entity-norm", type=float, default=1.0, show_default=True, help="Entity norm cap; 0 disables.")
@click.option("--relation-norm", type=float, default=0.0, show_default=True, help="Relation norm cap; 0 disables.")
@click.option("--hinge-on-raw", is_flag=True, default=False, help="Apply the ranking hinge to raw scores instead of probabilities.")
@click.option("--task", type=click.Choice(["link-prediction", "auc-pr"]), default="link-prediction", show_default=True, help="Validation metric for model selection.")
@click.option("--val-queries", type=click.Path(exists=True, dir_okay=False), default=None, help="Labeled query TSV (auc-pr task).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--threads", type=int, default=None, help="Worker thread cap (default: all cores).")
@click.pass_context
def train_cmd(ctx, **values):
    """Train a model and write model.bin, log.csv, and manifest.json."""
    values = _apply_config_file(ctx, values)
    try:
        store = load_store(values["train_path"], values["valid_path"], values["test_path"])
        spec = ModelSpec(
            family=values["model"],
            dim=values["dim"],
            ermlp_hidden=values["ermlp_hidden"] if values["model"] == "ermlp" else 0,
            transe_norm=values["transe_norm"],
        )
        config = TrainConfig(
            loss=values["loss"],
            margin=values["margin"],
            l2=values["l2"],
            learning_rate=values["lr"],
            adagrad_eps=values["adagrad_eps"],
            negatives=values["negatives"],
            batch_size=values["batch_size"],
            max_epochs=values["epochs"],
            patience=values["patience"],
            eval_every=values["eval_every"],
            eval_sample=values["eval_sample"],
            entity_norm=values["entity_norm"] or None,
            relation_norm=values["relation_norm"] or None,
            hinge_on_raw=values["hinge_on_raw"],
            seed=values["seed"],
        )
        val_queries = None
        if values["task"] == "auc-pr":
            if not values["val_queries"]:
                raise click.UsageError("--task auc-pr requires --val-queries")
            val_queries = read_queries(values["val_queries"], store)
        out_dir = Path(values["out_dir"])
        out_dir.mkdir(parents=True, exist_ok=True)
        with _thread_limit(values["threads"]):
            result = train(spec, config, store, val_queries=val_queries)
        save_checkpoint(out_dir / "model.bin", spec, result.params, store.entities, store.relations)
        (out_dir / "log.csv").write_text(result.log_csv(), encoding="utf-8")
        _write_manifest(out_dir, "train", values)
        metric = "" if result.best_metric is None else f" best val {result.best_metric:.4f} @ epoch {result.best_epoch}"
        click.echo(f"trained {values['model']} for {len(result.log)} epochs;{metric}")
        click.echo(f"wrote {out_dir / 'model.bin'}")
    except ValueError as exc:
        raise click.UsageError(str(exc))
    except HolokgError as exc:
        _fail(str(exc))


@main.command("evaluate")
@click.option("--config", type=click.Path(exists=True, dir_okay=False), default=None, help="Flat key=value config file; flags override.")
@click.option("--checkpoint", type=click.Path(exists=True, dir_okay=False), required=True)
@data_options
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
@click.option("--task", type=click.Choice(["link-prediction", "auc-pr"]), default="link-prediction", show_default=True)
@click.option("--queries", type=click.Path(exists=True, dir_okay=False), default=None, help="Labeled query TSV (auc-pr task).")
@click.option("--split", type=click.Choice(["valid", "test"]), default="test", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--threads", type=int, default=None)
@click.pass_context
def evaluate_cmd(ctx, **values):
    """Rank a test split (or score labeled queries) with a trained model."""
    values = _apply_config_file(ctx, values)
    try:
        spec, params, header = load_checkpoint(values["checkpoint"])
        store = load_store(values["train_path"], values["valid_path"], values["test_path"])
        verify_vocabularies(header, store.entities, store.relations)
        out_dir = Path(values["out_dir"])
        out_dir.mkdir(parents=True, exist_ok=True)
        if values["task"] == "auc-pr":
            if not values["queries"]:
                raise click.UsageError("--task auc-pr requires --queries")
            queries = read_queries(values["queries"], store)
            S = np.array([q.subject for q in queries], dtype=np.int64)
            P = np.array([q.predicate for q in queries], dtype=np.int64)
            O = np.array([q.object for q in queries], dtype=np.int64)
            labels = np.array([q.label for q in queries])
            with _thread_limit(values["threads"]):
                ap = auc_pr(score_batch(spec, params, S, P, O), labels)
            payload = {"auc_pr": ap, "n_queries": len(queries)}
            (out_dir / "report.json").write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
            click.echo(f"AUC-PR {ap:.4f} over {len(queries)} queries")
        else:
            with _thread_limit(values["threads"]):
                report = evaluate_link_prediction(spec, params, store, split=values["split"])
            (out_dir / "report.json").write_text(report.to_json() + "\n", encoding="utf-8")
            table = report.to_table(label=spec.family)
            (out_dir / "report.txt").write_text(table + "\n", encoding="utf-8")
            click.echo(table)
        _write_manifest(out_dir, "evaluate", values)
    except HolokgError as exc:
        _fail(str(exc))


@main.command("predict")
@click.option("--checkpoint", type=click.Path(exists=True, dir_okay=False), required=True)
@data_options
@click.option("--s", "subject", required=True, help="Subject name, or '?' for the open slot.")
@click.option("--p", "predicate", required=True, help="Relation name, or '?' for the open slot.")
@click.option("--o", "obj", required=True, help="Object name, or '?' for the open slot.")
@click.option("-k", "top_k", type=int, default=10, show_default=True, help="Completions to print.")
@click.option("--threads", type=int, default=None)
def predict_cmd(**values):
    """Print top-k completions for a triple with one '?' slot."""
    try:
        spec, params, header = load_checkpoint(values["checkpoint"])
        store = load_store(values["train_path"], values["valid_path"], values["test_path"])
        verify_vocabularies(header, store.entities, store.relations)
        names = (values["subject"], values["predicate"], values["obj"])
        open_slots = [i for i, n in enumerate(names) if n == "?"]
        if len(open_slots) != 1:
            raise click.UsageError("exactly one of --s/--p/--o must be '?'")
        slot = open_slots[0]

        def entity_id(name: str) -> int:
            eid = store.entities.id_of(name)
            if eid is None:
                raise UnknownEntity(f"unknown entity {name!r}")
            return eid

        def relation_id(name: str) -> int:
            rid = store.relations.id_of(name)
            if rid is None:
                raise UnknownRelation(f"unknown relation {name!r}")
            return rid

        with _thread_limit(values["threads"]):
            if slot == 1:
                s, o = entity_id(names[0]), entity_id(names[2])
                P = np.arange(store.n_relations, dtype=np.int64)
                scores = score_batch(spec, params, np.full_like(P, s), P, np.full_like(P, o))
                labels = store.relations.names
            else:
                p = relation_id(names[1])
                if slot == 0:
                    fixed, which = entity_id(names[2]), "subject"
                else:
                    fixed, which = entity_id(names[0]), "object"
                scores = score_all_candidates(spec, params, p, fixed, which)
                labels = store.entities.names
        probs = sigmoid(scores)
        k = min(values["top_k"], len(labels))
        top = np.argsort(-probs, kind="stable")[:k]
        for idx in top:
            click.echo(f"{labels[int(idx)]}\t{probs[int(idx)]:.6f}")
    except (UnknownEntity, UnknownRelation) as exc:
        _fail(str(exc), code=2)
    except HolokgError as exc:
        _fail(str(exc))


@main.command("memdemo")
@click.option("--d", "dim", type=int, default=1024, show_default=True, help="Vector dimension.")
@click.option("--k", "loads", type=int, multiple=True, help="Stored-pair counts (repeatable; default 1 5 20 80).")
@click.option("--trials", type=int, default=100, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
def memdemo_cmd(**values):
    """Run the seeded associative-memory capacity sweep and write CSV."""
    ks = values["loads"] or (1, 5, 20, 80)
    rows = capacity_sweep(values["dim"], tuple(ks), values["trials"], values["seed"])
    out_dir = Path(values["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "memdemo.csv").write_text(sweep_csv(rows), encoding="utf-8")
    _write_manifest(out_dir, "memdemo", values)
    for k in ks:
        sub = [r for r in rows if r["k"] == k]
        if sub:
            acc = 100.0 * sum(r["cleanup_correct"] for r in sub) / len(sub)
            cos = sum(r["cosine"] for r in sub) / len(sub)
            click.echo(f"d={values['dim']} k={k}: cleanup accuracy {acc:.1f}%, mean cosine {cos:.3f}")
    click.echo(f"wrote {out_dir / 'memdemo.csv'}")


@main.command("build-countries")
@click.option("--raw", "raw_path", type=click.Path(exists=True, dir_okay=False), default=None, help="Raw countries JSON (default: packaged fixture).")
@click.option("--setting", type=click.Choice(SETTINGS), required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
def build_countries_cmd(**values):
    """Materialize the countries benchmark splits and region queries."""
    try:
        raw = load_raw(values["raw_path"])
        split = build_countries(raw, values["setting"], values["seed"])
        out_dir = Path(values["out_dir"])
        out_dir.mkdir(parents=True, exist_ok=True)
        store = split.store
        for name in ("train", "valid", "test"):
            write_triples(out_dir / f"{name}.tsv", (store.names_of(t) for t in store.split(name)))
        write_queries(out_dir / "queries_valid.tsv", store, split.valid_queries)
        write_queries(out_dir / "queries_test.tsv", store, split.test_queries)
        _write_manifest(out_dir, "build-countries", values)
        click.echo(
            f"countries {split.setting}: {store.train.shape[0]} train / {store.valid.shape[0]} valid / "
            f"{store.test.shape[0]} test triples, {store.n_entities} entities"
        )
    except (ValueError, OSError) as exc:
        _fail(str(exc))
    except HolokgError as exc:
        _fail(str(exc))


if __name__ == "__main__":
    main()
