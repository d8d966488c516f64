"""Command-line interface: ``unityforest <subcommand> [options]``.

Settings come from command-line flags, then an optional INI file
(``--config``, section ``[unityforest]``, keys spelled like the long flags
with dashes or underscores), then built-in defaults.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .core import (
    CLASSIFICATION, REGRESSION, Schema, ValidationError, default_hyperparams, read_csv,
    read_table,
)
from .crtr import CrtrReport, NoCrtr, crtrs, export_crtr
from .evalsim import (
    PERM, UNITY, LearnerConfig, compare_methods, cross_validate, summarize_cv, summarize_simulation,
    vim_auc_evaluation, write_rows_csv,
)
from .forest import REFERENCE_RF, UFO, Forest, load_forest, save_forest, train
from .importance import permutation_vim_baseline, unity_vim, write_vim_csv

log = logging.getLogger("unityforest")

CONFIG_SECTION = "unityforest"
HP_FLAGS = {
    "num_trees": int,
    "n_cand_trees": int,
    "max_depth_root": int,
    "prop_var": float,
    "fract_n": float,
    "mtry": int,
    "prop_best_splits": float,
    "min_node_size": int,
}
# non-hyperparameter settings that a config file may also provide
SETTING_TYPES = {
    "seed": int, "workers": int, "task": str, "outcome": str, "schema": str, "top_k": int,
    "folds": int, "repeats": int, "replicates": int, "n": str, "methods": str, "dgp": str,
    "nominal": str, **HP_FLAGS,
}
DEFAULTS = {"seed": 0, "workers": 1, "task": CLASSIFICATION, "top_k": 5, "folds": 5, "repeats": 5,
            "replicates": 100, "n": "100,1000", "methods": UNITY, "dgp": "dgp1"}


class CliError(Exception):
    pass


# ---------------------------------------------------------------------------
# argument handling


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI file with a [unityforest] section")
    p.add_argument("--seed", type=int, help="random seed (default 0)")
    p.add_argument("--workers", type=int, help="parallel worker threads (default 1)")
    p.add_argument("-v", "--verbose", action="count", default=0, help="debug logging, including per-tree timing")


def _add_data(p: argparse.ArgumentParser, required: bool = True) -> None:
    p.add_argument("--data", required=required, help="CSV file with a header row")
    p.add_argument("--schema", help="JSON schema: outcome, task, nominal, classes, categories")
    p.add_argument("--outcome", help="outcome column (default: last column)")
    p.add_argument("--task", choices=[CLASSIFICATION, REGRESSION])
    p.add_argument("--nominal", help="comma-separated nominal covariate columns")


def _add_hp(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("hyperparameters")
    for name, typ in HP_FLAGS.items():
        g.add_argument("--" + name.replace("_", "-"), dest=name, type=typ)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="unityforest", description="Unity forests: training, importance and CRTRs.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a forest and write the model file")
    _add_common(p)
    _add_data(p)
    _add_hp(p)
    p.add_argument("--model", "--out", dest="model", required=True, help="model file to write")
    p.add_argument("--method", choices=[UFO, REFERENCE_RF], default=UFO)

    p = sub.add_parser("predict", help="predict rows of a CSV with a trained model")
    _add_common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True, help="CSV whose header names the model covariates")
    p.add_argument("--out", required=True, help="predictions CSV")

    p = sub.add_parser("vim", help="unity variable importance of a trained model")
    _add_common(p)
    _add_data(p)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True, help="importance CSV (a bar chart is written next to it)")
    p.add_argument("--perm", action="store_true", help="add the OOB permutation importance column")
    p.add_argument("--no-plot", action="store_true")

    p = sub.add_parser("crtr", help="covariate-representative tree roots")
    _add_common(p)
    _add_data(p)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--top-k", dest="top_k", type=int, help="covariates with the largest importance (default 5)")
    p.add_argument("--covariates", help="comma-separated covariate names (overrides --top-k)")
    p.add_argument("--no-plot", action="store_true")

    p = sub.add_parser("benchmark", help="cross-validated comparison of UFO and the reference forest")
    _add_common(p)
    _add_hp(p)
    p.add_argument("--data", action="append", required=True,
                   help="CSV file (repeatable); a sibling <name>.schema.json is used when present")
    p.add_argument("--schema", help="schema applied to datasets without their own schema file")
    p.add_argument("--outcome")
    p.add_argument("--task", choices=[CLASSIFICATION])
    p.add_argument("--nominal")
    p.add_argument("--folds", type=int)
    p.add_argument("--repeats", type=int)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--no-plot", action="store_true")

    p = sub.add_parser("simulate", help="importance AUCs on simulated data")
    _add_common(p)
    _add_hp(p)
    p.add_argument("--dgp", choices=["dgp1", "dgp2"])
    p.add_argument("--n", help="comma-separated sample sizes (default 100,1000)")
    p.add_argument("--replicates", type=int, help="replicates per sample size (default 100)")
    p.add_argument("--methods", help=f"comma-separated subset of {UNITY},{PERM} (default {UNITY})")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--no-plot", action="store_true")
    return parser


def read_config(path: str | None) -> dict:
    if not path:
        return {}
    cp = configparser.ConfigParser()
    if not cp.read(path, encoding="utf-8"):
        raise CliError(f"cannot read config file {path}")
    if not cp.has_section(CONFIG_SECTION):
        return {}
    out = {}
    for key, raw in cp.items(CONFIG_SECTION):
        k = key.replace("-", "_")
        if k not in SETTING_TYPES:
            raise CliError(f"unknown config key {key!r}")
        try:
            out[k] = SETTING_TYPES[k](raw)
        except ValueError:
            raise CliError(f"config key {key!r}: cannot parse {raw!r}") from None
    return out


def resolve(args: argparse.Namespace) -> dict:
    """Merge settings: command line over config file over defaults."""
    cfg = read_config(getattr(args, "config", None))
    out = dict(DEFAULTS)
    out.update(cfg)
    for k, v in vars(args).items():
        if v is not None:
            out[k] = v
    return out


def hp_overrides(s: dict) -> dict:
    return {k: s[k] for k in HP_FLAGS if s.get(k) is not None}


def _schema(s: dict, data_path: str | None = None) -> Schema:
    path = s.get("schema")
    if data_path is not None:
        sibling = Path(data_path).with_suffix(".schema.json")
        if sibling.exists():
            path = str(sibling)
    if path:
        sch = Schema.load(path)
    else:
        sch = Schema()
    if s.get("outcome"):
        sch.outcome = s["outcome"]
    if s.get("task") and not path:
        sch.task = s["task"]
    if s.get("nominal"):
        sch.nominal = tuple(x.strip() for x in s["nominal"].split(",") if x.strip())
    return sch


def _model_schema(forest: Forest) -> Schema:
    return Schema(
        outcome=forest.outcome,
        task=forest.task.kind,
        nominal=tuple(c.name for c in forest.covariates if c.is_nominal),
        classes=tuple(forest.task.classes) if forest.task.is_classification else None,
        categories={c.name: c.categories for c in forest.covariates if c.is_nominal},
    )


def _training_data(s: dict, forest: Forest):
    schema = _model_schema(forest)
    if s.get("outcome"):
        schema.outcome = s["outcome"]
    ds = read_csv(s["data"], schema)
    forest.check_dataset(ds)
    return ds


def _write_csv(path: Path, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(rows)


# ---------------------------------------------------------------------------
# subcommands


def cmd_train(s: dict) -> int:
    schema = _schema(s)
    ds = read_csv(s["data"], schema)
    hp = default_hyperparams(ds.p, **hp_overrides(s), seed=s["seed"])
    log.info("training %d trees on n=%d, p=%d (%s)", hp.num_trees, ds.n, ds.p, s["method"])
    start = time.perf_counter()

    def on_tree(t, sec):
        log.debug("tree %d built in %.4f s", t, sec)

    forest = train(ds, hp, workers=s["workers"], method=s["method"], on_tree=on_tree)
    elapsed = time.perf_counter() - start
    forest = dataclasses.replace(forest, outcome=schema.outcome or read_table(s["data"])[0][-1])
    log.info("trained in %.2f s (%.4f s per tree)", elapsed, elapsed / hp.num_trees)
    log.info("OOB %s: %.6g", "error rate" if ds.task.is_classification else "MSE", forest.oob_error(ds))
    save_forest(forest, s["model"])
    log.info("model written to %s", s["model"])
    return 0


def cmd_predict(s: dict) -> int:
    forest = load_forest(s["model"])
    header, rows = read_table(s["data"])
    header = [h.strip() for h in header]
    missing = [n for n in forest.names if n not in header]
    if missing:
        raise ValidationError(f"prediction data lacks covariates {missing}")
    cols = [header.index(n) for n in forest.names]
    X = forest.encode_labels([[row[c] for c in cols] for row in rows])
    out = []
    if forest.task.is_classification:
        P = forest.predict_proba(X)
        lab = forest.predict_label(X)
        out.append(["row", "prediction"] + [f"prob_{c}" for c in forest.task.classes])
        for i in range(len(X)):
            out.append([i + 1, forest.task.classes[lab[i] - 1]] + [repr(float(p)) for p in P[i]])
    else:
        pred = forest.predict_regression(X)
        out.append(["row", "prediction"])
        out.extend([i + 1, repr(float(v))] for i, v in enumerate(pred))
    _write_csv(Path(s["out"]), out)
    log.info("%d predictions written to %s", len(X), s["out"])
    return 0


def cmd_vim(s: dict) -> int:
    forest = load_forest(s["model"])
    ds = _training_data(s, forest)
    res = unity_vim(forest, ds, seed=s["seed"], workers=s["workers"])
    base = permutation_vim_baseline(forest, ds, seed=s["seed"], workers=s["workers"]) if s.get("perm") else None
    out = Path(s["out"])
    write_vim_csv(out, res, base)
    log.info("importance written to %s", out)
    if not s.get("no_plot"):
        from .plotting import plot_vim

        plot_vim(res, out.with_suffix(".png"))
    return 0


def _safe(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in name)


def cmd_crtr(s: dict) -> int:
    forest = load_forest(s["model"])
    ds = _training_data(s, forest)
    if s.get("covariates"):
        names = [x.strip() for x in s["covariates"].split(",") if x.strip()]
        unknown = [n for n in names if n not in forest.names]
        if unknown:
            raise ValidationError(f"unknown covariates {unknown}")
        cols = [forest.names.index(n) for n in names]
    else:
        res = unity_vim(forest, ds, seed=s["seed"], workers=s["workers"])
        cols = list(np.argsort(res.ranks())[: s["top_k"]])
    outdir = Path(s["out"])
    outdir.mkdir(parents=True, exist_ok=True)
    index = [["covariate", "available", "tree_id", "files"]]
    for rep in crtrs(forest, ds, [int(j) for j in cols], workers=s["workers"]):
        stem = outdir / f"crtr_{_safe(rep.name)}"
        files = export_crtr(rep, stem)
        if isinstance(rep, NoCrtr):
            log.warning("%s: %s", rep.name, rep.reason)
            index.append([rep.name, "false", "", ";".join(f.name for f in files)])
            continue
        if not s.get("no_plot"):
            from .plotting import plot_crtr

            files.append(plot_crtr(rep, Path(f"{stem}.png")))
        index.append([rep.name, "true", rep.tree_id, ";".join(f.name for f in files)])
        log.info("CRTR of %s: tree %d", rep.name, rep.tree_id)
    _write_csv(outdir / "crtr_index.csv", index)
    return 0


def cmd_benchmark(s: dict) -> int:
    outdir = Path(s["out"])
    outdir.mkdir(parents=True, exist_ok=True)
    per_dataset, names, rows = [], [], [["dataset", "method", "brier", "auc", "acc"]]
    failures = 0
    for path in s["data"]:
        name = Path(path).stem
        try:
            ds = read_csv(path, _schema(s, path))
            result = {}
            for method in (UFO, REFERENCE_RF):
                reps = cross_validate(ds, LearnerConfig(method, hp_overrides(s)), folds=s["folds"],
                                      repeats=s["repeats"], seed=s["seed"], workers=s["workers"])
                result[method] = summarize_cv(reps)
                rows.append([name, method] + [repr(result[method][m]) for m in ("brier", "auc", "acc")])
            per_dataset.append(result)
            names.append(name)
            log.info("%s: AUC ufo %.4f, rf %.4f", name, result[UFO]["auc"], result[REFERENCE_RF]["auc"])
        except Exception as exc:  # one bad dataset must not stop the run
            failures += 1
            log.error("%s failed: %s", path, exc)
    _write_csv(outdir / "per_dataset.csv", rows)
    write_rows_csv(outdir / "summary.csv", compare_methods(per_dataset))
    if per_dataset and not s.get("no_plot"):
        from .plotting import plot_benchmark

        plot_benchmark(names, [d[UFO]["auc"] for d in per_dataset], [d[REFERENCE_RF]["auc"] for d in per_dataset],
                       "AUC", outdir / "benchmark_auc.png")
    if failures:
        log.warning("%d of %d datasets failed", failures, len(s["data"]))
    return 0 if per_dataset or not s["data"] else 1


def cmd_simulate(s: dict) -> int:
    sizes = [int(x) for x in str(s["n"]).split(",") if x.strip()]
    methods = [m.strip() for m in s["methods"].split(",") if m.strip()]
    bad = set(methods) - {UNITY, PERM}
    if bad:
        raise ValidationError(f"unknown methods {sorted(bad)}")
    outdir = Path(s["out"])
    outdir.mkdir(parents=True, exist_ok=True)

    def progress(n, r, total):
        log.info("n=%d replicate %d/%d done", n, r + 1, total)

    rows = vim_auc_evaluation(s["dgp"], sizes, s["replicates"], methods, seed=s["seed"],
                              overrides=hp_overrides(s), workers=s["workers"], progress=progress)
    write_rows_csv(outdir / "results.csv", rows)
    summary = summarize_simulation(rows)
    write_rows_csv(outdir / "summary.csv", summary)
    if not s.get("no_plot"):
        from .plotting import plot_simulation

        plot_simulation(summary, outdir / "auc.png")
    return 0


COMMANDS = {
    "train": cmd_train, "predict": cmd_predict, "vim": cmd_vim, "crtr": cmd_crtr,
    "benchmark": cmd_benchmark, "simulate": cmd_simulate,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.INFO
    logging.basicConfig(level=level, format="%(levelname)s %(message)s", stream=sys.stderr, force=True)
    try:
        settings = resolve(args)
        return COMMANDS[args.command](settings)
    except (ValidationError, CliError) as exc:
        log.error("%s", exc)
        return 2
    except OSError as exc:
        log.error("I/O error: %s", exc)
        return 3


if __name__ == "__main__":
    sys.exit(main())
