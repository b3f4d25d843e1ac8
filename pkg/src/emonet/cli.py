"""Command-line entry point: generate -> clean -> train -> ablate -> report.

Exit codes: 0 success, 2 config error, 3 numeric failure, 4 I/O error.
Concurrent runs against the same output directory are rejected through a
lock file.  Heavy imports happen inside commands so --threads can cap the
BLAS pool before numpy loads.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from contextlib import contextmanager
from pathlib import Path

OUT_ROOT_ENV = "EMONET_OUT"
LOCK_NAME = ".emonet.lock"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4


class LockHeldError(OSError):
    pass


@contextmanager
def output_lock(out: Path):
    out.mkdir(parents=True, exist_ok=True)
    lock = out / LOCK_NAME
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise LockHeldError(f"output directory {out} is in use (remove {lock} if stale)")
    try:
        os.write(fd, f"{os.getpid()}\n".encode())
        os.close(fd)
        yield
    finally:
        try:
            lock.unlink()
        except FileNotFoundError:
            pass


def _add_common(parser):
    parser.add_argument("--config", type=Path, help="JSON run configuration")
    parser.add_argument("--seed", type=int, help="master seed (overrides config)")
    parser.add_argument("--out", type=Path, help=f"output directory (default ${OUT_ROOT_ENV}/<command>)")
    parser.add_argument(
        "--mode",
        choices=["baseline", "emo_p", "emo_r"],
        default="baseline",
        help="training strategy: plain, prune flagged samples, or reweight by quality",
    )
    parser.add_argument("--threads", type=int, help="cap BLAS threads")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="emonet",
        description="Label-noise-robust decoding of spike-train firing-rate matrices",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("generate", "synthesize a dataset directory"),
        ("clean", "estimate label quality and flag suspect labels"),
        ("train", "train the classifier under a mode, write checkpoint and metrics"),
        ("cv", "stratified cross-validation protocol"),
        ("ablate", "pruning-ratio sweep against random removal"),
        ("report", "aggregate results JSONs into a comparison table"),
    ]:
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        if name == "report":
            p.add_argument("results_dir", type=Path, help="directory of results JSON files")
    return parser


def _resolve_out(args) -> Path:
    if args.out is not None:
        return args.out
    root = os.environ.get(OUT_ROOT_ENV)
    if root:
        return Path(root) / args.command
    from .errors import ConfigError

    raise ConfigError(f"no output directory: pass --out or set ${OUT_ROOT_ENV}")


def _load_run_config(args):
    from .config import RunConfig, load_config

    cfg = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def _load_dataset(cfg):
    from .dataset import load_dataset
    from .errors import ConfigError

    if not cfg.dataset.path:
        raise ConfigError("config has no dataset.path")
    return load_dataset(cfg.dataset.path)


def _dataset_label(cfg) -> str:
    return Path(cfg.dataset.path).name if cfg.dataset.path else "dataset"


def _write_json(doc: dict, path: Path):
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def cmd_generate(args, out: Path) -> int:
    from .dataset import save_dataset
    from .pipeline import build_synthetic

    cfg = _load_run_config(args)
    ds = build_synthetic(cfg.generate, cfg.seed)
    save_dataset(ds, out)
    flips = 0 if ds.noise is None else ds.noise.get("realized_flips", 0)
    print(
        f"generated {ds.n_samples} samples x {ds.features.shape[1]}x{ds.features.shape[2]} "
        f"({ds.n_classes} classes, {flips} label flips) -> {out}"
    )
    return EXIT_OK


def cmd_clean(args, out: Path) -> int:
    from .cleaning import write_cleaning_csv, write_joint_report
    from .pipeline import run_cleaning

    cfg = _load_run_config(args)
    ds = _load_dataset(cfg)
    result = run_cleaning(ds, cfg.cleaning, cfg.seed)
    write_cleaning_csv(result, out / "clean.csv")
    write_joint_report(result, out / "confident_joint.json")
    print(
        f"cleaned {ds.n_samples} samples: {int(result.flags.sum())} flagged, "
        f"{result.joint.n_excluded} unconfident -> {out}"
    )
    return EXIT_OK


def cmd_train(args, out: Path) -> int:
    from .cleaning import write_cleaning_csv, write_joint_report
    from .dataset import load_dataset
    from .figures import plot_training_curve
    from .harness import results_envelope, write_results_json
    from .metrics import compute_metrics
    from .mlp import predict, save_params, write_training_log
    from .pipeline import train_with_mode
    from .weighting import write_weights_csv
    from .config import config_echo

    cfg = _load_run_config(args)
    ds = _load_dataset(cfg)
    artifacts = train_with_mode(ds, args.mode, cfg.model, cfg.cleaning, cfg.weighting, cfg.seed)

    save_params(artifacts.params, out / "checkpoint.bin")
    write_training_log(artifacts.log, out / "training_log.csv")
    plot_training_curve(artifacts.log, out / "training_curve.png", title=f"train ({args.mode})")
    write_weights_csv(artifacts.weights, out / "weights.csv")
    if artifacts.cleaning is not None:
        write_cleaning_csv(artifacts.cleaning, out / "clean.csv")
        write_joint_report(artifacts.cleaning, out / "confident_joint.json")

    if cfg.dataset.eval_path:
        eval_ds = load_dataset(cfg.dataset.eval_path)
        eval_on = "eval"
    else:
        eval_ds = ds
        eval_on = "train"
    preds, _ = predict(artifacts.params, eval_ds.flat_features())
    metrics = compute_metrics(preds, eval_ds.noisy_labels, eval_ds.n_classes)

    doc = results_envelope(
        "train", f"train-{args.mode}-{_dataset_label(cfg)}", cfg.seed, config_echo(cfg)
    )
    doc.update(
        {
            "mode": args.mode,
            "dataset": _dataset_label(cfg),
            "evaluated_on": eval_on,
            "n_train": ds.n_samples,
            "n_pruned": artifacts.weights.n_pruned,
            "final_loss": artifacts.log[-1].loss,
            "metrics": metrics.to_dict(),
        }
    )
    write_results_json(doc, out / "train.json")
    print(
        f"trained {args.mode} on {ds.n_samples} samples: "
        f"{eval_on} accuracy {metrics.accuracy:.4f}, macro-F1 {metrics.macro_f1:.4f} -> {out}"
    )
    return EXIT_OK


def cmd_cv(args, out: Path) -> int:
    import csv

    import numpy as np

    from .config import config_echo
    from .harness import cv_to_json, ten_fold_cv, write_results_json
    from .pipeline import factory_from_section

    cfg = _load_run_config(args)
    ds = _load_dataset(cfg)
    X = ds.flat_features(np.float32)
    result = ten_fold_cv(
        X,
        ds.noisy_labels,
        ds.n_classes,
        factory_from_section(cfg.model, X.shape[1], ds.n_classes),
        mode=args.mode,
        aux_factory=factory_from_section(cfg.cleaning.aux, X.shape[1], ds.n_classes),
        cl_opts=cfg.cleaning.opts(cfg.weighting.renormalize_mean),
        seed=cfg.seed,
        n_folds=cfg.harness.cv_folds,
    )
    doc = cv_to_json(result, f"cv-{args.mode}-{_dataset_label(cfg)}", cfg.seed, config_echo(cfg))
    doc["dataset"] = _dataset_label(cfg)
    write_results_json(doc, out / "cv.json")
    with open(out / "cv.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["fold", "accuracy", "macro_f1"])
        for i, m in enumerate(result.per_fold):
            writer.writerow([i, repr(m.accuracy), repr(m.macro_f1)])
    print(
        f"{cfg.harness.cv_folds}-fold CV ({args.mode}): "
        f"accuracy {result.mean_accuracy:.4f}, macro-F1 {result.mean_macro_f1:.4f} "
        f"({result.sd_macro_f1:.4f}) -> {out}"
    )
    return EXIT_OK


def cmd_ablate(args, out: Path) -> int:
    import numpy as np

    from .config import config_echo
    from .figures import plot_ablation
    from .harness import ablation_sweep, ablation_to_json, write_ablation_csv, write_results_json
    from .pipeline import factory_from_section

    cfg = _load_run_config(args)
    ds = _load_dataset(cfg)
    X = ds.flat_features(np.float32)
    result = ablation_sweep(
        X,
        ds.noisy_labels,
        ds.n_classes,
        factory_from_section(cfg.model, X.shape[1], ds.n_classes),
        factory_from_section(cfg.cleaning.aux, X.shape[1], ds.n_classes),
        ratios=cfg.harness.ratios,
        n_seeds=cfg.harness.seeds,
        cl_opts=cfg.cleaning.opts(cfg.weighting.renormalize_mean),
        test_fraction=cfg.harness.test_fraction,
        seed=cfg.seed,
    )
    doc = ablation_to_json(result, f"ablate-{_dataset_label(cfg)}", cfg.seed, config_echo(cfg))
    doc["dataset"] = _dataset_label(cfg)
    write_results_json(doc, out / "ablation.json")
    write_ablation_csv(result.points, out / "ablation.csv")
    plot_ablation(result.points, out / "ablation.png", title=f"Pruning ablation: {_dataset_label(cfg)}")
    baseline = result.points[0]
    print(
        f"ablation over {len(result.points)} ratios x {result.n_seeds} seeds "
        f"(baseline accuracy {baseline.mean_cl:.4f}) -> {out}"
    )
    return EXIT_OK


def cmd_report(args, out: Path) -> int:
    import csv

    from .errors import ConfigError, DataFormatError
    from .figures import plot_report
    from .harness import RESULTS_FORMAT_VERSION

    docs = []
    for path in sorted(args.results_dir.glob("**/*.json")):
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError:
            continue
        if isinstance(doc, dict) and doc.get("experiment") in ("train", "cv"):
            docs.append((path, doc))
    if not docs:
        raise ConfigError(f"no train/cv results JSONs under {args.results_dir}")

    versions = {doc.get("format_version") for _, doc in docs}
    if versions != {RESULTS_FORMAT_VERSION}:
        raise DataFormatError(
            f"mixed or unsupported results format versions {sorted(map(str, versions))}; "
            f"this build reads {RESULTS_FORMAT_VERSION}"
        )

    # accuracy/f1 per (dataset, experiment, mode); multiple runs average
    cells: dict = {}
    for _, doc in docs:
        key = (doc.get("dataset", "dataset"), doc["experiment"])
        mode = doc.get("mode", "baseline")
        if doc["experiment"] == "cv":
            acc, f1 = doc["mean_accuracy"], doc["mean_macro_f1"]
        else:
            acc, f1 = doc["metrics"]["accuracy"], doc["metrics"]["macro_f1"]
        cells.setdefault(key, {}).setdefault(mode, []).append((acc, f1))

    rows = []
    for (dataset, experiment), by_mode in sorted(cells.items()):
        row = {"dataset": dataset, "experiment": experiment}
        for mode, values in by_mode.items():
            row[f"{mode}_accuracy"] = float(sum(v[0] for v in values) / len(values))
            row[f"{mode}_macro_f1"] = float(sum(v[1] for v in values) / len(values))
        rows.append(row)

    fields = ["dataset", "experiment"]
    for mode in ("baseline", "emo_p", "emo_r"):
        fields += [f"{mode}_accuracy", f"{mode}_macro_f1"]
    with open(out / "report.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row.get(k, "") for k in fields})

    lines = ["| " + " | ".join(fields) + " |", "|" + "---|" * len(fields)]
    for row in rows:
        cells_md = [row["dataset"], row["experiment"]]
        base_acc = row.get("baseline_accuracy")
        base_f1 = row.get("baseline_macro_f1")
        for mode in ("baseline", "emo_p", "emo_r"):
            for metric, base in (("accuracy", base_acc), ("macro_f1", base_f1)):
                value = row.get(f"{mode}_{metric}")
                if value is None:
                    cells_md.append("")
                elif mode != "baseline" and base is not None and value > base:
                    cells_md.append(f"**{value:.4f}**")
                else:
                    cells_md.append(f"{value:.4f}")
        lines.append("| " + " | ".join(cells_md) + " |")
    (out / "report.md").write_text("\n".join(lines) + "\n")
    plot_report(rows, out / "report.png")
    print(f"aggregated {len(docs)} results into {len(rows)} rows -> {out}")
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "clean": cmd_clean,
    "train": cmd_train,
    "cv": cmd_cv,
    "ablate": cmd_ablate,
    "report": cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)

    from .errors import ConfigError, DataFormatError, NumericError

    try:
        out = _resolve_out(args)
        with output_lock(out):
            return COMMANDS[args.command](args, out)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataFormatError, LockHeldError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
