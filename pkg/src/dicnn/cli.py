"""Command-line pipeline: preprocess, select, train, evaluate, attack,
compare, reproduce.

Every command reads one flat config file (``--config``, or the path in
``$DICNN_CONFIG``), applies flag overrides, and exchanges data with other
commands only through files under the output directory:

    out/
      data/dataset.npz, data/dataset_meta.json   standardized full dataset
      splits/split.json                          stratified split indices
      reports/preprocess_report.json             cleaning + scaling audit
      checkpoints/feature_mask.json              elimination outcome
      checkpoints/model.json                     trained network
      reports/history.json, eval_*.json, robustness.csv/.svg,
      reports/comparison.md/.csv, manifest.json

Exit codes: 0 success, 2 I/O or input-file problems, 3 configuration
problems, 4 numeric failure during training.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from .attack import FgsmConfig, adversarial_augment, robustness_sweep
from .config import ENV_CONFIG_VAR, RunConfig, RunManifest
from .data import (
    Dataset,
    SplitSpec,
    build_family_subsets,
    build_multifamily_dataset,
    encode_labels,
    impute_or_drop,
    load_csv,
    missing_value_ratio,
    one_hot,
    standardize,
    stratified_split,
)
from .errors import (
    CompatibilityError,
    ConfigError,
    CsvParseError,
    DicnnError,
    NumericError,
    SchemaError,
)
from .metrics import EvalReport, comparison_table, sweep_to_csv, sweep_to_svg
from .nn import (
    DicnnNetwork,
    TrainConfig,
    accuracy,
    default_architecture,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .numkit import derive_seed
from .rfe import FeatureMask, RfeConfig, apply_mask, rfe_select


def artifact_paths(out_dir) -> dict[str, Path]:
    out = Path(out_dir)
    return {
        "dataset": out / "data" / "dataset.npz",
        "dataset_meta": out / "data" / "dataset_meta.json",
        "split": out / "splits" / "split.json",
        "preprocess_report": out / "reports" / "preprocess_report.json",
        "mask": out / "checkpoints" / "feature_mask.json",
        "checkpoint": out / "checkpoints" / "model.json",
        "history": out / "reports" / "history.json",
        "eval_val": out / "reports" / "eval_val.json",
        "eval_train": out / "reports" / "eval_train.json",
        "robustness_csv": out / "reports" / "robustness.csv",
        "robustness_svg": out / "reports" / "robustness.svg",
        "comparison_md": out / "reports" / "comparison.md",
        "comparison_csv": out / "reports" / "comparison.csv",
        "manifest": out / "manifest.json",
    }


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    digest.update(Path(path).read_bytes())
    return digest.hexdigest()


def _save_dataset(paths, dataset: Dataset, positive_class: str | None) -> None:
    paths["dataset"].parent.mkdir(parents=True, exist_ok=True)
    np.savez(paths["dataset"], features=dataset.features, labels=dataset.labels)
    _write_text(
        paths["dataset_meta"],
        json.dumps(
            {
                "schema_version": 1,
                "feature_names": dataset.feature_names,
                "class_names": dataset.class_names,
                "source": dataset.source,
                "positive_class": positive_class,
            },
            indent=2,
            sort_keys=True,
        ),
    )


def _load_dataset(paths) -> tuple[Dataset, str | None]:
    if not paths["dataset"].exists():
        raise SchemaError(
            f"{paths['dataset']}: dataset artifact missing; run `dicnn preprocess`"
        )
    arrays = np.load(paths["dataset"])
    meta = json.loads(paths["dataset_meta"].read_text())
    dataset = Dataset(
        features=arrays["features"],
        labels=arrays["labels"],
        feature_names=meta["feature_names"],
        class_names=meta["class_names"],
        source=meta["source"],
    )
    return dataset, meta.get("positive_class")


def cmd_preprocess(config: RunConfig) -> dict[str, Path]:
    csv_path = config["data.csv"]
    if not csv_path:
        raise ConfigError("data.csv is not set")
    if not Path(csv_path).exists():
        raise FileNotFoundError(csv_path)
    paths = artifact_paths(config["out.dir"])
    seed = config["pipeline.seed"]
    table = load_csv(
        csv_path,
        label_column=config["data.label_column"],
        drop_columns=config["data.drop_columns"],
        missing_markers=tuple(config["data.missing_markers"]) + ("",),
    )
    mvr = missing_value_ratio(table)
    clean, dropped = impute_or_drop(table, mvr, config["pipeline.drop_threshold"])
    labels, class_names = encode_labels(clean.labels)
    full = Dataset(
        features=clean.values,
        labels=labels,
        feature_names=list(clean.feature_names),
        class_names=class_names,
        source=clean.source,
    )

    mode = config["data.mode"]
    positive_class = None
    if mode == "binary":
        family = config["data.family"]
        if not family:
            raise ConfigError("data.family must be set in binary mode")
        subset = build_family_subsets(
            full, [family], benign_label=config["data.benign_label"],
            seed=derive_seed(seed, "subset"),
        )[family]
        positive_class = family
    elif mode == "multiclass":
        families = config["data.families"]
        if not families:
            raise ConfigError("data.families must be set in multiclass mode")
        subset = build_multifamily_dataset(
            full, families, seed=derive_seed(seed, "subset")
        )
    else:  # raw: model the label column as-is
        subset = full

    std, mu, sigma = standardize(subset.features)
    dataset = Dataset(
        features=std,
        labels=subset.labels,
        feature_names=subset.feature_names,
        class_names=subset.class_names,
        source=subset.source,
    )
    split = stratified_split(dataset, config["pipeline.eta"], seed)

    constant = [n for n, s in zip(dataset.feature_names, sigma) if s == 0.0]
    counts = dataset.class_counts()
    report = {
        "schema_version": 1,
        "mvr": {n: float(r) for n, r in zip(table.feature_names, mvr)},
        "mu": {n: float(v) for n, v in zip(dataset.feature_names, mu)},
        "sigma": {n: float(v) for n, v in zip(dataset.feature_names, sigma)},
        "dropped_features": dropped,
        "constant_features": constant,
        "class_proportions": {
            name: float(c / dataset.n_samples)
            for name, c in zip(dataset.class_names, counts)
        },
        "n_samples": dataset.n_samples,
    }
    _save_dataset(paths, dataset, positive_class)
    _write_text(paths["split"], split.to_json())
    _write_text(paths["preprocess_report"], json.dumps(report, indent=2, sort_keys=True))
    zero_mvr = int(np.count_nonzero(mvr == 0.0))
    print(
        f"preprocess: {dataset.n_samples} rows, {dataset.n_features} features "
        f"({zero_mvr}/{mvr.size} columns with zero missing ratio), "
        f"classes {dict(zip(dataset.class_names, counts.tolist()))}, "
        f"train {split.train_indices.size} / val {split.val_indices.size}"
    )
    return paths


def _ensure_preprocessed(config: RunConfig) -> dict[str, Path]:
    paths = artifact_paths(config["out.dir"])
    if not paths["dataset"].exists():
        return cmd_preprocess(config)
    return paths


def cmd_select(config: RunConfig) -> dict[str, Path]:
    paths = _ensure_preprocessed(config)
    dataset, _ = _load_dataset(paths)
    split = SplitSpec.from_json(paths["split"].read_text())
    train_set = dataset.take_rows(split.train_indices, "#train")
    if config["rfe.enabled"]:
        rfe_config = RfeConfig(
            target_count=config["rfe.target_features"],
            step_fraction=config["rfe.step_fraction"],
            surrogate=config["rfe.surrogate"],
            seed=derive_seed(config["pipeline.seed"], "rfe"),
        )
        mask = rfe_select(train_set, rfe_config)
    else:
        mask = FeatureMask(
            feature_names=list(dataset.feature_names),
            selected=np.ones(dataset.n_features, dtype=bool),
            ranking=np.ones(dataset.n_features, dtype=np.int64),
        )
    _write_text(paths["mask"], mask.to_json())
    print(
        f"select: kept {mask.n_selected}/{dataset.n_features} features "
        f"after {int(mask.ranking.max())} round(s)"
    )
    return paths


def _ensure_mask(config: RunConfig) -> dict[str, Path]:
    paths = _ensure_preprocessed(config)
    if not paths["mask"].exists():
        return cmd_select(config)
    return paths


def cmd_train(config: RunConfig) -> dict[str, Path]:
    start = time.perf_counter()
    paths = _ensure_mask(config)
    dataset, _ = _load_dataset(paths)
    split = SplitSpec.from_json(paths["split"].read_text())
    mask = FeatureMask.from_json(paths["mask"].read_text())
    masked = apply_mask(dataset, mask)
    train_set = masked.take_rows(split.train_indices, "#train")
    val_set = masked.take_rows(split.val_indices, "#val")

    seed = config["pipeline.seed"]
    specs = default_architecture(
        masked.n_features,
        masked.n_classes,
        channels=config["model.channels"],
        kernel_size=config["model.kernel_size"],
        dilations=config["model.dilations"],
    )
    network = DicnnNetwork(specs, masked.n_features, derive_seed(seed, "init"))
    train_config = TrainConfig(
        learning_rate=config["train.learning_rate"],
        batch_size=config["train.batch_size"],
        max_epochs=config["train.max_epochs"],
        patience=config["train.patience"],
        seed=derive_seed(seed, "train"),
    )
    hook = None
    if config["fgsm.enabled"]:
        fgsm_config = FgsmConfig.from_training_data(
            train_set.features,
            epsilon=config["fgsm.epsilon"],
            mix_ratio=config["fgsm.mix_ratio"],
        )

        def hook(bx, by, net, rng):
            return adversarial_augment(bx, by, net, fgsm_config, rng)

    targets = one_hot(train_set.labels, masked.n_classes)
    preprocess_info = {
        "feature_names": dataset.feature_names,
        "selected": mask.selected.tolist(),
        "class_names": dataset.class_names,
    }
    report = json.loads(paths["preprocess_report"].read_text())
    preprocess_info["mu"] = report["mu"]
    preprocess_info["sigma"] = report["sigma"]
    try:
        history = train(
            network, train_set.features, targets,
            val_set.features, val_set.labels, train_config,
            adversarial_hook=hook,
        )
    except NumericError:
        # training restored the last finite snapshot before raising
        last_good = paths["checkpoint"].with_name("model.last_good.json")
        save_checkpoint(last_good, network, preprocess_info)
        print(f"train: numeric failure; last good checkpoint at {last_good}",
              file=sys.stderr)
        raise
    for record in history:
        print(
            "epoch {epoch:3d}  loss {train_loss:.4f}  "
            "train_acc {train_accuracy:.4f}  val_acc {val_accuracy:.4f}".format(**record)
        )
    val_accuracy = accuracy(network, val_set.features, val_set.labels)
    save_checkpoint(paths["checkpoint"], network, preprocess_info)
    _write_text(
        paths["history"],
        json.dumps({"schema_version": 1, "epochs": history}, indent=2, sort_keys=True),
    )
    manifest = RunManifest(config=config.snapshot())
    manifest.artifact_hashes = {
        name: sha256_file(paths[name])
        for name in ("split", "mask", "checkpoint", "history", "preprocess_report")
    }
    manifest.achieved = {"val_accuracy": val_accuracy}
    manifest.timings = {"train_seconds": time.perf_counter() - start}
    _write_text(paths["manifest"], manifest.to_json())
    print(f"train: done, validation accuracy {val_accuracy:.4f}")
    return paths


def _load_model_for_data(config: RunConfig, checkpoint_path=None):
    paths = artifact_paths(config["out.dir"])
    checkpoint = Path(checkpoint_path or paths["checkpoint"])
    if not checkpoint.exists():
        raise SchemaError(f"{checkpoint}: checkpoint missing; run `dicnn train`")
    network, preprocess_info = load_checkpoint(checkpoint)
    dataset, positive_class = _load_dataset(paths)
    selected = np.asarray(preprocess_info.get("selected", []), dtype=bool)
    if selected.size != dataset.n_features:
        raise CompatibilityError(
            f"checkpoint mask covers {selected.size} features but dataset has "
            f"{dataset.n_features}"
        )
    mask = FeatureMask(
        feature_names=dataset.feature_names,
        selected=selected,
        ranking=np.ones(dataset.n_features, dtype=np.int64),
    )
    masked = apply_mask(dataset, mask)
    if masked.n_features != network.input_width:
        raise CompatibilityError(
            f"network expects {network.input_width} features, mask keeps "
            f"{masked.n_features}"
        )
    return network, masked, positive_class, paths


def cmd_evaluate(config: RunConfig, split_name: str = "val", checkpoint=None):
    network, masked, positive_class, paths = _load_model_for_data(config, checkpoint)
    split = SplitSpec.from_json(paths["split"].read_text())
    rows = split.val_indices if split_name == "val" else split.train_indices
    part = masked.take_rows(rows, f"#{split_name}")
    reports = robustness_sweep(
        network, part, [0.0], positive_class=positive_class
    )
    report = reports[0]
    key = "eval_val" if split_name == "val" else "eval_train"
    _write_text(paths[key], report.to_json())
    print(report.table_row(f"evaluate[{split_name}]"))
    return report


def cmd_attack(config: RunConfig, checkpoint=None):
    network, masked, positive_class, paths = _load_model_for_data(config, checkpoint)
    split = SplitSpec.from_json(paths["split"].read_text())
    part = masked.take_rows(split.val_indices, "#val")
    epsilons = config["attack.epsilons"]
    clip_low = part.features.min(axis=0)
    clip_high = part.features.max(axis=0)
    reports = robustness_sweep(
        network, part, epsilons,
        clip_low=clip_low, clip_high=clip_high,
        positive_class=positive_class,
    )
    for report in reports:
        eps_name = f"{report.epsilon:g}".replace(".", "p")
        path = paths["eval_val"].with_name(f"eval_eps_{eps_name}.json")
        _write_text(path, report.to_json())
        print(report.table_row(f"attack[eps={report.epsilon:g}]"))
    _write_text(paths["robustness_csv"], sweep_to_csv(reports))
    _write_text(paths["robustness_svg"], sweep_to_svg(reports))
    return reports


def cmd_compare(config: RunConfig):
    paths = artifact_paths(config["out.dir"])
    if not paths["eval_val"].exists():
        raise SchemaError(f"{paths['eval_val']}: report missing; run `dicnn evaluate`")
    report = EvalReport.from_json(paths["eval_val"].read_text())
    markdown, csv_text = comparison_table(report)
    _write_text(paths["comparison_md"], markdown)
    _write_text(paths["comparison_csv"], csv_text)
    print(markdown, end="")
    return markdown


def cmd_reproduce(config: RunConfig):
    """Full pipeline with one manifest covering every artifact hash."""
    start = time.perf_counter()
    cmd_preprocess(config)
    cmd_select(config)
    paths = cmd_train(config)
    cmd_evaluate(config, "val")
    cmd_attack(config)
    cmd_compare(config)
    manifest = RunManifest.from_json(paths["manifest"].read_text())
    for name in (
        "eval_val",
        "robustness_csv",
        "robustness_svg",
        "comparison_md",
        "comparison_csv",
    ):
        manifest.artifact_hashes[name] = sha256_file(paths[name])
    manifest.timings["reproduce_seconds"] = time.perf_counter() - start
    _write_text(paths["manifest"], manifest.to_json())
    print(f"reproduce: manifest at {paths['manifest']}")
    return paths


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dicnn",
        description="dilated-convolution malware classification pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("preprocess", "clean, encode, standardize, and split the CSV"),
        ("select", "run recursive feature elimination on the training split"),
        ("train", "train the classifier (runs earlier stages if needed)"),
        ("evaluate", "score a checkpoint on a split"),
        ("attack", "sweep sign-perturbation sizes on the validation split"),
        ("compare", "render the published-vs-measured comparison table"),
        ("reproduce", "run the whole pipeline and hash every artifact"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", default=None, help="flat key=value config file")
        cmd.add_argument("--seed", type=int, default=None, help="master seed override")
        cmd.add_argument("--out", default=None, help="output directory override")
        cmd.add_argument(
            "--epsilon", default=None,
            help="comma list of attack sweep sizes (overrides attack.epsilons)",
        )
        cmd.add_argument(
            "--no-fgsm", action="store_true",
            help="disable adversarial training (ablation arm)",
        )
        cmd.add_argument(
            "--dilation", default=None,
            help="comma list of conv dilations (overrides model.dilations)",
        )
        cmd.add_argument(
            "--target-features", type=int, default=None,
            help="surviving feature count for elimination",
        )
        if name in ("evaluate", "attack"):
            cmd.add_argument("--checkpoint", default=None, help="checkpoint path")
        if name == "evaluate":
            cmd.add_argument(
                "--split", choices=("train", "val"), default="val",
                help="which split to score",
            )
    return parser


def _config_from_args(args) -> RunConfig:
    config_path = args.config or os.environ.get(ENV_CONFIG_VAR)
    if config_path:
        if not Path(config_path).exists():
            raise FileNotFoundError(config_path)
        config = RunConfig.from_file(config_path)
    else:
        config = RunConfig()
    if args.seed is not None:
        config.override("pipeline.seed", str(args.seed))
    if args.out is not None:
        config.override("out.dir", args.out)
    if args.epsilon is not None:
        config.override("attack.epsilons", args.epsilon)
    if args.no_fgsm:
        config.override("fgsm.enabled", "false")
    if args.dilation is not None:
        config.override("model.dilations", args.dilation)
    if args.target_features is not None:
        config.override("rfe.target_features", str(args.target_features))
    return config


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = _config_from_args(args)
        if args.command == "preprocess":
            cmd_preprocess(config)
        elif args.command == "select":
            cmd_select(config)
        elif args.command == "train":
            cmd_train(config)
        elif args.command == "evaluate":
            cmd_evaluate(config, args.split, args.checkpoint)
        elif args.command == "attack":
            cmd_attack(config, args.checkpoint)
        elif args.command == "compare":
            cmd_compare(config)
        elif args.command == "reproduce":
            cmd_reproduce(config)
        return 0
    except (FileNotFoundError, OSError) as err:
        print(f"error[io]: {err}", file=sys.stderr)
        return 2
    except (CsvParseError, SchemaError) as err:
        print(f"error[{err.category}]: {err}", file=sys.stderr)
        return 2
    except ConfigError as err:
        print(f"error[config]: {err}", file=sys.stderr)
        return 3
    except NumericError as err:
        print(f"error[numeric]: {err}", file=sys.stderr)
        return 4
    except DicnnError as err:
        print(f"error[{err.category}]: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
