"""Command-line orchestration of the full pipeline.

Commands compose through files only: `synth` writes a benchmark dataset,
`pretrain` produces a checkpoint and loss curve, `rank` turns a checkpoint
plus dataset into a ranking, `annotate` trains the per-frame annotator on a
ranked prefix and predicts the rest, `robustness` and `ablation` run the
experiment grids, and `serve` exposes the annotation loop over HTTP. Every
command is reproducible from (config, seed) and records a run.json with the
resolved config, its hash, and library versions under --out.

Exit codes: 0 success, 2 config/validation error, 3 training divergence.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import platform
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .annotate import AnnotatorConfig, evaluate, predict_all, train_annotator
from .augment import AugmentationConfig, AugmentationError
from .checkpoint import config_hash, load_checkpoint, rng_snapshot, save_checkpoint
from .data import DatasetError, load_dataset, load_labels, normalize_dataset, save_labels
from .encoder import EncoderParams
from .features import extract_features, frame_feature_map, sequence_feature_map
from .pretrain import (
    DivergenceError,
    LossConfig,
    TrainingSchedule,
    loss_rows_to_csv,
    pretrain,
)
from .ranking import (
    DiscriminatorConfig,
    fps_oracle,
    load_ranking,
    prefix,
    rank,
    resampled_raw_features,
    save_ranking,
)
from .synthetic import SyntheticSpec, write_benchmark

EXIT_CONFIG = 2
EXIT_DIVERGED = 3


class ConfigError(ValueError):
    pass


def _dataclass_from(section: dict, cls, what: str):
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(section) - known
    if unknown:
        raise ConfigError(f"unknown {what} config keys: {sorted(unknown)}")
    coerced = dict(section)
    for f in dataclasses.fields(cls):
        if f.name in coerced and isinstance(coerced[f.name], list):
            coerced[f.name] = tuple(coerced[f.name])
    try:
        return cls(**coerced)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad {what} config: {exc}") from None


class PipelineConfig:
    """The single JSON config document with per-module sections."""

    SECTIONS = ("augmentation", "encoder", "loss", "schedule", "discriminator", "annotator")

    def __init__(self, doc: dict | None = None):
        doc = doc or {}
        unknown = set(doc) - set(self.SECTIONS) - {"normalize"}
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        self.doc = doc
        self.augmentation = _dataclass_from(doc.get("augmentation", {}), AugmentationConfig, "augmentation")
        self.loss = _dataclass_from(doc.get("loss", {}), LossConfig, "loss")
        self.schedule = _dataclass_from(doc.get("schedule", {}), TrainingSchedule, "schedule")
        self.discriminator = _dataclass_from(doc.get("discriminator", {}), DiscriminatorConfig, "discriminator")
        self.annotator = _dataclass_from(doc.get("annotator", {}), AnnotatorConfig, "annotator")
        self.encoder_section = dict(doc.get("encoder", {}))
        self.normalize = bool(doc.get("normalize", True))

    @classmethod
    def load(cls, path: str | None) -> "PipelineConfig":
        if path is None:
            return cls()
        try:
            with open(path) as fh:
                return cls(json.load(fh))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from None

    def override(self, section: str, **values) -> None:
        values = {k: v for k, v in values.items() if v is not None}
        if not values:
            return
        if section == "encoder":
            self.encoder_section.update(values)
            return
        current = getattr(self, section)
        setattr(self, section, dataclasses.replace(current, **values))

    def encoder_params(self, num_joints: int, input_blocks: int) -> EncoderParams:
        section = dict(self.encoder_section)
        section.setdefault("num_joints", num_joints)
        section.setdefault("input_blocks", input_blocks)
        return _dataclass_from(section, EncoderParams, "encoder")

    def resolved(self) -> dict:
        return {
            "augmentation": dataclasses.asdict(self.augmentation),
            "encoder": dict(self.encoder_section),
            "loss": dataclasses.asdict(self.loss),
            "schedule": dataclasses.asdict(self.schedule),
            "discriminator": dataclasses.asdict(self.discriminator),
            "annotator": dataclasses.asdict(self.annotator),
            "normalize": self.normalize,
        }


def _write_run_record(out_dir: Path, command: str, config: dict, seed: int | None) -> None:
    import torch

    out_dir.mkdir(parents=True, exist_ok=True)
    record = {
        "command": command,
        "config": config,
        "config_hash": config_hash(config),
        "seed": seed,
        "versions": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "torch": torch.__version__,
            "motioncurator": __version__,
        },
    }
    with open(out_dir / "run.json", "w") as fh:
        json.dump(record, fh, indent=1, sort_keys=True)


def _load_normalized(dataset_path: str, normalize: bool):
    dataset = load_dataset(dataset_path)
    return dataset, (normalize_dataset(dataset) if normalize else dataset)


# ---------------------------------------------------------------------------
# commands


def cmd_synth(args) -> int:
    spec = SyntheticSpec(
        num_sequences=args.sequences,
        min_frames=args.min_frames,
        max_frames=args.max_frames,
        fps=args.fps,
        seed=args.seed,
    )
    dataset = write_benchmark(args.out, spec)
    _write_run_record(Path(args.out), "synth", dataclasses.asdict(spec), args.seed)
    print(f"wrote {dataset.num_sequences} sequences, {dataset.num_classes} classes to {args.out}")
    return 0


def cmd_pretrain(args) -> int:
    cfg = PipelineConfig.load(args.config)
    cfg.override("schedule", epochs=args.epochs, seed=args.seed, lr=args.lr)
    dataset, working = _load_normalized(args.dataset, cfg.normalize and not args.no_normalize)
    aug = cfg.augmentation
    blocks = 2 * aug.context_blocks(dataset.fps) + 1
    params = cfg.encoder_params(dataset.num_joints, blocks)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = pretrain(working, params, aug, cfg.loss, cfg.schedule)
    rng = np.random.default_rng(cfg.schedule.seed)
    save_checkpoint(
        out / "checkpoint.bin",
        result.encoder_q,
        config=cfg.resolved(),
        rng_state=rng_snapshot(rng),
        meta={"steps": len(result.loss_rows)},
    )
    (out / "loss.csv").write_text(loss_rows_to_csv(result.loss_rows))
    _write_run_record(out, "pretrain", cfg.resolved(), cfg.schedule.seed)
    print(f"checkpoint: {out / 'checkpoint.bin'}  ({len(result.loss_rows)} steps, "
          f"{result.wall_seconds:.1f}s)")
    return 0


def cmd_rank(args) -> int:
    cfg = PipelineConfig.load(args.config)
    cfg.override("discriminator", epochs=args.discriminator_epochs, batch_add=args.batch_add)
    encoder, _header = load_checkpoint(args.checkpoint)
    dataset, working = _load_normalized(args.dataset, cfg.normalize)

    if args.raw_features:
        feats = resampled_raw_features({s.id: s.frames for s in working.sequences})
    else:
        feats = sequence_feature_map(extract_features(encoder, dataset, cfg.augmentation,
                                                      normalize=cfg.normalize))
    if args.oracle_fps:
        ids = sorted(feats)
        rng = np.random.default_rng(args.seed)
        start = ids[int(rng.integers(len(ids)))]
        ranking = fps_oracle(feats, start_id=start, seed=args.seed)
    else:
        ranking = rank(feats, cfg.discriminator, seed=args.seed)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_ranking(ranking, out / "ranking.json")
    _write_run_record(out, "rank", cfg.resolved(), args.seed)
    print(f"ranking of {len(ranking.order)} sequences: {out / 'ranking.json'}")
    return 0


def cmd_annotate(args) -> int:
    cfg = PipelineConfig.load(args.config)
    cfg.override("annotator", epochs=args.epochs)
    encoder, _ = load_checkpoint(args.checkpoint)
    dataset, _working = _load_normalized(args.dataset, cfg.normalize)
    ranking = load_ranking(args.ranking)
    labels = load_labels(args.dataset, dataset)

    budget = float(args.budget)
    train_ids = prefix(ranking, budget if budget < 1 else int(budget))
    missing = [i for i in train_ids if i not in labels]
    if missing:
        raise ConfigError(
            f"budget needs labels for {len(train_ids)} sequences; missing: {missing}"
        )

    feats = frame_feature_map(extract_features(encoder, dataset, cfg.augmentation,
                                               normalize=cfg.normalize))
    annotator = train_annotator(
        {i: feats[i] for i in train_ids},
        {i: labels[i] for i in train_ids},
        cfg.annotator,
        seed=args.seed,
    )
    rest = [i for i in dataset.ids if i not in set(train_ids)]
    predictions = predict_all(annotator, {i: feats[i] for i in rest})

    out = Path(args.out)
    save_labels(predictions, out / "predictions")
    _write_run_record(out, "annotate", cfg.resolved(), args.seed)
    summary = {
        "train_sequences": len(train_ids),
        "predicted_sequences": len(rest),
        "train_seconds": annotator.train_seconds,
    }
    truth = {i: labels[i] for i in rest if i in labels}
    if truth:
        report = evaluate({i: predictions[i] for i in truth}, truth)
        (out / "eval.json").write_text(report.to_json())
        summary["micro_f1"] = report.micro_f1
        summary["macro_f1"] = report.macro_f1
        print(f"micro-F1 {report.micro_f1:.4f}  macro-F1 {report.macro_f1:.4f} "
              f"on {len(truth)} held-out sequences")
    (out / "summary.json").write_text(json.dumps(summary, indent=1))
    print(f"predictions for {len(rest)} sequences under {out / 'predictions'}")
    return 0


# populated in each worker by _robustness_worker_init (spawn context: fork is
# unsafe once torch has started its thread pool in the parent)
_ROBUSTNESS_DATA: dict = {}


def _robustness_worker_init(data: dict) -> None:
    # thread count left alone: identical torch settings keep parallel results
    # bit-identical to a serial run
    global _ROBUSTNESS_DATA
    _ROBUSTNESS_DATA = data


def _robustness_seed_run(task) -> tuple[int, list[float]]:
    import warnings

    warnings.simplefilter("ignore")
    seed, budgets = task
    d = _ROBUSTNESS_DATA
    seq_feats, frame_feats, labels, disc_cfg, ann_cfg, ids = (
        d["seq"], d["frame"], d["labels"], d["disc"], d["ann"], d["ids"]
    )
    counts = [len(prefix_ids(b, ids)) for b in budgets]
    ranking = rank(seq_feats, disc_cfg, seed=seed, limit=max(counts))
    scores = []
    for budget in budgets:
        train_ids = ranking.order[: len(prefix_ids(budget, ids))]
        annotator = train_annotator(
            {i: frame_feats[i] for i in train_ids},
            {i: labels[i] for i in train_ids},
            ann_cfg,
            seed=seed,
        )
        rest = [i for i in ids if i not in set(train_ids)]
        preds = predict_all(annotator, {i: frame_feats[i] for i in rest})
        scores.append(evaluate(preds, {i: labels[i] for i in rest}).micro_f1)
    return seed, scores


def prefix_ids(budget: float, ids: list[str]) -> list[str]:
    """Resolve a fractional or absolute budget against an id list."""
    from .ranking import Ranking

    dummy = Ranking(order=list(ids), scores=[0.0] * len(ids))
    return prefix(dummy, budget if budget < 1 else int(budget))


def cmd_robustness(args) -> int:
    import warnings

    cfg = PipelineConfig.load(args.config)
    encoder, _ = load_checkpoint(args.checkpoint)
    dataset, _working = _load_normalized(args.dataset, cfg.normalize)
    labels = load_labels(args.dataset, dataset)
    unlabeled = [i for i in dataset.ids if i not in labels]
    if unlabeled:
        raise ConfigError(f"robustness needs full ground truth; missing labels for {unlabeled[:5]}")

    budgets = [float(b) for b in args.budgets.split(",")]
    feats = extract_features(encoder, dataset, cfg.augmentation, normalize=cfg.normalize)
    data = {
        "seq": sequence_feature_map(feats),
        "frame": frame_feature_map(feats),
        "labels": labels,
        "disc": cfg.discriminator,
        "ann": cfg.annotator,
        "ids": dataset.ids,
    }
    tasks = [(seed, budgets) for seed in range(args.seeds)]
    if args.workers > 1:
        import multiprocessing as mp

        with ProcessPoolExecutor(
            max_workers=args.workers,
            mp_context=mp.get_context("spawn"),
            initializer=_robustness_worker_init,
            initargs=(data,),
        ) as pool:
            results = dict(pool.map(_robustness_seed_run, tasks))
    else:
        _robustness_worker_init(data)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            results = dict(map(_robustness_seed_run, tasks))

    rows = ["budget,mean_micro_f1,std_micro_f1"]
    for k, budget in enumerate(budgets):
        values = np.array([results[seed][k] for seed in range(args.seeds)])
        rows.append(f"{budget},{values.mean():.6f},{values.std():.6f}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "robustness.csv").write_text("\n".join(rows) + "\n")
    _write_run_record(out, "robustness", cfg.resolved(), None)
    print("\n".join(rows))
    return 0


ABLATION_ROWS = [
    # cumulative switches, one addition per row
    ("baseline", dict(enhanced=False, augmented=False, reverse=False, perturb=False, omega=0.0)),
    ("+perturbation", dict(enhanced=False, augmented=False, reverse=False, perturb=True, omega=0.0)),
    ("+dilated", dict(enhanced=True, augmented=False, reverse=False, perturb=True, omega=0.0)),
    ("+downsampling", dict(enhanced=True, augmented=True, reverse=False, perturb=True, omega=0.0)),
    ("+reverse", dict(enhanced=True, augmented=True, reverse=True, perturb=True, omega=0.0)),
    ("+local_consistency", dict(enhanced=True, augmented=True, reverse=True, perturb=True, omega=1.0)),
]


def ablation_run(dataset, working, labels, cfg: PipelineConfig, switches: dict, seed: int) -> dict:
    """Pretrain with the row's switches, then rank, annotate, and score."""
    aug = cfg.augmentation
    if not switches["perturb"]:
        aug = dataclasses.replace(aug, t_pb=0.0)
    loss_cfg = dataclasses.replace(cfg.loss, omega=switches["omega"])
    schedule = dataclasses.replace(cfg.schedule, seed=seed)
    blocks = 2 * aug.context_blocks(dataset.fps) + 1 if switches["enhanced"] else 1
    params = cfg.encoder_params(dataset.num_joints, blocks)

    result = pretrain(
        working, params, aug, loss_cfg, schedule,
        enhanced=switches["enhanced"],
        augmented=switches["augmented"],
        reverse_negative=switches["reverse"],
    )
    feats = extract_features(result.encoder_q, dataset, aug, normalize=cfg.normalize,
                             enhanced=switches["enhanced"])
    seq_feats = sequence_feature_map(feats)
    frame_feats = frame_feature_map(feats)

    ranking = rank(seq_feats, cfg.discriminator, seed=seed,
                   limit=len(prefix_ids(0.1, dataset.ids)))
    train_ids = ranking.order
    annotator = train_annotator(
        {i: frame_feats[i] for i in train_ids},
        {i: labels[i] for i in train_ids},
        cfg.annotator,
        seed=seed,
    )
    rest = [i for i in dataset.ids if i not in set(train_ids)]
    preds = predict_all(annotator, {i: frame_feats[i] for i in rest})
    report = evaluate(preds, {i: labels[i] for i in rest})
    return {"micro_f1": report.micro_f1, "macro_f1": report.macro_f1}


def cmd_ablation(args) -> int:
    import warnings

    cfg = PipelineConfig.load(args.config)
    cfg.override("schedule", epochs=args.epochs)
    if args.compact_encoder:
        cfg.encoder_section.update(
            {"embed_dim": 32, "spatial_layers": 1, "temporal_layers": 1, "feature_dim": 64}
        )
    dataset, working = _load_normalized(args.dataset, cfg.normalize)
    labels = load_labels(args.dataset, dataset)
    if len(labels) != dataset.num_sequences:
        raise ConfigError("ablation needs full ground-truth labels")

    rows = ["combination,micro_f1,macro_f1"]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for name, switches in ABLATION_ROWS:
            micro, macro = [], []
            for seed in range(args.seeds):
                scores = ablation_run(dataset, working, labels, cfg, switches, seed)
                micro.append(scores["micro_f1"])
                macro.append(scores["macro_f1"])
            rows.append(f"{name},{np.mean(micro):.6f},{np.mean(macro):.6f}")
            print(rows[-1])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "ablation.csv").write_text("\n".join(rows) + "\n")
    _write_run_record(out, "ablation", cfg.resolved(), None)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import SessionState, create_app

    cfg = PipelineConfig.load(args.config)
    encoder, _ = load_checkpoint(args.checkpoint)
    dataset, _working = _load_normalized(args.dataset, cfg.normalize)
    ranking = load_ranking(args.ranking)
    state = SessionState(
        dataset, encoder, cfg.augmentation, ranking,
        annotator_cfg=cfg.annotator,
        session_dir=args.session_dir,
        seed=args.seed,
    )
    app = create_app(state)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="motioncurator",
        description="Motion representation learning, representativeness ranking, "
                    "and fast human-in-the-loop annotation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate the synthetic benchmark dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--sequences", type=int, default=200)
    p.add_argument("--min-frames", type=int, default=270)
    p.add_argument("--max-frames", type=int, default=330)
    p.add_argument("--fps", type=float, default=120.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("pretrain", help="contrastive pretraining -> checkpoint + loss curve")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--no-normalize", action="store_true")
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("rank", help="order sequences by representativeness")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--oracle-fps", action="store_true",
                   help="exact farthest-point sampling instead of the classifier")
    p.add_argument("--raw-features", action="store_true",
                   help="rank on resampled raw coordinates instead of learned features")
    p.add_argument("--discriminator-epochs", type=int, dest="discriminator_epochs")
    p.add_argument("--batch-add", type=int, dest="batch_add")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("annotate", help="train the annotator on a ranked prefix, predict the rest")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--ranking", required=True)
    p.add_argument("--budget", required=True,
                   help="fraction (<1) or absolute count of ranked sequences to train on")
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_annotate)

    p = sub.add_parser("robustness", help="micro-F1 mean/std over ranking seeds per budget")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--budgets", default="0.01,0.05,0.1,0.2")
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_robustness)

    p = sub.add_parser("ablation", help="micro/macro-F1 per augmentation combination")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--epochs", type=int, default=6)
    p.add_argument("--seeds", type=int, default=1)
    p.add_argument("--compact-encoder", action="store_true", default=True)
    p.set_defaults(func=cmd_ablation)

    p = sub.add_parser("serve", help="run the annotation HTTP service")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--ranking", required=True)
    p.add_argument("--config")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--session-dir")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DatasetError, AugmentationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
