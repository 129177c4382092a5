"""
Experiment orchestration: dataset generation, preprocessing, training,
attack sweeps, defense comparison and skeleton dumps. Every step reads and
writes through storage_service so the command line and the scripts share
one file layout:

    <data_dir>/dataset.jsonl, splits.json, labels.json, generator.json
    <data_dir>/train.jsonl, val.jsonl, test.jsonl, stats.json   (preprocessed)
    <out_dir>/model.json, history.csv
    <out_dir>/report.csv, curves.csv, results.jsonl
    <out_dir>/defenses.csv, eval.csv, skeleton_<id>.csv, skeleton_edges.csv
"""

import logging
import os
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from models.attack import AttackConfig, AttackResult, BoneScaleVector, OptimizerKind, Termination
from models.experiment import ExperimentConfig, SuccessRateReport, aggregate_results
from models.skeleton import MotionSample, SkeletonTopology
from services.attack_engine import attack_batch
from services.classifier import (
    ReferenceClassifier,
    TrainConfig,
    TrainingOutcome,
    accuracy,
    train,
)
from services.defense import (
    AdvTrainConfig,
    AugmentConfig,
    adversarial_train,
    train_with_augmentation,
)
from services.preprocess import PreprocessConfig, preprocess_pipeline
from services.reparam import reparameterize
from services.synthetic import SyntheticDataset, SyntheticSpec, generate_synthetic_dataset
from storage.service import StorageService, storage_service
from utils.error_handling import FrameOutOfRangeError, ValidationError
from utils.seeding import derive_seed

logger = logging.getLogger(__name__)

SPLIT_FILES = {"train": "train.jsonl", "val": "val.jsonl", "test": "test.jsonl"}
DEFENSE_ROWS = ("ST", "AT", "ST+aug")


@dataclass
class SweepOutput:
    """Report plus the per-sample results behind it."""

    report: SuccessRateReport
    results: List[AttackResult]
    filtered_out: Dict[Tuple[float, str, str, str], int]


def _path(directory: str, name: str) -> str:
    return os.path.join(directory, name)


def train_config_for(experiment: ExperimentConfig) -> TrainConfig:
    """Training settings from the experiment, seeded from the master seed."""
    settings = {"seed": derive_seed(experiment.seed, "train")}
    settings.update(experiment.train)
    return TrainConfig.from_dict(settings)


def initial_model(
    experiment: ExperimentConfig, topo: SkeletonTopology, class_count: int
) -> ReferenceClassifier:
    return ReferenceClassifier.initialize(
        topo,
        class_count=class_count,
        hidden_dim=experiment.hidden_dim,
        seed=derive_seed(experiment.seed, "model"),
    )


def attack_config_for(
    experiment: ExperimentConfig,
    topo: SkeletonTopology,
    epsilon: float,
    optimizer: str,
    termination: str,
    part: str,
) -> AttackConfig:
    """Attack settings of one grid cell; the part expression becomes the bone mask."""
    settings = dict(experiment.attack)
    settings.update(
        epsilon=epsilon,
        optimizer=optimizer,
        termination=termination,
        bone_mask=topo.resolve_parts(part),
        seed=derive_seed(experiment.seed, "attack", epsilon, optimizer, termination, part),
    )
    return AttackConfig.from_dict(settings)


def generate_dataset_files(
    spec: SyntheticSpec,
    topo: SkeletonTopology,
    seed: int,
    out_dir: str,
    storage: StorageService = storage_service,
) -> SyntheticDataset:
    """Generate a synthetic dataset and write it with its split and label files."""
    dataset = generate_synthetic_dataset(spec, topo, seed)
    storage.save_dataset(dataset.samples, _path(out_dir, "dataset.jsonl"))
    storage.save_splits(dataset.splits, _path(out_dir, "splits.json"))
    storage.save_json(dataset.labels.to_dict(), _path(out_dir, "labels.json"))
    storage.save_json({"seed": seed, "spec": spec.to_dict()}, _path(out_dir, "generator.json"))
    return dataset


def load_split_samples(
    data_dir: str, storage: StorageService = storage_service
) -> Dict[str, List[MotionSample]]:
    """
    Samples per split: the preprocessed split files if present, else the raw
    dataset cut by splits.json.
    """
    if os.path.isfile(_path(data_dir, SPLIT_FILES["train"])):
        out = {}
        for name, filename in SPLIT_FILES.items():
            path = _path(data_dir, filename)
            out[name] = storage.load_dataset(path) if os.path.isfile(path) else []
        return out

    samples = storage.load_dataset(_path(data_dir, "dataset.jsonl"))
    splits = storage.load_splits(_path(data_dir, "splits.json"))
    by_id = {s.sample_id: s for s in samples}
    missing = [sid for ids in splits.values() for sid in ids if sid not in by_id]
    if missing:
        raise ValidationError(
            message=f"splits.json names {len(missing)} unknown samples, e.g. {missing[0]}",
            field="splits",
        )
    return {name: [by_id[sid] for sid in splits.get(name, [])] for name in SPLIT_FILES}


def run_preprocess(
    data_dir: str,
    topo: SkeletonTopology,
    preprocess_config: PreprocessConfig,
    out_dir: str,
    storage: StorageService = storage_service,
):
    """Preprocess dataset.jsonl by splits.json into per-split files plus stats.json."""
    samples = storage.load_dataset(_path(data_dir, "dataset.jsonl"))
    splits = storage.load_splits(_path(data_dir, "splits.json"))
    processed, stats = preprocess_pipeline(samples, splits, topo, preprocess_config)
    for name, filename in SPLIT_FILES.items():
        storage.save_dataset(processed[name], _path(out_dir, filename))
    storage.save_stats(stats, _path(out_dir, "stats.json"))
    storage.save_splits(
        {name: [s.sample_id for s in processed[name]] for name in SPLIT_FILES},
        _path(out_dir, "splits.json"),
    )
    return processed, stats


def _class_count(splits: Dict[str, List[MotionSample]]) -> int:
    labels = [s.label for samples in splits.values() for s in samples]
    if not labels:
        raise ValidationError(message="Dataset holds no samples")
    return max(labels) + 1


def _history_frame(outcome: TrainingOutcome) -> pd.DataFrame:
    return pd.DataFrame([r.to_row() for r in outcome.history])


def train_standard(
    experiment: ExperimentConfig,
    splits: Dict[str, List[MotionSample]],
    topo: SkeletonTopology,
    out_dir: Optional[str] = None,
    storage: StorageService = storage_service,
) -> TrainingOutcome:
    """Clean training; writes model.json and history.csv when ``out_dir`` is set."""
    model = initial_model(experiment, topo, _class_count(splits))
    outcome = train(model, splits["train"], splits["val"], train_config_for(experiment))
    if out_dir is not None:
        storage.save_checkpoint(outcome.model, _path(out_dir, "model.json"), topo.name)
        storage.write_report(_history_frame(outcome), _path(out_dir, "history.csv"), "history")
    return outcome


def adv_train_config_for(experiment: ExperimentConfig) -> AdvTrainConfig:
    data = dict(experiment.adversarial)
    data["train"] = {**train_config_for(experiment).to_dict(), **data.get("train", {})}
    data.setdefault("workers", experiment.workers)
    return AdvTrainConfig.from_dict(data)


def train_adversarial(
    experiment: ExperimentConfig,
    splits: Dict[str, List[MotionSample]],
    topo: SkeletonTopology,
    out_dir: Optional[str] = None,
    storage: StorageService = storage_service,
) -> TrainingOutcome:
    """Adversarial training; writes model_at.json and history_at.csv."""
    model = initial_model(experiment, topo, _class_count(splits))
    outcome = adversarial_train(
        model, splits["train"], splits["val"], topo, adv_train_config_for(experiment)
    )
    if out_dir is not None:
        storage.save_checkpoint(outcome.model, _path(out_dir, "model_at.json"), topo.name)
        storage.write_report(_history_frame(outcome), _path(out_dir, "history_at.csv"), "history")
    return outcome


def train_augmented(
    experiment: ExperimentConfig,
    splits: Dict[str, List[MotionSample]],
    topo: SkeletonTopology,
) -> TrainingOutcome:
    model = initial_model(experiment, topo, _class_count(splits))
    augment = AugmentConfig.from_dict(
        {"seed": derive_seed(experiment.seed, "augment"), **experiment.augment}
    )
    return train_with_augmentation(
        model, splits["train"], splits["val"], augment, train_config_for(experiment), root=topo.root
    )


def run_attack_sweep(
    experiment: ExperimentConfig,
    model: ReferenceClassifier,
    samples: Sequence[MotionSample],
    topo: SkeletonTopology,
    out_dir: Optional[str] = None,
    storage: StorageService = storage_service,
) -> SweepOutput:
    """
    Attack ``samples`` at every (epsilon, optimizer, termination, part) cell.

    Cells without correctly classified samples report NA. With ``out_dir``
    the sweep writes report.csv, curves.csv and results.jsonl; a cell that
    raises still leaves the files for the cells finished before it.

    Raises:
        ValidationError: if a part expression names an unknown part, before
            any cell runs
    """
    model.check_topology(topo)
    for part in experiment.parts:
        topo.resolve_parts(part)
    grid = experiment.grid()
    results: List[AttackResult] = []
    filtered: Dict[Tuple[float, str, str, str], int] = {}

    try:
        for index, (eps, optimizer, termination, part) in enumerate(grid, start=1):
            cell_config = attack_config_for(experiment, topo, eps, optimizer, termination, part)
            batch = attack_batch(
                model, samples, topo, cell_config, part=part, workers=experiment.workers
            )
            results.extend(batch.results)
            filtered[(eps, optimizer, termination, part)] = batch.filtered_out
            logger.info(
                f"[{index}/{len(grid)}] eps={eps} {optimizer}/{termination} part={part}: "
                f"{batch.success_count}/{len(batch.results)} successful"
            )
    finally:
        report = aggregate_results(results, grid=grid)
        if out_dir is not None:
            if len(filtered) < len(grid):
                logger.warning(f"Sweep stopped after {len(filtered)}/{len(grid)} cells")
            storage.save_results(results, _path(out_dir, "results.jsonl"))
            storage.write_report(report.to_frame(), _path(out_dir, "report.csv"), "report")
            storage.write_report(report.curves_frame(), _path(out_dir, "curves.csv"), "curves")
    return SweepOutput(report=report, results=results, filtered_out=filtered)


def _rate_column(epsilon: float) -> str:
    return f"rate@{epsilon:g}"


def evaluate_model(
    experiment: ExperimentConfig,
    model: ReferenceClassifier,
    samples: Sequence[MotionSample],
    topo: SkeletonTopology,
) -> Dict[str, float]:
    """Clean accuracy plus the early-stop PGD success rate at each epsilon."""
    row = {"clean_acc": accuracy(model, samples)}
    for eps in experiment.epsilons:
        cell_config = attack_config_for(
            experiment,
            topo,
            eps,
            OptimizerKind.PGD_SIGN.value,
            Termination.EARLY_STOP.value,
            "all",
        )
        batch = attack_batch(model, samples, topo, cell_config, workers=experiment.workers)
        row[_rate_column(eps)] = batch.success_rate()
    return row


def compare_defenses(
    experiment: ExperimentConfig,
    splits: Dict[str, List[MotionSample]],
    topo: SkeletonTopology,
    out_dir: Optional[str] = None,
    storage: StorageService = storage_service,
) -> pd.DataFrame:
    """
    Train standard, adversarial and augmented models from one seed and
    tabulate clean test accuracy and attack success per epsilon.
    """
    outcomes = {
        "ST": train_standard(experiment, splits, topo, out_dir, storage),
        "AT": train_adversarial(experiment, splits, topo, out_dir, storage),
        "ST+aug": train_augmented(experiment, splits, topo),
    }
    rows = []
    for name in DEFENSE_ROWS:
        row = {"model": name}
        row.update(evaluate_model(experiment, outcomes[name].model, splits["test"], topo))
        rows.append(row)
        logger.info(f"{name}: clean_acc={row['clean_acc']:.3f}")

    columns = ["model", "clean_acc"] + [_rate_column(e) for e in experiment.epsilons]
    table = pd.DataFrame(rows, columns=columns)
    if out_dir is not None:
        storage.write_report(table, _path(out_dir, "defenses.csv"), "defenses")
    return table


def rebuild_result(
    result: AttackResult, original: MotionSample, topo: SkeletonTopology
) -> AttackResult:
    """Attach the original and reparameterized motions to a result read from disk."""
    if result.sample_id is not None and original.sample_id != result.sample_id:
        raise ValidationError(
            message=f"Result is for {result.sample_id}, got motion {original.sample_id}",
            field="sample_id",
        )
    beta = BoneScaleVector(beta=result.final_beta, epsilon=result.epsilon)
    result.original_motion = original
    result.adversarial_motion = reparameterize(original, topo, beta)
    return result


def dump_skeleton_frames(
    result: AttackResult,
    frames: Sequence[int],
    topo: SkeletonTopology,
    out_path: Optional[str] = None,
    storage: StorageService = storage_service,
) -> pd.DataFrame:
    """
    Rows (frame, joint, which, x, y, z) for the original and adversarial pose
    of every requested frame. With ``out_path`` the rows and the bone edge
    list (skeleton_edges.csv next to it) are written.

    Raises:
        FrameOutOfRangeError: if a frame is outside the motion
        ValidationError: if the result carries no motions
    """
    if result.original_motion is None or result.adversarial_motion is None:
        raise ValidationError(message="Result holds no motions to dump", field="result")
    original = result.original_motion.coords
    adversarial = result.adversarial_motion.coords
    for frame in frames:
        if not 0 <= frame < original.shape[0]:
            raise FrameOutOfRangeError(
                message=f"Frame {frame} outside [0, {original.shape[0] - 1}]", frame=frame
            )

    joints = np.arange(topo.joint_count)
    blocks = []
    for frame in frames:
        for which, coords in (("orig", original), ("adv", adversarial)):
            blocks.append(
                pd.DataFrame(
                    {
                        "frame": frame,
                        "joint": joints,
                        "which": which,
                        "x": coords[frame, :, 0],
                        "y": coords[frame, :, 1],
                        "z": coords[frame, :, 2],
                    }
                )
            )
    columns = ["frame", "joint", "which", "x", "y", "z"]
    table = pd.concat(blocks, ignore_index=True) if blocks else pd.DataFrame(columns=columns)

    if out_path is not None:
        storage.write_report(table, out_path, "skeleton_frames")
        edges = pd.DataFrame(
            [(b, p, c) for b, (p, c) in enumerate(topo.edges())],
            columns=["bone", "parent", "child"],
        )
        edges_path = _path(os.path.dirname(out_path), "skeleton_edges.csv")
        storage.write_report(edges, edges_path, "skeleton_edges")
    return table
