"""
Command-line interface for the bone-length attack toolkit.

Subcommands: gen-data, preprocess, train, attack, advtrain, eval, dump.
Settings come from config.py defaults, then an optional --config JSON file,
then command-line flags.

Exit codes: 0 success, 2 configuration error, 3 runtime error.
"""

import argparse
import logging
import os
import sys
from typing import List, Optional

import pandas as pd
from colorama import Fore, Style
from colorama import init as colorama_init

from config import config
from models.experiment import ExperimentConfig
from models.skeleton import SkeletonTopology
from services import harness
from services.defense import describe_history
from services.preprocess import PreprocessConfig
from services.synthetic import SyntheticSpec
from storage.service import storage_service
from utils.error_handling import (
    ApplicationError,
    BadSpecError,
    ConfigurationError,
    ValidationError,
    error_handler,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'")


def _int_list(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'")


def _str_list(text: str) -> List[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="Experiment JSON file")
    parser.add_argument("--seed", type=int, help="Master seed")
    parser.add_argument("--topology", help="Topology JSON file")
    parser.add_argument("--parts", dest="parts_path", help="Part map JSON replacing the embedded one")
    parser.add_argument("--data", help="Dataset directory")
    parser.add_argument("--out", help="Output directory")
    parser.add_argument("--workers", type=int, help="Worker threads for attacks")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="boneattack",
        description="Adversarial bone-length attacks on skeleton action classifiers",
    )
    parser.add_argument(
        "--log-level", default=config.LOG_LEVEL, help=f"Logging level (default: {config.LOG_LEVEL})"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-data", help="Generate a synthetic dataset")
    _add_common(gen)
    gen.add_argument("--spec", help="Generator spec JSON (overrides the config's generator)")
    gen.add_argument("--classes", type=int, help="Number of classes")
    gen.add_argument("--samples-per-class", type=int, help="Samples per class")
    gen.add_argument("--frames", type=int, help="Frames per sample")
    gen.add_argument("--noise", type=float, help="Angle noise standard deviation")

    pre = sub.add_parser("preprocess", help="Smooth, center, normalize and subsample a dataset")
    _add_common(pre)
    pre.add_argument("--remap", help="Label remap JSON (old class -> new class)")
    pre.add_argument("--interval", type=int, help="Frame subsampling interval")
    pre.add_argument("--target-frames", type=int, help="Padded length")
    pre.add_argument("--hips", type=_int_list, help="Left and right hip joints, e.g. 12,16")
    pre.add_argument("--no-smooth", action="store_true", help="Skip Savitzky-Golay smoothing")

    tr = sub.add_parser("train", help="Train the reference classifier")
    _add_common(tr)
    tr.add_argument("--epochs", type=int, help="Training epochs")
    tr.add_argument("--lr", type=float, help="Learning rate")

    att = sub.add_parser("attack", help="Run the attack sweep against a trained model")
    _add_common(att)
    att.add_argument("--model", dest="model_path", help="Model checkpoint JSON")
    att.add_argument("--epsilon", type=_float_list, help="Comma-separated epsilon list")
    att.add_argument("--optimizer", type=_str_list, help="pgd, adam or both comma-separated")
    att.add_argument("--termination", type=_str_list, help="es, fr or both comma-separated")
    att.add_argument(
        "--part", action="append", help="Part expression (repeatable), e.g. part6_legs or a+b"
    )
    att.add_argument("--split", default="test", choices=["train", "val", "test"])

    adv = sub.add_parser("advtrain", help="Adversarially train the reference classifier")
    _add_common(adv)
    adv.add_argument("--epsilon", type=float, help="Inner attack epsilon")
    adv.add_argument("--iters", type=int, help="Inner attack iterations")
    adv.add_argument("--mix-ratio", type=float, help="Fraction of each batch replaced")
    adv.add_argument("--epochs", type=int, help="Training epochs")
    adv.add_argument("--monitor", action="store_true", help="Record validation attack success")

    ev = sub.add_parser("eval", help="Evaluate a model or compare defenses")
    _add_common(ev)
    ev.add_argument("--model", dest="model_path", help="Model checkpoint JSON")
    ev.add_argument("--epsilon", type=_float_list, help="Comma-separated epsilon list")
    ev.add_argument(
        "--compare-defenses", action="store_true", help="Train ST, AT and ST+aug and compare"
    )

    dump = sub.add_parser("dump", help="Write original/adversarial skeleton frames as CSV")
    _add_common(dump)
    dump.add_argument("--results", required=True, help="results.jsonl from an attack sweep")
    dump.add_argument("--sample-id", required=True, help="Sample to dump")
    dump.add_argument("--epsilon", type=float, help="Pick the result at this epsilon")
    dump.add_argument("--part", help="Pick the result for this part")
    dump.add_argument("--frames", type=_int_list, default=[0], help="Comma-separated frames")

    return parser


def load_experiment(args: argparse.Namespace) -> ExperimentConfig:
    """Defaults, then the JSON file, then command-line flags."""
    experiment = ExperimentConfig()
    if args.config:
        experiment = ExperimentConfig.from_dict(storage_service.load_json(args.config))

    overrides = {
        "seed": args.seed,
        "topology_path": args.topology,
        "parts_path": args.parts_path,
        "data_dir": args.data,
        "output_dir": args.out,
        "workers": args.workers,
        "model_path": getattr(args, "model_path", None),
    }
    epsilon = getattr(args, "epsilon", None)
    if isinstance(epsilon, list):
        overrides["epsilons"] = epsilon
    if getattr(args, "optimizer", None):
        overrides["optimizers"] = args.optimizer
    if getattr(args, "termination", None):
        overrides["terminations"] = args.termination
    if isinstance(getattr(args, "part", None), list):
        overrides["parts"] = args.part
    experiment = experiment.with_overrides(**overrides)
    experiment.check_files()
    return experiment


def _topology(experiment: ExperimentConfig) -> SkeletonTopology:
    return storage_service.load_topology(experiment.topology_path, experiment.parts_path)


def _success(message: str):
    print(f"{Fore.GREEN}{message}{Style.RESET_ALL}")


def _cmd_gen_data(args, experiment: ExperimentConfig) -> int:
    topo = _topology(experiment)
    spec_data = dict(experiment.generator)
    if args.spec:
        spec_data = storage_service.load_json(args.spec)
    for key, value in (
        ("class_count", args.classes),
        ("samples_per_class", args.samples_per_class),
        ("frames", args.frames),
        ("noise_std", args.noise),
    ):
        if value is not None:
            spec_data[key] = value
    spec = SyntheticSpec.from_dict(spec_data)
    out_dir = args.out or experiment.data_dir
    dataset = harness.generate_dataset_files(spec, topo, experiment.seed, out_dir)
    _success(f"Generated {len(dataset.samples)} motions in {out_dir}")
    return EXIT_OK


def _cmd_preprocess(args, experiment: ExperimentConfig) -> int:
    topo = _topology(experiment)
    settings = dict(experiment.preprocess)
    if args.remap:
        settings["label_remap"] = storage_service.load_label_remap(args.remap)
    if args.interval is not None:
        settings["interval"] = args.interval
    if args.target_frames is not None:
        settings["target_frames"] = args.target_frames
    if args.hips is not None:
        if len(args.hips) != 2:
            raise ConfigurationError(message="--hips needs exactly two joints")
        settings["hip_left"], settings["hip_right"] = args.hips
    if args.no_smooth:
        settings["smooth"] = False
    out_dir = args.out or os.path.join(experiment.data_dir, "processed")
    processed, stats = harness.run_preprocess(
        experiment.data_dir, topo, PreprocessConfig.from_dict(settings), out_dir
    )
    counts = ", ".join(f"{k}={len(v)}" for k, v in processed.items())
    _success(f"Preprocessed {counts} into {out_dir}")
    if stats.floored_channels:
        print(f"{Fore.YELLOW}{stats.floored_channels} channels had sigma floored{Style.RESET_ALL}")
    return EXIT_OK


def _cmd_train(args, experiment: ExperimentConfig) -> int:
    topo = _topology(experiment)
    train_settings = dict(experiment.train)
    if args.epochs is not None:
        train_settings["epochs"] = args.epochs
    if args.lr is not None:
        train_settings["learning_rate"] = args.lr
    experiment = experiment.with_overrides(train=train_settings)
    splits = harness.load_split_samples(experiment.data_dir)
    outcome = harness.train_standard(experiment, splits, topo, experiment.output_dir)
    _success(f"Model saved to {os.path.join(experiment.output_dir, 'model.json')}")
    summary = describe_history(outcome)
    if summary:
        print(summary)
    return EXIT_OK


def _load_model(experiment: ExperimentConfig, topo: SkeletonTopology):
    path = experiment.model_path or os.path.join(experiment.output_dir, "model.json")
    return storage_service.load_checkpoint(path, topo)


def _cmd_attack(args, experiment: ExperimentConfig) -> int:
    topo = _topology(experiment)
    model = _load_model(experiment, topo)
    samples = harness.load_split_samples(experiment.data_dir)[args.split]
    sweep = harness.run_attack_sweep(experiment, model, samples, topo, experiment.output_dir)

    frame = sweep.report.to_frame()
    print(frame.to_string(index=False, na_rep="NA"))
    errors = sum(1 for r in sweep.results if r.failed_with_error)
    if errors:
        print(f"{Fore.YELLOW}{errors} samples failed with errors{Style.RESET_ALL}")
    _success(f"Wrote report.csv, curves.csv and results.jsonl to {experiment.output_dir}")
    return EXIT_OK


def _cmd_advtrain(args, experiment: ExperimentConfig) -> int:
    topo = _topology(experiment)
    adversarial = dict(experiment.adversarial)
    attack_settings = dict(adversarial.get("attack", {}))
    if args.epsilon is not None:
        attack_settings["epsilon"] = args.epsilon
    if args.iters is not None:
        attack_settings["max_iters"] = args.iters
    attack_settings.setdefault("termination", "fr")
    attack_settings.setdefault("max_iters", 10)
    attack_settings.setdefault("epsilon", 0.1)
    adversarial["attack"] = attack_settings
    if args.mix_ratio is not None:
        adversarial["mix_ratio"] = args.mix_ratio
    if args.monitor:
        adversarial["monitor_validation"] = True
    if args.epochs is not None:
        adversarial["train"] = {**adversarial.get("train", {}), "epochs": args.epochs}
    experiment = experiment.with_overrides(adversarial=adversarial)

    splits = harness.load_split_samples(experiment.data_dir)
    outcome = harness.train_adversarial(experiment, splits, topo, experiment.output_dir)
    _success(f"Model saved to {os.path.join(experiment.output_dir, 'model_at.json')}")
    summary = describe_history(outcome)
    if summary:
        print(summary)
    return EXIT_OK


def _cmd_eval(args, experiment: ExperimentConfig) -> int:
    topo = _topology(experiment)
    splits = harness.load_split_samples(experiment.data_dir)
    if args.compare_defenses:
        table = harness.compare_defenses(experiment, splits, topo, experiment.output_dir)
    else:
        model = _load_model(experiment, topo)
        row = {"model": os.path.basename(experiment.model_path or "model.json")}
        row.update(harness.evaluate_model(experiment, model, splits["test"], topo))
        table = pd.DataFrame([row])
        storage_service.write_report(
            table, os.path.join(experiment.output_dir, "eval.csv"), "eval"
        )
    print(table.to_string(index=False, na_rep="NA", float_format=lambda v: f"{v:.4f}"))
    return EXIT_OK


def _cmd_dump(args, experiment: ExperimentConfig) -> int:
    topo = _topology(experiment)
    candidates = [
        r
        for r in storage_service.load_results(args.results)
        if r.sample_id == args.sample_id
        and (args.epsilon is None or abs(r.epsilon - args.epsilon) < 1e-12)
        and (args.part is None or r.part == args.part)
    ]
    if not candidates:
        raise ValidationError(
            message=f"No result for sample {args.sample_id} matches the filters",
            field="sample_id",
        )
    result = candidates[0]
    motions = [
        s for samples in harness.load_split_samples(experiment.data_dir).values() for s in samples
    ]
    original = next((s for s in motions if s.sample_id == args.sample_id), None)
    if original is None:
        raise ValidationError(
            message=f"Sample {args.sample_id} not found under {experiment.data_dir}",
            field="sample_id",
        )
    result = harness.rebuild_result(result, original, topo)
    safe_id = "".join(c if c.isalnum() or c in "-_" else "_" for c in args.sample_id)
    out_path = os.path.join(experiment.output_dir, f"skeleton_{safe_id}.csv")
    table = harness.dump_skeleton_frames(result, args.frames, topo, out_path)
    _success(f"Wrote {len(table)} rows to {out_path}")
    return EXIT_OK


COMMANDS = {
    "gen-data": _cmd_gen_data,
    "preprocess": _cmd_preprocess,
    "train": _cmd_train,
    "attack": _cmd_attack,
    "advtrain": _cmd_advtrain,
    "eval": _cmd_eval,
    "dump": _cmd_dump,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, run one subcommand and return its exit code."""
    colorama_init()
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, str(args.log_level).upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    try:
        experiment = load_experiment(args)
        return COMMANDS[args.command](args, experiment)
    except (ConfigurationError, ValidationError, BadSpecError) as e:
        error_handler.handle_error(e)
        print(f"{Fore.RED}Configuration error: {e.message}{Style.RESET_ALL}", file=sys.stderr)
        for suggestion in e.recovery_suggestions:
            print(f"  - {suggestion}", file=sys.stderr)
        return EXIT_CONFIG
    except ApplicationError as e:
        error_handler.handle_error(e)
        print(f"{Fore.RED}Error: {e.message}{Style.RESET_ALL}", file=sys.stderr)
        for suggestion in e.recovery_suggestions:
            print(f"  - {suggestion}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as e:
        record = error_handler.handle_error(e, context={"command": args.command})
        details = record["technical_details"]["original_message"]
        print(f"{Fore.RED}Unexpected error: {details}{Style.RESET_ALL}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
