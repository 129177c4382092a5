#!/usr/bin/env python3
"""
Protocol-trend acceptance run on the synthetic benchmark.

Generates the dataset, trains the reference classifier and checks:
  - success rate non-decreasing in epsilon (2 point tolerance) and
    rate@0.5 >= rate@0.1 + 10 points
  - full-run misclassified confidence above early-stop at every epsilon
  - early-stop replay: one update fewer still predicts the true label
  - Adam sweep keeps the PGD ordering across epsilon
  - adversarial training lowers rate@0.1 by >= 5 points, augmentation by > 0
  - the same seed reproduces report.csv byte for byte
"""

import argparse
import filecmp
import math
import os
import sys
import tempfile
import time
from pathlib import Path

project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from models.attack import BoneScaleVector  # noqa: E402
from models.experiment import ExperimentConfig  # noqa: E402
from services import harness  # noqa: E402
from services.attack_engine import attack  # noqa: E402
from services.classifier import accuracy, predict  # noqa: E402
from services.preprocess import PreprocessConfig  # noqa: E402
from services.reparam import reparameterize  # noqa: E402
from services.synthetic import SyntheticSpec  # noqa: E402
from storage.service import storage_service  # noqa: E402

EPSILONS = [0.1, 0.3, 0.5]


class Checklist:
    """Prints one line per check and counts failures."""

    def __init__(self):
        self.failed = 0

    def record(self, name: str, ok: bool, detail: str = ""):
        status = "✅" if ok else "❌"
        print(f"{status} {name}" + (f": {detail}" if detail else ""))
        if not ok:
            self.failed += 1


def _rates(report, optimizer: str, termination: str):
    return [report.cell(e, optimizer, termination, "all").rate for e in EPSILONS]


def _non_decreasing(rates, tolerance: float = 0.02) -> bool:
    return all(b >= a - tolerance for a, b in zip(rates, rates[1:]))


def _replay_early_stop(experiment, model, samples, topo, limit: int = 50) -> bool:
    config = harness.attack_config_for(experiment, topo, 0.3, "pgd", "es", "all")
    checked = 0
    for sample in samples:
        if predict(model, sample) != sample.label:
            continue
        result = attack(model, sample, topo, config, record_trace=True)
        if not result.success or result.iterations_used == 0:
            continue
        previous = BoneScaleVector(result.beta_trace[result.iterations_used - 1], config.epsilon)
        if predict(model, reparameterize(sample, topo, previous)) != sample.label:
            return False
        checked += 1
        if checked >= limit:
            break
    return checked > 0


def main():
    parser = argparse.ArgumentParser(description="Run the protocol-trend acceptance checks")
    parser.add_argument("--out", help="Working directory (default: a temporary one)")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--samples-per-class", type=int, default=100)
    parser.add_argument("--epochs", type=int, default=60)
    parser.add_argument("--skip-defenses", action="store_true")
    args = parser.parse_args()

    out_dir = args.out or tempfile.mkdtemp(prefix="boneattack_acceptance_")
    data_dir = os.path.join(out_dir, "data")
    started = time.time()
    checks = Checklist()

    experiment = ExperimentConfig(
        topology_path=str(project_root / "data" / "topologies" / "ntu25.json"),
        data_dir=os.path.join(data_dir, "processed"),
        output_dir=os.path.join(out_dir, "run"),
        seed=args.seed,
        epsilons=EPSILONS,
        optimizers=["pgd"],
        terminations=["es", "fr"],
        train={"epochs": args.epochs, "learning_rate": 0.05, "batch_size": 32, "patience": 15},
        attack={"step_size": 0.01, "max_iters": 50},
        adversarial={"attack": {"epsilon": 0.1, "max_iters": 10, "termination": "fr"}},
    )
    topo = storage_service.load_topology(experiment.topology_path)
    spec = SyntheticSpec(class_count=8, samples_per_class=args.samples_per_class, frames=32)
    harness.generate_dataset_files(spec, topo, args.seed, data_dir)
    harness.run_preprocess(
        data_dir, topo, PreprocessConfig(interval=1), experiment.data_dir
    )
    splits = harness.load_split_samples(experiment.data_dir)

    outcome = harness.train_standard(experiment, splits, topo, experiment.output_dir)
    clean = accuracy(outcome.model, splits["test"])
    checks.record("clean accuracy >= 0.90", clean >= 0.90, f"{clean:.3f}")

    sweep = harness.run_attack_sweep(
        experiment, outcome.model, splits["test"], topo, experiment.output_dir
    )
    es_rates = _rates(sweep.report, "pgd", "es")
    checks.record(
        "ES success non-decreasing in epsilon",
        _non_decreasing(es_rates),
        ", ".join(f"{r:.3f}" for r in es_rates),
    )
    checks.record("rate@0.5 >= rate@0.1 + 0.10", es_rates[2] >= es_rates[0] + 0.10)

    for eps in EPSILONS:
        es = sweep.report.cell(eps, "pgd", "es", "all").mean_conf
        fr = sweep.report.cell(eps, "pgd", "fr", "all").mean_conf
        ok = not (math.isnan(es) or math.isnan(fr)) and fr > es
        checks.record(f"FR confidence > ES confidence at eps={eps}", ok, f"{fr:.3f} vs {es:.3f}")

    checks.record(
        "early-stop replay", _replay_early_stop(experiment, outcome.model, splits["test"], topo)
    )

    adam_experiment = experiment.with_overrides(
        optimizers=["adam"], terminations=["es"], output_dir=os.path.join(out_dir, "adam")
    )
    adam = harness.run_attack_sweep(adam_experiment, outcome.model, splits["test"], topo)
    adam_rates = _rates(adam.report, "adam", "es")
    order = sorted(range(len(EPSILONS)), key=lambda i: es_rates[i])
    adam_order = sorted(range(len(EPSILONS)), key=lambda i: adam_rates[i])
    checks.record(
        "Adam ordering matches PGD",
        order == adam_order or _non_decreasing(adam_rates),
        ", ".join(f"{r:.3f}" for r in adam_rates),
    )

    rerun = experiment.with_overrides(output_dir=os.path.join(out_dir, "rerun"))
    again = harness.train_standard(rerun, splits, topo)
    harness.run_attack_sweep(rerun, again.model, splits["test"], topo, rerun.output_dir)
    checks.record(
        "report.csv reproducible",
        filecmp.cmp(
            os.path.join(experiment.output_dir, "report.csv"),
            os.path.join(rerun.output_dir, "report.csv"),
            shallow=False,
        ),
    )

    if not args.skip_defenses:
        defense_experiment = experiment.with_overrides(
            epsilons=[0.1], output_dir=os.path.join(out_dir, "defenses")
        )
        table = harness.compare_defenses(
            defense_experiment, splits, topo, defense_experiment.output_dir
        ).set_index("model")
        st, at, aug = (table.loc[m, "rate@0.1"] for m in ("ST", "AT", "ST+aug"))
        checks.record("AT lowers rate@0.1 by >= 5 points", at <= st - 0.05, f"{st:.3f} -> {at:.3f}")
        checks.record("augmentation lowers rate@0.1", aug < st, f"{st:.3f} -> {aug:.3f}")

    print("\n" + "=" * 60)
    if checks.failed:
        print(f"⚠️ {checks.failed} check(s) failed")
    else:
        print("🎉 All acceptance checks passed")
    print(f"Finished in {time.time() - started:.0f}s; outputs in {out_dir}")
    return 1 if checks.failed else 0


if __name__ == "__main__":
    sys.exit(main())
