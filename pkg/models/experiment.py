"""
Data models for experiment orchestration.
Contains ExperimentConfig, SuccessRateCell and SuccessRateReport.
"""

import math
import os
from dataclasses import dataclass, field, fields, replace
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from config import config
from models.attack import AttackResult, OptimizerKind, Termination
from utils.error_handling import ConfigurationError, FileSystemError
from utils.validation import range_validator

REPORT_COLUMNS = [
    "epsilon",
    "optimizer",
    "termination",
    "part",
    "attacked",
    "successes",
    "rate",
    "mean_conf",
    "mean_iters",
]
CURVE_COLUMNS = ["part", "optimizer", "termination", "epsilon", "rate"]

CellKey = Tuple[float, str, str, str]


@dataclass
class ExperimentConfig:
    """
    One experiment: data, topology, model, attack grid, defenses and outputs.

    Nested sections (generator, train, attack, adversarial, augment,
    preprocess) are kept as plain dicts and turned into their typed configs
    by the harness.
    """

    topology_path: str = config.TOPOLOGY_PATH
    parts_path: Optional[str] = None
    data_dir: str = config.DATA_DIR
    output_dir: str = config.OUTPUT_DIR
    model_path: Optional[str] = None
    seed: int = config.SEED
    hidden_dim: int = config.HIDDEN_DIM
    workers: int = config.WORKERS

    epsilons: List[float] = field(default_factory=lambda: list(config.EPSILON_GRID))
    optimizers: List[str] = field(default_factory=lambda: [OptimizerKind.PGD_SIGN.value])
    terminations: List[str] = field(
        default_factory=lambda: [Termination.EARLY_STOP.value, Termination.FULL_RUN.value]
    )
    parts: List[str] = field(default_factory=lambda: ["all"])

    generator: Dict[str, Any] = field(default_factory=dict)
    train: Dict[str, Any] = field(default_factory=dict)
    attack: Dict[str, Any] = field(default_factory=dict)
    adversarial: Dict[str, Any] = field(default_factory=dict)
    augment: Dict[str, Any] = field(default_factory=dict)
    preprocess: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        """Validate the experiment grid."""
        if not self.epsilons:
            raise ConfigurationError(message="epsilon list is empty")
        self.epsilons = [float(e) for e in self.epsilons]
        for eps in self.epsilons:
            range_validator.require_range(eps, "epsilon", 0.0, 1.0, closed=(False, False))

        self.optimizers = [str(o) for o in self.optimizers]
        self.terminations = [str(t) for t in self.terminations]
        for name in self.optimizers:
            range_validator.require_choice(name, "optimizer", [k.value for k in OptimizerKind])
        for name in self.terminations:
            range_validator.require_choice(name, "termination", [k.value for k in Termination])
        if not self.optimizers or not self.terminations or not self.parts:
            raise ConfigurationError(message="optimizer, termination and part lists must be nonempty")

        range_validator.require_positive_int(self.seed, "seed", minimum=0)
        range_validator.require_positive_int(self.hidden_dim, "hidden_dim")
        range_validator.require_positive_int(self.workers, "workers")

    def check_files(self):
        """Raise FileSystemError if a referenced input file is missing."""
        for name in ("topology_path", "parts_path", "model_path"):
            path = getattr(self, name)
            if path is not None and not os.path.isfile(path):
                raise FileSystemError(message=f"{name} not found: {path}", file_path=path)

    def grid(self) -> List[CellKey]:
        """Every (epsilon, optimizer, termination, part) cell, in sweep order."""
        return [
            (eps, opt, term, part)
            for part in self.parts
            for opt in self.optimizers
            for term in self.terminations
            for eps in self.epsilons
        ]

    def with_overrides(self, **overrides) -> "ExperimentConfig":
        """Copy with the non-None overrides applied (command-line flags)."""
        known = {f.name for f in fields(self)}
        changes = {k: v for k, v in overrides.items() if v is not None and k in known}
        return replace(self, **changes)

    def to_dict(self) -> Dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(
                message=f"Unknown experiment config keys: {sorted(unknown)}",
                recovery_suggestions=[f"Known keys: {', '.join(sorted(known))}"],
            )
        return cls(**data)


@dataclass
class SuccessRateCell:
    """Aggregated attack outcome of one grid cell."""

    epsilon: float
    optimizer: str
    termination: str
    part: str
    attacked: int = 0
    successes: int = 0
    mean_conf: float = float("nan")
    mean_iters: float = float("nan")

    @property
    def rate(self) -> float:
        """successes / attacked, NaN for an empty cell."""
        if self.attacked == 0:
            return float("nan")
        return self.successes / self.attacked

    @property
    def key(self) -> CellKey:
        return (self.epsilon, self.optimizer, self.termination, self.part)

    def to_row(self) -> Dict[str, Any]:
        return {
            "epsilon": self.epsilon,
            "optimizer": self.optimizer,
            "termination": self.termination,
            "part": self.part,
            "attacked": self.attacked,
            "successes": self.successes,
            "rate": self.rate,
            "mean_conf": self.mean_conf,
            "mean_iters": self.mean_iters,
        }


@dataclass
class SuccessRateReport:
    """Per-cell success statistics of an attack sweep."""

    cells: List[SuccessRateCell] = field(default_factory=list)

    def cell(self, epsilon: float, optimizer: str, termination: str, part: str) -> SuccessRateCell:
        for cell in self.cells:
            if cell.key == (epsilon, optimizer, termination, part):
                return cell
        raise KeyError((epsilon, optimizer, termination, part))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([c.to_row() for c in self.cells], columns=REPORT_COLUMNS)

    def curves_frame(self) -> pd.DataFrame:
        """Long-format success rate against epsilon per (part, optimizer, termination)."""
        frame = self.to_frame()[CURVE_COLUMNS]
        return frame.sort_values(["part", "optimizer", "termination", "epsilon"]).reset_index(
            drop=True
        )


def aggregate_results(
    results: Iterable[AttackResult], grid: Optional[Sequence[CellKey]] = None
) -> SuccessRateReport:
    """
    Recompute report cells from per-sample results.

    Samples that failed with an error count as attacked without success and
    are left out of the iteration mean. Cells listed in ``grid`` without
    any result appear with attacked = 0 and NaN statistics.
    """
    grouped: Dict[CellKey, List[AttackResult]] = {}
    for result in results:
        key = (float(result.epsilon), result.optimizer, result.termination, result.part)
        grouped.setdefault(key, []).append(result)

    keys = list(grid) if grid is not None else []
    listed = set(keys)
    keys += [k for k in grouped if k not in listed]

    cells = []
    for key in keys:
        members = grouped.get(key, [])
        succeeded = [r.final_confidence for r in members if r.success]
        iterations = [r.iterations_used for r in members if not r.failed_with_error]
        cells.append(
            SuccessRateCell(
                epsilon=key[0],
                optimizer=key[1],
                termination=key[2],
                part=key[3],
                attacked=len(members),
                successes=len(succeeded),
                mean_conf=float(np.mean(succeeded)) if succeeded else math.nan,
                mean_iters=float(np.mean(iterations)) if iterations else math.nan,
            )
        )
    return SuccessRateReport(cells=cells)
