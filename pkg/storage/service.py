"""
Storage service with load/save operations for every experiment artifact.
Provides typed persistence for topologies, datasets, checkpoints, stats and results.
"""

import logging
import os
from typing import Dict, List, Optional, Sequence

import pandas as pd

from models.attack import AttackResult
from models.skeleton import MotionSample, SkeletonTopology
from services.classifier import ReferenceClassifier
from services.preprocess import NormalizationStats
from storage.files import FileStore, file_store
from utils.error_handling import (
    ErrorCategory,
    ErrorSeverity,
    ValidationError,
    with_error_handling,
)

logger = logging.getLogger(__name__)


class StorageService:
    """Service class for reading and writing experiment files."""

    def __init__(self, store: Optional[FileStore] = None):
        """Initialize the storage service."""
        self.store = store or file_store

    @with_error_handling(category=ErrorCategory.FILE_SYSTEM, severity=ErrorSeverity.HIGH)
    def load_topology(self, path: str, parts_path: Optional[str] = None) -> SkeletonTopology:
        """Load a topology file, optionally replacing its parts from another file."""
        topo = SkeletonTopology.from_dict(self.store.read_json(path))
        if parts_path:
            data = self.store.read_json(parts_path)
            parts = data.get("parts", data)
            topo = topo.with_parts(parts, approximate=bool(data.get("parts_approximate", False)))
        logger.info(f"Loaded topology '{topo.name}' ({topo.joint_count} joints) from {path}")
        return topo

    def save_topology(self, topo: SkeletonTopology, path: str):
        self.store.write_json(topo.to_dict(), path)

    @with_error_handling(category=ErrorCategory.FILE_SYSTEM, severity=ErrorSeverity.HIGH)
    def load_dataset(self, path: str) -> List[MotionSample]:
        """Load motions from JSON-lines; records without an id get ``<file>:<n>``."""
        stem = os.path.splitext(os.path.basename(path))[0]
        samples = [
            MotionSample.from_dict(record, default_id=f"{stem}:{n}")
            for n, record in enumerate(self.store.read_jsonl(path))
        ]
        logger.info(f"Loaded {len(samples)} motions from {path}")
        return samples

    def save_dataset(self, samples: Sequence[MotionSample], path: str) -> int:
        count = self.store.write_jsonl((s.to_dict() for s in samples), path)
        logger.info(f"Wrote {count} motions to {path}")
        return count

    def load_splits(self, path: str) -> Dict[str, List[str]]:
        data = self.store.read_json(path)
        return {str(name): [str(sid) for sid in ids] for name, ids in data.items()}

    def save_splits(self, splits: Dict[str, List[str]], path: str):
        self.store.write_json(splits, path)

    def load_checkpoint(self, path: str, topo: SkeletonTopology) -> ReferenceClassifier:
        """Load a model checkpoint and check it against ``topo``."""
        model = ReferenceClassifier.from_dict(self.store.read_json(path), topo)
        logger.info(
            f"Loaded model from {path}: D={model.hidden_dim}, L={model.class_count}"
        )
        return model

    def save_checkpoint(self, model: ReferenceClassifier, path: str, topo_name: str = ""):
        data = model.to_dict()
        data["topology"] = topo_name
        self.store.write_json(data, path)
        logger.info(f"Saved model checkpoint to {path}")

    def load_stats(self, path: str) -> NormalizationStats:
        return NormalizationStats.from_dict(self.store.read_json(path))

    def save_stats(self, stats: NormalizationStats, path: str):
        self.store.write_json(stats.to_dict(), path)

    def load_label_remap(self, path: str) -> Dict[int, int]:
        """Old-class -> new-class map from a JSON object."""
        data = self.store.read_json(path)
        if not isinstance(data, dict):
            raise ValidationError(message=f"{path} must hold a JSON object", field="label_remap")
        try:
            return {int(k): int(v) for k, v in data.items()}
        except (TypeError, ValueError):
            raise ValidationError(
                message=f"{path} must map integer class ids to integer class ids",
                field="label_remap",
            )

    def save_results(self, results: Sequence[AttackResult], path: str) -> int:
        return self.store.write_jsonl((r.to_dict() for r in results), path)

    def load_results(self, path: str) -> List[AttackResult]:
        return [AttackResult.from_dict(record) for record in self.store.read_jsonl(path)]

    def write_report(self, frame: pd.DataFrame, path: str, schema: str):
        self.store.write_csv(frame, path, schema)
        logger.info(f"Wrote {schema} ({len(frame)} rows) to {path}")

    def read_report(self, path: str) -> pd.DataFrame:
        return self.store.read_csv(path)

    def save_json(self, data: dict, path: str):
        self.store.write_json(data, path)

    def load_json(self, path: str) -> dict:
        return self.store.read_json(path)


storage_service = StorageService()
