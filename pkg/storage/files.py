"""
File access utilities for experiment artifacts.
Handles output directories, atomic writes, JSON, JSON-lines and versioned CSV files.
"""

import json
import os
import tempfile
from contextlib import contextmanager
from typing import Any, Dict, Iterable, Iterator, List, Optional

import pandas as pd

from config import config
from utils.error_handling import FileSystemError, ValidationError

SCHEMA_PREFIX = "# schema:"


class FileStore:
    """Manages paths and raw reads/writes under an output directory."""

    def __init__(self, base_dir: Optional[str] = None):
        """Initialize the store with an optional base directory."""
        self.base_dir = base_dir or config.OUTPUT_DIR

    def resolve(self, path: str) -> str:
        """Relative paths are taken relative to the base directory."""
        if os.path.isabs(path):
            return path
        return os.path.join(self.base_dir, path)

    def _ensure_parent(self, path: str):
        parent = os.path.dirname(path)
        if parent and not os.path.exists(parent):
            os.makedirs(parent, exist_ok=True)

    def require_file(self, path: str):
        """Raise FileSystemError unless ``path`` is an existing file."""
        if not os.path.isfile(path):
            raise FileSystemError(
                message=f"File not found: {path}",
                file_path=path,
                recovery_suggestions=["Check the path or run the step that creates it"],
            )

    @contextmanager
    def open_for_write(self, path: str) -> Iterator:
        """Write to a temporary file and move it into place on success."""
        self._ensure_parent(path)
        directory = os.path.dirname(path) or "."
        fd, tmp_path = tempfile.mkstemp(dir=directory, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
                yield handle
            os.replace(tmp_path, path)
        except Exception:
            if os.path.exists(tmp_path):
                os.remove(tmp_path)
            raise

    def write_json(self, data: Any, path: str):
        with self.open_for_write(path) as handle:
            json.dump(data, handle, indent=2, sort_keys=True)
            handle.write("\n")

    def read_json(self, path: str) -> Any:
        self.require_file(path)
        with open(path, "r", encoding="utf-8") as handle:
            try:
                return json.load(handle)
            except json.JSONDecodeError as e:
                raise ValidationError(
                    message=f"{path} is not valid JSON: {e}", field=os.path.basename(path)
                )

    def write_jsonl(self, records: Iterable[Dict[str, Any]], path: str) -> int:
        count = 0
        with self.open_for_write(path) as handle:
            for record in records:
                handle.write(json.dumps(record, sort_keys=True))
                handle.write("\n")
                count += 1
        return count

    def read_jsonl(self, path: str) -> List[Dict[str, Any]]:
        """Parse a JSON-lines file; blank lines are skipped."""
        self.require_file(path)
        records = []
        with open(path, "r", encoding="utf-8") as handle:
            for line_number, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                try:
                    records.append(json.loads(line))
                except json.JSONDecodeError as e:
                    raise ValidationError(
                        message=f"{path}:{line_number} is not valid JSON: {e}",
                        field=os.path.basename(path),
                    )
        return records

    def write_csv(self, frame: pd.DataFrame, path: str, schema: str):
        """Write a CSV whose first line is ``# schema: <schema> v1``; NaN becomes NA."""
        with self.open_for_write(path) as handle:
            handle.write(f"{SCHEMA_PREFIX} {schema} v1\n")
            frame.to_csv(handle, index=False, na_rep="NA", lineterminator="\n")

    def read_csv(self, path: str) -> pd.DataFrame:
        self.require_file(path)
        return pd.read_csv(path, comment="#", na_values=["NA"])

    def read_schema(self, path: str) -> Optional[str]:
        """Schema tag from the header line, e.g. ``report v1``; None if absent."""
        self.require_file(path)
        with open(path, "r", encoding="utf-8") as handle:
            first = handle.readline().strip()
        if not first.startswith(SCHEMA_PREFIX):
            return None
        return first[len(SCHEMA_PREFIX) :].strip()


file_store = FileStore()
