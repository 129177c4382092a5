"""
Configuration management for the bone-length attack toolkit.
Handles environment variables and default experiment settings.
"""

import os
from typing import List

from dotenv import load_dotenv

load_dotenv()


class Config:
    """Configuration class for managing toolkit settings."""

    DATA_DIR: str = os.getenv("BONEATTACK_DATA_DIR", "data")
    TOPOLOGY_PATH: str = os.getenv(
        "BONEATTACK_TOPOLOGY_PATH", "data/topologies/ntu25.json"
    )
    OUTPUT_DIR: str = os.getenv("BONEATTACK_OUTPUT_DIR", "outputs")

    SEED: int = int(os.getenv("BONEATTACK_SEED", "0"))
    LOG_LEVEL: str = os.getenv("BONEATTACK_LOG_LEVEL", "INFO")
    WORKERS: int = int(os.getenv("BONEATTACK_WORKERS", "1"))

    HIDDEN_DIM: int = int(os.getenv("BONEATTACK_HIDDEN_DIM", "16"))

    STEP_SIZE: float = float(os.getenv("BONEATTACK_STEP_SIZE", "0.01"))
    MAX_ITERS: int = int(os.getenv("BONEATTACK_MAX_ITERS", "50"))
    EPSILON_GRID: List[float] = [0.05, 0.1, 0.2, 0.3, 0.4, 0.5]

    SIGMA_FLOOR: float = float(os.getenv("BONEATTACK_SIGMA_FLOOR", "1e-6"))
    SUBSAMPLE_INTERVAL: int = 4

    @classmethod
    def validate_config(cls) -> bool:
        """Validate that required configuration is present."""
        if not os.path.exists(cls.TOPOLOGY_PATH):
            print(f"Warning: topology file not found at {cls.TOPOLOGY_PATH}.")
            return False
        if cls.WORKERS < 1:
            print("Warning: BONEATTACK_WORKERS must be at least 1.")
            return False
        return True

    @classmethod
    def get_output_path(cls, output_dir: str = None) -> str:
        """Get (and create) the output folder path."""
        path = output_dir or cls.OUTPUT_DIR
        os.makedirs(path, exist_ok=True)
        return path


config = Config()
