"""
Thin entrypoint + compatibility exports.

Composition root lives in app.py
"""

import sys

from app import MedFpcaApp, build_parser, main
from core.config_manager import ConfigManager
from core.run_config import RunConfig
from domain.mediation import fit_mediation
from domain.simulate import generate_dataset
from domain.study import run_replication

__all__ = [
    "main",
    "MedFpcaApp",
    "build_parser",
    "ConfigManager",
    "RunConfig",
    "fit_mediation",
    "generate_dataset",
    "run_replication",
]


if __name__ == "__main__":
    sys.exit(main())
