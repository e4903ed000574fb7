"""
Experiment configs, command handlers, CSV output and run manifests.
"""

from .router import build_parser, dispatch
from .services import load_section, verify_manifest, write_csv

__all__ = ["build_parser", "dispatch", "load_section", "verify_manifest", "write_csv"]
