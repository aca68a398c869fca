"""Application layer for user interfaces."""

from .cli_interface import CLIInterface
from .manifest import ManifestManager
from .pipelines import AnalysisPipeline

__all__ = ["CLIInterface", "AnalysisPipeline", "ManifestManager"]
