from pathlib import Path
from typing import Any, Dict, Optional, Union

from loguru import logger

from ..aimd_droptail_fluid import __version__
from ..data_access.data_normalizer import DataNormalizer
from ..models.manifest import RunManifest
from ..utils.config import Config


class ManifestManager:
    """Write output files together with a manifest that records how they were made."""

    def __init__(self, config: Config):
        self.config = config
        self.output_dir = Path(config.paths.output_dir)

    def tolerances(self) -> Dict[str, float]:
        solver = self.config.solver
        return {
            "xtol": solver.xtol,
            "max_iterations": solver.max_iterations,
            "convergence_gap": solver.convergence_gap,
            "critical_tol": solver.critical_tol,
            "max_map_iterations": solver.max_map_iterations,
        }

    def resolve(self, path: Union[str, Path]) -> Path:
        target = Path(path)
        return target if target.is_absolute() else self.output_dir / target

    def create(self, command: str, parameters: Dict[str, Any], unit: str) -> RunManifest:
        return RunManifest(
            command=command,
            parameters=parameters,
            unit=unit,
            tool_version=__version__,
            tolerances=self.tolerances(),
        )

    def record(self, manifest: RunManifest, path: Path, digest: str) -> None:
        manifest.outputs[path.name] = digest

    def save(self, manifest: RunManifest, output: Path) -> Optional[Path]:
        """Write ``<output>.manifest.json`` next to the primary output."""
        if not self.config.output.write_manifest:
            return None

        manifest_path = output.with_name(output.name + ".manifest.json")
        text = DataNormalizer.to_json(manifest.model_dump(mode="json"))
        DataNormalizer.write_text_atomic(manifest_path, text)
        logger.info(f"Saved manifest: {manifest_path}")
        return manifest_path

    @staticmethod
    def load(path: Union[str, Path]) -> Optional[RunManifest]:
        manifest_file = Path(path)
        if not manifest_file.exists():
            return None
        try:
            return RunManifest.model_validate_json(manifest_file.read_text())
        except Exception as e:
            logger.error(f"Error loading manifest {manifest_file}: {e}")
            return None
