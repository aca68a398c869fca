import hashlib
import json
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Union

import pandas as pd
from loguru import logger

from ..models.metrics import BufferCurve, ParetoOptimum, ParetoSet
from ..models.simulation import TraceRow

PARETO_COLUMNS = ["B", "lambda_bar", "g_bar", "x_bar", "T_cycle", "regime", "empirical", "tag"]
CURVE_COLUMNS = ["m", "N", "B0", "envelope", "breakpoint", "tag"]
TRACE_COLUMNS = ["t_seconds", "s", "v", "y", "event", "w", "x", "rate", "goodput"]


class DataNormalizer:
    """Turn analysis results into flat tables and write them to disk."""

    @staticmethod
    def pareto_frame(pset: ParetoSet, optimum: Optional[ParetoOptimum] = None) -> pd.DataFrame:
        """One row per grid point; the knee and the optimum are tagged rows."""
        rows: List[Dict[str, Any]] = []
        for point in pset.points:
            rows.append({**point.model_dump(mode="json"), "tag": ""})
        if pset.knee is not None:
            rows.append({**pset.knee.model_dump(mode="json"), "tag": "knee"})
        if optimum is not None:
            rows.append({**optimum.point.model_dump(mode="json"), "tag": "optimum"})

        df = pd.DataFrame(rows)
        # keep grid order, tagged rows after the grid
        return df[PARETO_COLUMNS]

    @staticmethod
    def curve_frame(curve: BufferCurve) -> pd.DataFrame:
        """Sampled curve, then the two witness rows tagged 'witness'."""
        data = [{**sample.model_dump(), "tag": ""} for sample in curve.samples]
        for sample in curve.witness or ():
            data.append({**sample.model_dump(), "tag": "witness"})
        return pd.DataFrame(data, columns=CURVE_COLUMNS)

    @staticmethod
    def connections_frame(rows: Iterable[Dict[str, Any]]) -> pd.DataFrame:
        return pd.DataFrame(list(rows), columns=["n", "m", "N", "B0", "envelope"])

    @staticmethod
    def trace_frame(trace: Iterable[TraceRow]) -> pd.DataFrame:
        data = [row.model_dump(mode="json") for row in trace]
        return pd.DataFrame(data, columns=TRACE_COLUMNS)

    @staticmethod
    def to_csv(df: pd.DataFrame, float_digits: int = 12) -> str:
        return df.to_csv(index=False, float_format=f"%.{float_digits}g")

    @staticmethod
    def write_text_atomic(path: Union[str, Path], text: str) -> str:
        """Write through a temporary file in the target directory; returns the sha256."""
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp_name = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.")
        try:
            with os.fdopen(fd, "w", newline="") as f:
                f.write(text)
            os.replace(tmp_name, target)
        except Exception:
            Path(tmp_name).unlink(missing_ok=True)
            raise

        digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
        logger.debug(f"wrote {target} ({len(text)} bytes, sha256 {digest[:12]})")
        return digest

    @staticmethod
    def to_json(payload: Any) -> str:
        return json.dumps(payload, indent=2, sort_keys=False) + "\n"
