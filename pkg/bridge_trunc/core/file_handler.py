"""
Report, weight and path output: JSON for reports, CSV for everything that
gets plotted
"""
import logging
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel

from ..config import settings
from ..models import ExperimentReport, ProbeReport, SubordinationReport
from .ensembles import WeightMatrix
from .errors import OutputError
from .log_manager import log_manager
from .processes import GridPath
from .stats import CONJECTURE_BANNER

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"

Report = Union[ExperimentReport, SubordinationReport, ProbeReport]


def report_frame(report: Report) -> pd.DataFrame:
    """One CSV row per comparison (experiments), per point (subordination) or per probe row"""
    if isinstance(report, ExperimentReport):
        return pd.DataFrame([{
            "p_s": c.p[0], "p_t": c.p[1], "q_s": c.q[0], "q_t": c.q[1],
            "empirical": c.empirical, "se": c.se, "target": c.target, "limit": c.limit,
            "z": c.z, "passed": c.passed,
        } for c in report.comparisons])
    if isinstance(report, SubordinationReport):
        return pd.DataFrame([{
            "s": c.point[0], "t": c.point[1], "ks_statistic": c.ks_statistic, "p_value": c.p_value,
            "mean_random": c.mean_random, "se_random": c.se_random,
            "mean_subordinated": c.mean_subordinated, "se_subordinated": c.se_subordinated,
            "z": c.z, "passed": c.passed,
        } for c in report.points])
    frame = pd.DataFrame([row.model_dump() for row in report.rows])
    if CONJECTURE_BANNER in report.notes:
        frame["note"] = CONJECTURE_BANNER
    return frame


def weights_frame(weights: WeightMatrix) -> pd.DataFrame:
    """i,j,w with 1-based indices; permutations list only their unit entries"""
    n = weights.n
    if weights.is_sparse:
        return pd.DataFrame({"i": np.arange(1, n + 1), "j": weights.sigma + 1, "w": np.ones(n)})
    i, j = np.meshgrid(np.arange(1, n + 1), np.arange(1, n + 1), indexing="ij")
    return pd.DataFrame({"i": i.ravel(), "j": j.ravel(), "w": weights.w.ravel()})


class OutputManager:
    """Writes run artifacts below one output directory"""

    def __init__(self, out_dir: Optional[Union[str, Path]] = None):
        self._out_dir = Path(out_dir) if out_dir else None

    @property
    def out_dir(self) -> Path:
        """The fixed directory, or settings.out read at write time"""
        return self._out_dir or Path(settings.out)

    def _target(self, name: str) -> Path:
        try:
            self.out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise OutputError(self.out_dir, e.strerror or str(e)) from e
        return self.out_dir / name

    def write_text(self, name: str, text: str) -> Path:
        path = self._target(name)
        try:
            path.write_text(text, encoding="utf-8")
        except OSError as e:
            raise OutputError(path, e.strerror or str(e)) from e
        logger.info(f"Wrote {path}")
        return path

    def write_frame(self, name: str, frame: pd.DataFrame) -> Path:
        path = self._target(name)
        try:
            frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
        except OSError as e:
            raise OutputError(path, e.strerror or str(e)) from e
        logger.info(f"Wrote {path}")
        return path

    def write_json(self, name: str, model: BaseModel) -> Path:
        return self.write_text(name, model.model_dump_json(indent=2) + "\n")

    def write_report(self, stem: str, report: Report) -> Tuple[Path, Path]:
        """<stem>.json and <stem>.csv"""
        return (self.write_json(f"{stem}.json", report),
                self.write_frame(f"{stem}.csv", report_frame(report)))

    def write_weights(self, name: str, weights: WeightMatrix) -> Path:
        return self.write_frame(name, weights_frame(weights))

    def write_path(self, name: str, path: GridPath) -> Path:
        return self.write_frame(name, path.to_frame())

    def write_log(self, stem: str, fmt: str = "text") -> Path:
        suffix = {"text": "txt", "json": "json", "csv": "csv"}.get(fmt, fmt)
        return self.write_text(f"{stem}.log.{suffix}", log_manager.export(fmt))


# Global output manager instance, writing below settings.out
output_manager = OutputManager()
