"""
Generate whitespace-separated plot data from a suite report.
"""
import logging
import re
from pathlib import Path
from typing import List, Sequence, Union

import numpy as np

from .schemas import CheckReport, SuiteReport

logger = logging.getLogger(__name__)


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", text).strip("_") or "check"


class PlotDataWriter:
    """Write one columnar file per tabulated relation of a report."""

    def __init__(self, report: SuiteReport, directory: Union[str, Path]):
        """
        Initialize the writer.

        Args:
            report: Suite report
            directory: Target directory, created on the first write
        """
        self.report = report
        self.directory = Path(directory)
        self.written: List[Path] = []

    def _add_table(self, name: str, header: str, rows: Sequence[Sequence[float]]) -> None:
        """
        Write a table if it has rows.

        Args:
            name: File name
            header: Column names, written as a comment line
            rows: Table rows
        """
        if not rows:
            return
        self.directory.mkdir(parents=True, exist_ok=True)
        path = self.directory / name
        np.savetxt(path, np.asarray(rows, dtype=float), fmt="%.17g", header=header)
        self.written.append(path)

    def _psi_table(self, index: int, check: CheckReport) -> None:
        rows = [(pt.weight_constant, pt.measured_constant) for pt in check.psi_trace]
        self._add_table(f"{index:02d}_{_slug(check.label or check.name)}_psi.dat", "weight_constant measured_constant", rows)

    def _profile_table(self, index: int, check: CheckReport) -> None:
        if check.profile is None:
            return
        # log-log plots: positive ratios only
        rows = [(pt.d / pt.t, pt.ratio) for pt in check.profile.points if pt.ratio > 0]
        self._add_table(f"{index:02d}_{_slug(check.label or check.name)}_offdiag.dat", "d_over_t ratio", rows)

    def generate(self) -> List[Path]:
        """
        Write all tables.

        Returns:
            Written paths; empty when the report tabulates nothing
        """
        for index, check in enumerate(self.report.checks):
            self._psi_table(index, check)
            self._profile_table(index, check)
        logger.debug(f"✓ Wrote {len(self.written)} plot data files")
        return self.written


def emit_plot_data(report: SuiteReport, directory: Union[str, Path]) -> List[Path]:
    """
    Write plot data files for a report.

    Args:
        report: Suite report
        directory: Target directory

    Returns:
        Written paths
    """
    return PlotDataWriter(report, directory).generate()
