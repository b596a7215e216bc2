"""
Suite execution and report emission.
"""
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path
from typing import List, Optional, Tuple

import pandas as pd

from . import __version__
from .errors import TentlabError
from .parser import invocation_label
from .plots import emit_plot_data
from .registry import RunContext, run_check, validate_args
from .schemas import CheckInvocation, CheckReport, CheckStatus, ReportMeta, SuiteConfig, SuiteReport

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILURE = 1
EXIT_CONFIG_ERROR = 2

REPORT_FILE = "report.json"
SUMMARY_FILE = "summary.csv"
PLOT_DIR = "plots"


def run_invocation(invocation: CheckInvocation, ctx: RunContext, timing: bool = False) -> CheckReport:
    """
    Run one configured check.

    Exceptions raised by the check become a report with status "error".
    """
    label = invocation_label(invocation)
    logger.info(f"→ {label}")
    started = time.perf_counter()
    try:
        report = run_check(invocation.check, validate_args(invocation.check, invocation.params), ctx)
    except (TentlabError, ValueError, ArithmeticError, MemoryError) as e:
        logger.error(f"✗ {label}: {type(e).__name__}: {e}")
        report = CheckReport(name=invocation.check, status=CheckStatus.ERROR, reason=f"{type(e).__name__}: {e}")
    report = report.model_copy(
        update={
            "name": invocation.check,
            "label": invocation.label,
            "expect_fail": invocation.expect_fail,
            "runtime": time.perf_counter() - started if timing else None,
        }
    )
    mark = "✓" if report.succeeded else "✗"
    suffix = "" if report.reason is None else f" ({report.reason})"
    logger.info(f"{mark} {label}: {report.outcome}{suffix}")
    return report


def execute(suite: SuiteConfig, jobs: Optional[int] = None) -> SuiteReport:
    """
    Run every check of a suite, `jobs` at a time.

    Reports keep configuration order whatever the completion order.
    """
    jobs = suite.jobs if jobs is None else jobs
    contexts = [
        RunContext(seed=suite.seed, ladder_1d=suite.ladder_1d, ladder_2d=suite.ladder_2d, stream=index)
        for index in range(len(suite.checks))
    ]
    if jobs == 1 or len(suite.checks) <= 1:
        checks = [run_invocation(inv, ctx, suite.timing) for inv, ctx in zip(suite.checks, contexts)]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            checks = list(pool.map(lambda pair: run_invocation(pair[0], pair[1], suite.timing), zip(suite.checks, contexts)))
    timestamp = datetime.now(timezone.utc).isoformat() if suite.timing else None
    return SuiteReport(meta=ReportMeta(version=__version__, seed=suite.seed, timestamp=timestamp), checks=checks)


def exit_status(report: SuiteReport) -> int:
    """0 when every check behaved as designed, otherwise 1."""
    return EXIT_OK if all(check.succeeded for check in report.checks) else EXIT_CHECK_FAILURE


def summary_frame(report: SuiteReport) -> pd.DataFrame:
    """One row per check: identity, outcome, bound and the recorded seed."""
    rows = [
        {
            "check": check.name,
            "label": check.label or check.name,
            "outcome": check.outcome,
            "status": check.status.value,
            "expect_fail": check.expect_fail,
            "n": check.params.n,
            "N": ";".join(str(cells) for cells in check.params.N or []),
            "bound": check.bound,
            "slack": check.slack,
            "seed": check.params.seed,
            "reason": check.reason or "",
        }
        for check in report.checks
    ]
    columns = ["check", "label", "outcome", "status", "expect_fail", "n", "N", "bound", "slack", "seed", "reason"]
    return pd.DataFrame(rows, columns=columns)


def write_report(report: SuiteReport, output_dir: str, fmt: str = "both", plots: bool = True) -> List[Path]:
    """
    Write the JSON report, the CSV summary and the plot data.

    Returns:
        Paths of the written files
    """
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if fmt in ("json", "both"):
        path = out / REPORT_FILE
        path.write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")
        written.append(path)
    if fmt in ("csv", "both"):
        path = out / SUMMARY_FILE
        summary_frame(report).to_csv(path, index=False)
        written.append(path)
    if plots:
        written.extend(emit_plot_data(report, out / PLOT_DIR))
    return written


def read_report(path: str) -> SuiteReport:
    """Re-parse a written JSON report."""
    return SuiteReport.model_validate_json(Path(path).read_text(encoding="utf-8"))


def run_suite(suite: SuiteConfig) -> Tuple[int, SuiteReport]:
    """
    Execute a suite and write its report files.

    Returns:
        (exit status, report)
    """
    logger.info(f"→ Running {len(suite.checks)} checks with seed {suite.seed} on {suite.jobs} worker(s)")
    report = execute(suite)
    written = write_report(report, suite.output_dir, suite.format)
    status = exit_status(report)
    passed = sum(check.succeeded for check in report.checks)
    logger.info(f"{'✓' if status == EXIT_OK else '✗'} {passed}/{len(report.checks)} checks behaved as designed")
    for path in written:
        logger.debug(f"✓ Wrote {path}")
    return status, report
