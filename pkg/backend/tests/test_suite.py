import json
import math

import numpy as np
import pandas as pd
import pytest

from app.plots import emit_plot_data
from app.registry import RunContext
from app.schemas import CheckInvocation, CheckReport, CheckStatus, PsiPoint, ReportMeta, ResolutionStep, SuiteConfig, SuiteReport
from app.suite import (
    EXIT_CHECK_FAILURE,
    EXIT_OK,
    PLOT_DIR,
    REPORT_FILE,
    SUMMARY_FILE,
    execute,
    exit_status,
    read_report,
    run_invocation,
    run_suite,
    summary_frame,
    write_report,
)

SMALL = [ResolutionStep(cells=32, levels=4)]


def make_suite(tmp_path, checks, **overrides):
    settings = {"seed": 11, "ladder_1d": SMALL, "ladder_2d": [ResolutionStep(cells=8, levels=2)], "output_dir": str(tmp_path)}
    settings.update(overrides)
    return SuiteConfig(checks=checks, **settings)


def fubini(label=None):
    return CheckInvocation(check="fubini", label=label, params={"instances": 3, "dims": [1], "rs": [2]})


def negative_control():
    return CheckInvocation(
        check="weight_constant",
        label="a2_outside",
        params={"weight": "power:-1.5", "class": "A_p", "exponent": 2},
        expect_fail=True,
    )


def test_empty_suite(tmp_path):
    status, report = run_suite(make_suite(tmp_path, []))
    assert status == EXIT_OK
    assert report.checks == []
    assert read_report(tmp_path / REPORT_FILE).checks == []
    assert pd.read_csv(tmp_path / SUMMARY_FILE).empty
    assert not (tmp_path / PLOT_DIR).exists()


def test_fubini_suite_passes(tmp_path):
    status, report = run_suite(make_suite(tmp_path, [fubini()]))
    assert status == EXIT_OK
    (check,) = report.checks
    assert check.status == CheckStatus.PASS
    assert check.params.seed == 11
    assert check.measured["instances"] == 3.0


def test_negative_control_counts_as_success(tmp_path):
    status, report = run_suite(make_suite(tmp_path, [negative_control()]))
    assert status == EXIT_OK
    assert report.checks[0].status == CheckStatus.DIVERGENT
    assert report.checks[0].outcome == "expected-fail: pass"
    summary = pd.read_csv(tmp_path / SUMMARY_FILE)
    assert summary.loc[0, "outcome"] == "expected-fail: pass"
    assert summary.loc[0, "label"] == "a2_outside"


def test_runtime_error_becomes_an_error_entry(tmp_path):
    broken = CheckInvocation(check="offdiag_proposition", params={"M": 0.4})
    status, report = run_suite(make_suite(tmp_path, [broken, fubini()]))
    assert status == EXIT_CHECK_FAILURE
    assert report.checks[0].status == CheckStatus.ERROR
    assert report.checks[0].reason.startswith("ParameterError")
    assert report.checks[1].status == CheckStatus.PASS


def test_error_is_not_an_expected_failure():
    inv = CheckInvocation(check="offdiag_proposition", params={"M": 0.4}, expect_fail=True)
    ctx = RunContext(seed=1, ladder_1d=SMALL, ladder_2d=SMALL)
    report = run_invocation(inv, ctx)
    assert report.status == CheckStatus.ERROR
    assert not report.succeeded
    assert report.outcome == "expected-fail: fail"


def test_offdiag_claims_decay_of_order_n_by_default():
    inv = CheckInvocation(
        check="offdiag_proposition",
        label="offdiag_heat",
        params={"family": "heat", "count": 2, "ts": [0.5], "gaps": [1, 2, 4], "ladder": "64x4"},
    )
    report = run_invocation(inv, RunContext(seed=5, ladder_1d=SMALL, ladder_2d=SMALL))
    assert report.params.M == 1.0
    assert report.status == CheckStatus.PASS
    assert report.measured["M_fit"] >= 1.0
    explicit = CheckInvocation(check="offdiag_proposition", params={"family": "heat", "M": 2, "count": 2, "ts": [0.5], "ladder": "64x4"})
    assert run_invocation(explicit, RunContext(seed=5, ladder_1d=SMALL, ladder_2d=SMALL)).params.M == 2.0


def test_coifman_fefferman_sweeps_every_weight():
    inv = CheckInvocation(check="coifman_fefferman_tent", params={"count": 2, "ps": [1, 2], "ss": [1], "ladder": "32x4"})
    report = run_invocation(inv, RunContext(seed=5, ladder_1d=SMALL, ladder_2d=SMALL))
    assert report.status == CheckStatus.PASS
    assert {"C:const:1/p=1", "C:power:0.5/p=2,s=1", "power:0.5/A_inf"} <= set(report.measured)


def test_lemma_aver_ratio_tightens_along_the_ladder():
    inv = CheckInvocation(check="lemma_aver", params={"samples": 30, "ladder": "32x4,64x4,128x4"})
    report = run_invocation(inv, RunContext(seed=5, ladder_1d=SMALL, ladder_2d=SMALL))
    assert report.status == CheckStatus.PASS
    ratios = report.series["max_ratio"]
    assert len(ratios) == 3
    assert report.measured["excess:max_ratio"] <= max(0.0, ratios[0] / report.bound - 1.0)
    assert report.bound == 2.0


def test_reports_are_byte_identical_across_runs(tmp_path):
    checks = [fubini("first"), CheckInvocation(check="lemma_aver", params={"samples": 20, "ladder": "32x4,64x8"}), negative_control()]
    run_suite(make_suite(tmp_path / "a", checks, jobs=1))
    run_suite(make_suite(tmp_path / "b", checks, jobs=3))
    for name in (REPORT_FILE, SUMMARY_FILE):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_parallel_execution_keeps_config_order(tmp_path):
    checks = [fubini(f"run{index}") for index in range(4)]
    report = execute(make_suite(tmp_path, checks), jobs=4)
    assert [check.label for check in report.checks] == ["run0", "run1", "run2", "run3"]
    assert report.meta.timestamp is None
    assert all(check.runtime is None for check in report.checks)


def test_timing_records_runtime(tmp_path):
    report = execute(make_suite(tmp_path, [fubini()], timing=True))
    assert report.meta.timestamp is not None
    assert report.checks[0].runtime >= 0.0


def test_report_round_trips_through_json(tmp_path):
    _, report = run_suite(make_suite(tmp_path, [fubini(), negative_control()], format="json"))
    assert read_report(tmp_path / REPORT_FILE) == report
    assert not (tmp_path / SUMMARY_FILE).exists()


def test_exit_status_and_summary():
    meta = ReportMeta(version="1.0.0", seed=1)
    ok = CheckReport(name="a")
    failed = CheckReport(name="b", status=CheckStatus.FAIL, reason="too big")
    assert exit_status(SuiteReport(meta=meta, checks=[ok])) == EXIT_OK
    assert exit_status(SuiteReport(meta=meta, checks=[ok, failed])) == EXIT_CHECK_FAILURE
    frame = summary_frame(SuiteReport(meta=meta, checks=[ok, failed]))
    assert list(frame["outcome"]) == ["pass", "fail"]
    assert list(frame["reason"]) == ["", "too big"]


def test_plot_data_for_psi_trace(tmp_path):
    points = [PsiPoint(label=f"w{i}", weight_constant=1.0 + i, measured_constant=2.0 + 0.5 * i) for i in range(4)]
    report = SuiteReport(meta=ReportMeta(version="1.0.0", seed=1), checks=[CheckReport(name="extrapolation_i", psi_trace=points)])
    (path,) = emit_plot_data(report, tmp_path / "plots")
    assert path.name == "00_extrapolation_i_psi.dat"
    table = np.loadtxt(path)
    assert table.shape == (4, 2)
    np.testing.assert_array_equal(table[:, 0], [1.0, 2.0, 3.0, 4.0])


def test_plot_data_skips_empty_reports(tmp_path):
    report = SuiteReport(meta=ReportMeta(version="1.0.0", seed=1), checks=[CheckReport(name="fubini")])
    assert emit_plot_data(report, tmp_path / "plots") == []
    assert not (tmp_path / "plots").exists()


@pytest.mark.parametrize("fmt, files", [("json", {REPORT_FILE}), ("csv", {SUMMARY_FILE}), ("both", {REPORT_FILE, SUMMARY_FILE})])
def test_output_formats(tmp_path, fmt, files):
    run_suite(make_suite(tmp_path, [], format=fmt))
    assert {path.name for path in tmp_path.iterdir()} == files


def reject_constant(token):
    raise ValueError(f"non-standard JSON constant {token}")


def test_report_is_strict_json_with_exact_floats(tmp_path):
    check = CheckReport(name="lemma_aver", measured={"max_ratio": 0.1 + 0.2, "unbounded": math.inf}, bound=math.inf)
    report = SuiteReport(meta=ReportMeta(version="1.0.0", seed=1), checks=[check])
    write_report(report, str(tmp_path), fmt="json", plots=False)
    document = json.loads((tmp_path / REPORT_FILE).read_text(encoding="utf-8"), parse_constant=reject_constant)
    (written,) = document["checks"]
    assert written["measured"]["unbounded"] == "Infinity"
    assert written["bound"] == "Infinity"
    assert written["measured"]["max_ratio"] == 0.1 + 0.2
    parsed = read_report(tmp_path / REPORT_FILE)
    assert parsed.checks[0].measured["unbounded"] == math.inf
    assert parsed == report
