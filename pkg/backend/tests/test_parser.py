import math
import textwrap

import pytest

from app.config import config
from app.errors import ConfigError
from app.parser import SuiteParser, invocation_label, load_suite
from app.registry import validate_args


def parse(text):
    return SuiteParser(textwrap.dedent(text), source="suite.yaml").parse()


def test_parse_valid_suite():
    suite = parse(
        """
        seed: 7
        ladder_1d: 32x4,64x8
        jobs: 3
        format: json
        checks:
          - check: fubini
            label: fubini_small
            params: {instances: 3, dims: [1], ladder: 32x4}
          - check: weight_constant
            expect_fail: true
            params: {weight: "power:-1.5", class: A_p, exponent: 2}
        """
    )
    assert suite.seed == 7
    assert [(s.cells, s.levels) for s in suite.ladder_1d] == [(32, 4), (64, 8)]
    assert suite.jobs == 3 and suite.format == "json"
    assert [inv.check for inv in suite.checks] == ["fubini", "weight_constant"]
    assert invocation_label(suite.checks[0]) == "fubini_small"
    assert invocation_label(suite.checks[1]) == "weight_constant"
    assert suite.checks[1].expect_fail


def test_defaults_come_from_config():
    suite = parse("checks: []\n")
    assert suite.seed == config.SEED
    assert suite.output_dir == config.OUTPUT_DIR
    assert not suite.timing
    assert suite.checks == []


def test_empty_document_is_an_empty_suite():
    assert parse("").checks == []


def test_unknown_check_reports_its_line():
    with pytest.raises(ConfigError) as excinfo:
        parse(
            """
            seed: 1
            checks:
              - check: fubini
              - check: no_such_check
            """
        )
    assert excinfo.value.line == 5
    assert "unknown check 'no_such_check'" in excinfo.value.message


def test_bad_parameter_reports_its_line():
    with pytest.raises(ConfigError) as excinfo:
        parse(
            """
            checks:
              - check: lemma_aver
                params:
                  samples: -3
            """
        )
    assert excinfo.value.line == 5
    assert "checks.0.params.samples" in excinfo.value.message


def test_unexpected_parameter_is_rejected():
    with pytest.raises(ConfigError) as excinfo:
        parse(
            """
            checks:
              - check: fubini
                params: {instances: 3, aperture: 2}
            """
        )
    assert "aperture" in excinfo.value.message


def test_unknown_top_level_key():
    with pytest.raises(ConfigError) as excinfo:
        parse("seed: 1\nverbose: true\n")
    assert excinfo.value.line == 2


def test_bad_weight_descriptor():
    with pytest.raises(ConfigError) as excinfo:
        parse(
            """
            checks:
              - check: weight_doubling
                params: {weights: ["power:0.5", "wiggle:3"]}
            """
        )
    assert "wiggle:3" in excinfo.value.message


def test_malformed_ladder():
    with pytest.raises(ConfigError) as excinfo:
        parse("ladder_2d: 32by8\n")
    assert excinfo.value.line == 1


def test_invalid_yaml():
    with pytest.raises(ConfigError) as excinfo:
        parse("checks: [fubini\n")
    assert "invalid YAML" in excinfo.value.message


def test_exponents_accept_fractions_and_inf():
    args = validate_args("apq_equivalence", {"p": "4/3", "q": 4})
    assert args.p == pytest.approx(4.0 / 3.0)
    args = validate_args("coifman_fefferman_tent", {"ss": [1, "inf"]})
    assert args.ss == [1.0, math.inf]


def test_check_defaults_cover_the_claimed_ranges():
    assert validate_args("coifman_fefferman_tent", {}).weights == ["const:1", "power:0.5"]
    assert validate_args("offdiag_proposition", {}).M is None
    assert validate_args("fractional", {}).weights == ["power:0", "power:0.125", "power:0.25", "power:0.375"]


def test_load_suite_from_path(tmp_path):
    path = tmp_path / "suite.yaml"
    path.write_text("seed: 3\nchecks:\n  - check: rdf_properties\n", encoding="utf-8")
    suite = load_suite(path)
    assert suite.seed == 3
    with pytest.raises(ConfigError):
        load_suite(tmp_path / "missing.yaml")
