"""One test per acceptance criterion; the summary section lists each verdict."""

import pytest

from qstail.verify import CHECKS, VerifyConfig, VerifyContext, run_check


@pytest.fixture(scope="module")
def ctx():
    # the context solves its own table so that criterion 3 is timed honestly
    return VerifyContext(VerifyConfig())


@pytest.mark.parametrize("cid", [c[0] for c in CHECKS], ids=[f"{c[0]:02d}_{c[1].replace(' ', '_')}" for c in CHECKS])
def test_criterion(ctx, cid, acceptance_log):
    result = run_check(cid, ctx)
    acceptance_log.append(result.line())
    print(result.line())
    assert result.passed, result.detail
