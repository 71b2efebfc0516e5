"""Every acceptance criterion at its stated tolerance; one PASS/FAIL line each."""

import pytest

from chameleon import acceptance


@pytest.mark.parametrize("criterion", acceptance.CRITERIA, ids=lambda c: f"criterion_{c.number:02d}")
def test_criterion(criterion, acceptance_log):
    res = criterion()
    line = res.line()
    print(line)
    acceptance_log.append(line)
    assert res.passed, line
