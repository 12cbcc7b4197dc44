"""Every acceptance criterion at its stated tolerance, one test each."""

import pytest

from refund_lab import certify

from conftest import ACCEPTANCE_LINES, FIXTURES


@pytest.mark.parametrize("check", certify.ALL_CHECKS,
                         ids=[f"criterion_{c.number}" for c in certify.ALL_CHECKS])
def test_criterion(check):
    if check is certify.check_figures:
        res = check(FIXTURES / "figures")
    else:
        res = check()
    ACCEPTANCE_LINES.append(res.line())
    print(res.line())
    assert res.passed, res.line()


if __name__ == "__main__":
    results = certify.run_all(FIXTURES / "figures")
    raise SystemExit(0 if all(r.passed for r in results) else 1)
