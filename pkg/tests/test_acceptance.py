"""Acceptance suite: every criterion at its stated tolerance and scale.

Each test prints one PASS/FAIL line (run with -s to see them live). The
full-size preset runs and long PDE/extreme-value runs carry the
`slow` marker; `pytest -m "not slow"` runs the criteria that finish in
seconds at their stated tolerances plus quick variants of the slow ones.
"""

import pytest

from flockjump import acceptance as acc

FULL = {num: (title, fn) for num, title, fn in acc.CRITERIA}

# criteria whose full-scale runs take minutes rather than seconds
SLOW = {5, 6, 8, 9, 10, 11, 13}


def _run(number, quick=False):
    result = acc.run_criterion(number, quick=quick)
    print()
    print(result.line())
    assert result.passed, result.detail


@pytest.mark.parametrize("number", [n for n in FULL if n not in SLOW])
def test_criterion(number):
    _run(number)


@pytest.mark.slow
@pytest.mark.parametrize("number", sorted(SLOW))
def test_criterion_full(number):
    _run(number)


@pytest.mark.parametrize("number", sorted(SLOW))
def test_criterion_quick_variant(number):
    # reduced-scale smoke of the slow criteria so a fast pass still exercises them
    _run(number, quick=True)
