import numpy as np
import pytest

from lrorder.estimators import TwoSample, ecdf

GOLDEN_X = (-1.0, 2.0, 3.0, 3.0)
GOLDEN_Y = (0.0, 0.0, 1.0, 3.0, 3.0, 6.0)
GOLDEN_CSV_TEXT = "value,group\n" + "".join(
    [f"{v:g},x\n" for v in GOLDEN_X] + [f"{v:g},y\n" for v in GOLDEN_Y]
)

_ACCEPTANCE: dict = {}


@pytest.fixture
def golden():
    return TwoSample(np.array(GOLDEN_X), np.array(GOLDEN_Y))


@pytest.fixture
def record():
    """Store one acceptance line: ``record(number, title, passed, detail)``."""

    def _record(number, title, passed, detail=""):
        _ACCEPTANCE[number] = (title, bool(passed), detail)
        return passed

    return _record


def check_fit_invariants(ts, fit, tol=1e-12):
    """Order and preservation identities at the distinct y values.

    Returns the largest violation found so callers can report it.
    """
    y = np.unique(ts.y)
    fn, gn = ecdf(ts.x)(y), ecdf(ts.y)(y)
    fs, gs = fit.f_star(y), fit.g_star(y)
    pi = fit.pi_n
    return max(
        float(np.max(fs - fn, initial=0.0)),
        float(np.max(gn - gs, initial=0.0)),
        float(np.max(np.abs(pi * fs + (1 - pi) * gs - (pi * fn + (1 - pi) * gn)))),
        abs(float(np.sum(fit.f_star.masses)) - 1.0),
        abs(float(np.sum(fit.g_star.masses)) - 1.0),
        float(-np.min(fit.f_star.masses, initial=0.0)),
        float(-np.min(fit.g_star.masses, initial=0.0)),
    )


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, passed, detail = _ACCEPTANCE[number]
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] criterion {number:>2}: {title}  {detail}")
