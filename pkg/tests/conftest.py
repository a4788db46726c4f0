import numpy as np
import pytest

from tetrastaff.raster import draw_lines


def staff_page(rows, cols, tops, spacing=60, thickness=10, col_range=None):
    """Binary page with flat four-line staves whose first line centers sit at ``tops``."""
    page = np.zeros((rows, cols), dtype=bool)
    c0, c1 = col_range or (0, cols)
    cc = np.arange(c0, c1)
    for top in tops:
        for i in range(4):
            draw_lines(page, cc, np.full(len(cc), top + i * spacing), thickness)
    return page


@pytest.fixture
def rng():
    return np.random.default_rng(20200403)


# criterion -> (passed, detail), filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k[1:])):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{key:<4} {'PASS' if ok else 'FAIL'}  {detail}")
