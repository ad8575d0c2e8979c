import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from bdrecon.geometry import certify_admissible, make_patch  # noqa: E402
from bdrecon.probes import make_maxwell_frame  # noqa: E402


@pytest.fixture
def flat():
    patch = make_patch("flat")
    p = certify_admissible(patch, np.zeros(2), require=True)
    return patch, p, make_maxwell_frame(p.grad_at_p)


def setup(patch_id, point=(0.0, 0.0)):
    patch = make_patch(patch_id)
    p = certify_admissible(patch, np.asarray(point, float))
    return patch, p, make_maxwell_frame(p.grad_at_p)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
