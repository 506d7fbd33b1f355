import math

import numpy as np
import pytest

from qspi.laurent import PhaseSequence


def random_phases(rng, d, kappa=0.3, beta_th=None):
    beta_th = math.pi / (4 * kappa) if beta_th is None else beta_th
    return PhaseSequence(tuple(rng.uniform(-math.pi, math.pi, d + 1)), kappa, beta_th)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    report = getattr(mod, "REPORT", None)
    if not report:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for n in sorted(report):
        checks = report[n]
        status = "PASS" if all(ok for ok, _ in checks) else "FAIL"
        detail = " | ".join(("" if ok else "[fail] ") + text for ok, text in checks)
        terminalreporter.write_line(f"criterion {n:2d}: {status}  {detail}")
