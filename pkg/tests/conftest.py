import numpy as np
import pytest

from qfcbench.counts import CountRecord
from qfcbench.polopt import projector_for, six_settings
from qfcbench.qstate import BASIS_LABELS


def exact_records(rho, shots):
    """Six tomography records holding the rounded expected counts of `rho`."""
    out = []
    for label, s in zip(BASIS_LABELS, six_settings()):
        p = float(np.trace(projector_for(s) @ rho).real)
        out.append(CountRecord(label, int(round(max(p, 0.0) * shots)), 1.0, 0))
    return out


ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per acceptance criterion and assert it."""

    def record(number, title, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
