import os

import numpy as np
import pytest

# criterion number -> (passed, detail); filled by tests/test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def fading_rates(rng: np.random.Generator, slots: int, users: int, snr_db=(0.0, 30.0)) -> np.ndarray:
    """Shannon rates (bit/s/Hz) of Rayleigh-faded users with distinct mean SNRs."""
    mean_snr = 10 ** (rng.uniform(*snr_db, size=users) / 10)
    return np.log2(1.0 + mean_snr * rng.exponential(size=(slots, users)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


def cpu_workers() -> int:
    return max(1, os.cpu_count() or 1)
