import numpy as np
import pytest

from uwbnbi.channel import Cm1Params, LowPassFilterSpec, composite_reference, generate_cm1
from uwbnbi.waveform import PulseSpec, generate_pulse

FS = 64e9


@pytest.fixture(scope="session")
def pulse():
    return generate_pulse(PulseSpec(tau=0.16e-9), FS)


@pytest.fixture(scope="session")
def cm1_template(pulse):
    """Unit-energy CM1 template laid out on [0, T)."""
    ch = generate_cm1(Cm1Params(), np.random.default_rng(7))
    w = composite_reference(pulse, ch, LowPassFilterSpec())
    return w.shifted(-w.start_time)


@pytest.fixture(scope="session")
def link():
    from uwbnbi.simulator import Link, SimConfig, build_channels

    cfg = SimConfig(snr_grid_db=(8.0,), sir_db=-10.0, trials=1000)
    return Link(cfg, build_channels(cfg)[0])


# one line per acceptance criterion, printed after the run regardless of capture
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
