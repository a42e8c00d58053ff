import numpy as np
import pytest

from rigidform.formation import InteractionLaw
from rigidform.liegroup import SEAlgebraElement, SEElement, so_exp


def random_skew(rng, k, scale=1.0):
    a = rng.normal(size=(k, k)) * scale
    return a - a.T


def random_generator(rng, k, max_angle=None):
    """Random (Omega, v); with ``max_angle`` the spectral norm of Omega is capped."""
    om = random_skew(rng, k)
    if max_angle is not None:
        nrm = np.linalg.norm(om, 2)
        if nrm > 0:
            om *= rng.uniform(0.0, max_angle) / nrm
    return SEAlgebraElement(om, rng.normal(size=k))


def random_element(rng, k):
    return SEElement(so_exp(random_skew(rng, k, 2.0)), rng.normal(size=k))


def expm_oracle(m, terms=30):
    """Scaling and squaring with a plain Taylor sum; independent of scipy and of the Schur route."""
    nrm = np.max(np.sum(np.abs(m), axis=1))
    s = max(0, int(np.ceil(np.log2(nrm))) + 1) if nrm > 0 else 0
    a = m / 2.0**s
    out = np.eye(m.shape[0])
    term = np.eye(m.shape[0])
    for j in range(1, terms):
        term = term @ a / j
        out = out + term
    for _ in range(s):
        out = out @ out
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def five_agent():
    from rigidform.presets import five_agent_framework

    return five_agent_framework()


@pytest.fixture
def five_agent_gain5():
    from rigidform.presets import five_agent_framework

    g, q, c = five_agent_framework()
    return g, InteractionLaw("linear", 5.0), q, c


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for num in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[num])
