import pytest

from babenko.solver import ContinuationConfig, continue_branch, wave_at_steepness

# steepness of the first momentum maximum, as tabulated for the high-precision branch
S1 = 0.13660354990
S2 = 0.14079654715


@pytest.fixture(scope="session")
def wave_s1():
    return wave_at_steepness(S1, modes=8192)


@pytest.fixture(scope="session")
def small_waves():
    """Waves at N = 256 for s = 0.05 and s = 0.12."""
    return {s: wave_at_steepness(s, modes=256) for s in (0.05, 0.12)}


@pytest.fixture(scope="session")
def low_branch():
    return continue_branch(ContinuationConfig(step=0.01, max_modes=256), 0.06)


@pytest.fixture(scope="session")
def chain_s1(wave_s1):
    from babenko.jordan import build_chain

    return build_chain(wave_s1)


@pytest.fixture(scope="session")
def critical(wave_s1):
    """Wave at the root of D(s) near s1, with its chain and normal-form prediction."""
    from babenko.jordan import normal_form, refine_critical_point

    wave, _ = refine_critical_point(wave_s1)
    pred, chain = normal_form(wave)
    return wave, chain, pred


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.REPORT:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(mod.REPORT):
        terminalreporter.write_line(line)
