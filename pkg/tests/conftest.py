import numpy as np
import pytest

from crcop import DgpConfig, StructuralParams, sample_dataset


@pytest.fixture
def ref():
    """theta=2 (tau=0.5), gamma=0.5, beta01=1, beta11=1, beta12=2."""
    return StructuralParams.reference()


@pytest.fixture(scope="session")
def data_2000():
    return sample_dataset(DgpConfig(StructuralParams.reference(), 2000, seed=3))


@pytest.fixture(scope="session")
def data_400():
    return sample_dataset(DgpConfig(StructuralParams.reference(), 400, seed=21))


@pytest.fixture
def t_grid():
    return np.linspace(0.01, 5.0, 200)


_ACCEPTANCE = []


@pytest.fixture
def verdict(request):
    """Print and collect one PASS/FAIL line, then fail the test on FAIL."""
    capman = request.config.pluginmanager.getplugin("capturemanager")

    def report(label, checks):
        bad = [f"{name} ({detail})" for name, ok, detail in checks if not ok]
        good = [f"{name} ({detail})" for name, ok, detail in checks if ok]
        line = f"{'FAIL' if bad else 'PASS'} {label}"
        if bad:
            line += " | failed: " + "; ".join(bad)
        line += " | passed: " + ("; ".join(good) if good else "none")
        _ACCEPTANCE.append(line)
        with capman.global_and_fixture_disabled():
            print("\n" + line)
        if bad:
            pytest.fail(line, pytrace=False)

    return report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
