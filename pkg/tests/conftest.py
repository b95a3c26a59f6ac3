import pytest

from hawkescorr.kernel import ExponentialKernel, ModelParams, PowerLawKernel, zero_kernel
from hawkescorr.resolvent import Grid, resolvent


@pytest.fixture(scope="session")
def exp_kernel():
    return ExponentialKernel(1.0, 2.0)


@pytest.fixture(scope="session")
def exp_params(exp_kernel):
    return ModelParams(1.0, exp_kernel)


@pytest.fixture(scope="session")
def power_kernel():
    return PowerLawKernel(1.0, 1.0, 4.0)


@pytest.fixture(scope="session")
def poisson_params():
    return ModelParams(1.0, zero_kernel())


@pytest.fixture(scope="session")
def exp_table(exp_kernel):
    return resolvent(exp_kernel, Grid.covering(3.0, 1e-3))


_VERDICTS = pytest.StashKey[list]()


@pytest.fixture
def verdict(request):
    """Record an acceptance line; it is echoed live and again in the run summary."""
    lines = request.config.stash.setdefault(_VERDICTS, [])

    def record(line):
        lines.append(line)
        reporter = request.config.pluginmanager.get_plugin("terminalreporter")
        if reporter is not None:
            reporter.write_line("")
            reporter.write_line(line)

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_VERDICTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
