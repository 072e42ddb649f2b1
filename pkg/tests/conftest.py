import pytest

from ewlab import Family, build_sieve, make_spec

# one line per acceptance criterion, printed in the terminal summary
CRITERIA_RESULTS = {}


def record(number, passed, detail):
    CRITERIA_RESULTS[number] = (bool(passed), detail)
    print(f"CRITERION {number}: {'PASS' if passed else 'FAIL'} - {detail}")


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA_RESULTS):
        ok, detail = CRITERIA_RESULTS[n]
        terminalreporter.write_line(f"CRITERION {n}: {'PASS' if ok else 'FAIL'} - {detail}")


@pytest.fixture(scope="session")
def logpow2():
    return make_spec(Family.LOGPOW, 2)


@pytest.fixture(scope="session")
def dyadic2():
    return make_spec(Family.DYADIC_LOG, 2)


@pytest.fixture(scope="session")
def table_logpow2_1e7(logpow2):
    return build_sieve(logpow2, 10**7)


@pytest.fixture(scope="session")
def table_dyadic2_1e7(dyadic2):
    return build_sieve(dyadic2, 10**7)
