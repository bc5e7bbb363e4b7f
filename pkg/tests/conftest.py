import pytest

from causal_mesh.scenario import load_scenario
from causal_mesh.sim import run

# criterion number -> one summary line; filled by test_acceptance.py
ACCEPTANCE = {}


def report(number, ok, detail):
    ACCEPTANCE[number] = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[number])


@pytest.fixture(scope="session")
def bundled():
    """Run a bundled scenario once per (name, protocol) and memoise the result."""
    cache = {}

    def get(name, protocol=None):
        key = (name, protocol)
        if key not in cache:
            sc = load_scenario(name)
            if protocol:
                sc = sc.replace(protocol=protocol)
            cache[key] = run(sc)
        return cache[key]

    return get
