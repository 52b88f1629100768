import pytest

# Filled by tests/test_acceptance.py: criterion number -> (passed, summary line)
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, line = ACCEPTANCE[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {key}: {line}")


@pytest.fixture
def outdir(tmp_path, monkeypatch):
    monkeypatch.setenv("DCMA_OUT", str(tmp_path))
    return tmp_path
