import pytest

# criterion id -> (passed, detail), filled in by test_acceptance.py
ACCEPTANCE = {}


def record(cid, passed, detail):
    ACCEPTANCE[cid] = (bool(passed), detail)
    print(f"[{'PASS' if passed else 'FAIL'}] criterion {cid}: {detail}")


@pytest.fixture
def criterion():
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")

    def key(cid):
        head = cid.rstrip("abcdefghijklmnopqrstuvwxyz")
        return (int(head), cid)

    for cid in sorted(ACCEPTANCE, key=key):
        ok, detail = ACCEPTANCE[cid]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {cid}: {detail}")
