import pytest

from spectrans.hashing import HashPolicy

# Hand-written scenario: leaf table of VPN1 hashes to frame 0, the data
# page hashes to frame 2 (tier 1) and 7 (tier 2).
VPN1 = 0x12345
OFFSET1 = 0x2C0


@pytest.fixture
def workflow_policy():
    table = {(1, VPN1 >> 9): 0, (1, VPN1): 2, (2, VPN1): 7}
    return HashPolicy.stub(table, tiers=2, total_frames=16)


# One (criterion, passed, detail) tuple per acceptance check, printed as a
# block at the end of the session so the lines survive output capture.
ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in sorted(ACCEPTANCE_RESULTS, key=lambda r: int(r[0].split()[0])):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {name}: {detail}")
