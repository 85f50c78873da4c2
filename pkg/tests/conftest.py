import sys
from collections import defaultdict
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

# criterion id -> list of (check name, passed, detail)
ACCEPTANCE: dict[int, list[tuple[str, bool, str]]] = defaultdict(list)

TITLES = {
    1: "model vs simulation MAPD",
    2: "spot values",
    3: "ADD/ANT table",
    4: "tuning schedule shape",
    5: "exhaustive oracle equivalence",
    6: "internal consistency",
}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for cid in sorted(ACCEPTANCE):
        checks = ACCEPTANCE[cid]
        ok = all(passed for _, passed, _ in checks)
        tr.write_line(f"criterion {cid} {'PASS' if ok else 'FAIL'}: {TITLES[cid]}")
        for name, passed, detail in checks:
            tr.write_line(f"    [{'ok' if passed else 'FAIL'}] {name}: {detail}")
