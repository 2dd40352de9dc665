"""Shared pytest hooks.

Prints one visible verdict line per acceptance criterion at the end of
any run that executed them, so the gate's outcome is readable without
digging through captured output.
"""


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    verdicts = {}
    for outcome, tag in (("passed", "PASS"), ("failed", "FAIL"), ("error", "FAIL")):
        for rep in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py::test_criterion_" in nodeid:
                name = nodeid.split("::")[-1]
                if tag == "FAIL" or name not in verdicts:
                    verdicts[name] = tag
    if verdicts:
        terminalreporter.section("acceptance criteria")
        for name in sorted(verdicts):
            terminalreporter.write_line(f"[{verdicts[name]}] {name}")
