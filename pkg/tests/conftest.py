import pytest

ACCEPTANCE_LINES = []


def pytest_addoption(parser):
    parser.addoption("--long-run", action="store_true", default=False,
                     help="also run full-scale (128 x 128) crossbar checks; takes hours")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--long-run"):
        return
    skip = pytest.mark.skip(reason="needs --long-run")
    for item in items:
        if "longrun" in item.keywords:
            item.add_marker(skip)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
