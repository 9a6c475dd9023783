import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from blockedlmm import INSTEVAL_FORMULA, LinearMixedModel, load_insteval  # noqa: E402


@pytest.fixture(scope="session")
def insteval():
    return load_insteval()


@pytest.fixture(scope="session")
def insteval_model(insteval):
    return LinearMixedModel(INSTEVAL_FORMULA, insteval)


@pytest.fixture(scope="session")
def insteval_ml(insteval):
    model = LinearMixedModel(INSTEVAL_FORMULA, insteval)
    return model, model.fit()


@pytest.fixture(scope="session")
def insteval_reml(insteval):
    model = LinearMixedModel(INSTEVAL_FORMULA, insteval)
    return model, model.fit(reml=True)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
