import sys

import pytest

from pgo_agent import agent as agent_module


@pytest.fixture(autouse=True)
def clean_agent():
    """Every test leaves the process un-instrumented, whatever happened."""
    yield
    if agent_module._installed_handle is not None:
        agent_module._installed_handle.stop()


@pytest.fixture
def module_dir(tmp_path, monkeypatch):
    """Throwaway import root for synthetic timing modules."""
    monkeypatch.syspath_prepend(str(tmp_path))
    created = []

    def make(name: str, body: str):
        (tmp_path / f"{name}.py").write_text(body, encoding="utf-8")
        created.append(name)
        return name

    yield make
    for name in created:
        sys.modules.pop(name, None)
