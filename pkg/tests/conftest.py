import sys
from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


def read_fixture_lines(name: str) -> list[str]:
    return (FIXTURES / name).read_text(encoding="utf-8").splitlines()


def fixture_batch_files(name: str) -> list[Path]:
    return sorted((FIXTURES / "batches" / name).glob("*.pgoprof.jsonl"))


def load_fixture_store(name: str):
    from pgo import profile_model

    batches = [profile_model.load_batch_file(p) for p in fixture_batch_files(name)]
    return profile_model.validate_and_merge(batches).store
