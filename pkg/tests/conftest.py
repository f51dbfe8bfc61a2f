import importlib.resources
import shutil
from pathlib import Path

import pytest

from neurop import load_kb
from neurop.cli import default_kb_path


@pytest.fixture(scope="session")
def kb_path() -> Path:
    return default_kb_path()


@pytest.fixture(scope="session")
def kb(kb_path):
    return load_kb(kb_path)


@pytest.fixture(scope="session")
def samples_dir() -> Path:
    return Path(str(importlib.resources.files("neurop") / "samples"))


@pytest.fixture
def kb_copy(kb_path, tmp_path) -> Path:
    """A mutable copy of the bundled knowledge base."""
    target = tmp_path / "kb"
    shutil.copytree(kb_path, target)
    return target
