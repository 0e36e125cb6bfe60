from __future__ import annotations

import pytest

from textprep import ToolchainConfig


@pytest.fixture()
def config() -> ToolchainConfig:
    return ToolchainConfig()


@pytest.fixture(scope="session")
def documents_100():
    from tp_corpus import build_documents

    return build_documents(100)
