from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from glyphvote.config import Settings
from glyphvote.dataset import LabeledSample, extract_all, load_dataset
from glyphvote.synthetic import write_corpus


@pytest.fixture(autouse=True)
def settings_file(tmp_path, monkeypatch) -> Path:
    """Point the settings file at a temporary path and clear the dump switch."""
    path = tmp_path / "glyphvote.yaml"
    monkeypatch.setenv("GLYPH_CONFIG_FILE", str(path))
    monkeypatch.delenv("GLYPH_DEBUG_DUMP", raising=False)
    return path


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory) -> Path:
    """A small synthetic corpus: ten classes, six images each."""
    root = tmp_path_factory.mktemp("corpus")
    write_corpus(root, per_class=6, seed=7)
    return root


@pytest.fixture(scope="session")
def corpus(corpus_dir) -> tuple[list[LabeledSample], list[str]]:
    """The small corpus with features extracted."""
    samples, labels = load_dataset(corpus_dir)
    return extract_all(samples, workers=2), labels


@pytest.fixture
def fast_settings() -> Settings:
    """Settings that train in seconds."""
    return Settings(
        epochs=15,
        hidden_intersection=6,
        hidden_shadow=6,
        hidden_linefit=6,
        hidden_chaincode=8,
    )
