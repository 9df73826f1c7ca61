from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from logbench.ingest import load_profile, load_template_catalog


DATA = Path(__file__).parent.parent / "src" / "logbench" / "data"


@pytest.fixture(scope="session")
def synthetic_catalog():
    return load_template_catalog(DATA / "synthetic.templates")


@pytest.fixture(scope="session")
def synthetic_profile():
    return load_profile("synthetic")


@pytest.fixture(scope="session")
def synthetic_log_path():
    return DATA / "synthetic.log"


@pytest.fixture(scope="session")
def synthetic_labels_path():
    return DATA / "synthetic_labels.csv"


@pytest.fixture(scope="session")
def bundled_corpus_path():
    return DATA / "synthetic_sequences.tsv"
