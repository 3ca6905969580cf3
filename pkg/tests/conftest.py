from importlib.resources import files

import pytest

from qdecomp.align import EmbeddingStore
from qdecomp.kbgen import load_kb, load_seeds, load_synonyms, load_templates

DATA = files("qdecomp") / "data"


@pytest.fixture(scope="session")
def data_dir():
    return DATA


@pytest.fixture(scope="session")
def demo_kb():
    return load_kb(DATA / "demo_kb.tsv")


@pytest.fixture(scope="session")
def demo_seeds():
    return load_seeds(DATA / "demo_seeds.jsonl")


@pytest.fixture(scope="session")
def demo_templates():
    return load_templates(DATA / "templates.tsv")


@pytest.fixture(scope="session")
def synonyms():
    return load_synonyms(DATA / "synonyms.tsv")


@pytest.fixture(scope="session")
def store():
    return EmbeddingStore.load(DATA / "demo_embeddings.txt")
