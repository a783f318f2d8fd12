from pathlib import Path

import pytest

from litriage.corpus import ArticleRecord

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures() -> Path:
    return FIXTURES


@pytest.fixture
def demo_groups():
    from litriage.taxonomy import load_taxonomy

    return load_taxonomy(FIXTURES / "taxonomy.yaml")


def make_record(pmid: str = "1", title: str = "Title", abstract: str = "Abstract",
                year: int = 2020) -> ArticleRecord:
    return ArticleRecord(pmid=pmid, title=title, abstract=abstract, year=year)
