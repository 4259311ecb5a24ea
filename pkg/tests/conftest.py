"""Shared fixtures: bundled dictionary, synthetic corpora, a trained model."""

from __future__ import annotations

import pytest

from versekit.corpus import ParagraphRecord, build_records
from versekit.lm import NGramModel, train_from_records
from versekit.phonetics import ENGLISH_PROFILE, LanguageProfile, PronouncingDictionary
from versekit.rhyme import DEFAULT_CONSONANT_TABLE, ConsonantClassTable
from versekit.synthetic import make_songs


@pytest.fixture(scope="session")
def dictionary() -> PronouncingDictionary:
    return PronouncingDictionary.bundled()


@pytest.fixture(scope="session")
def profile() -> LanguageProfile:
    return ENGLISH_PROFILE


@pytest.fixture(scope="session")
def table() -> ConsonantClassTable:
    return DEFAULT_CONSONANT_TABLE


@pytest.fixture(scope="session")
def songs():
    return make_songs(160, seed=0)


@pytest.fixture(scope="session")
def records(songs, dictionary) -> list[ParagraphRecord]:
    return build_records(songs, dictionary)


@pytest.fixture(scope="session")
def model(records) -> NGramModel:
    return train_from_records(records, order=3, k=0.01)
