"""Rhyme detection and rhyme-schema induction.

Two words rhyme perfectly when they share an ending phonetic
representation; they near-rhyme when their endings align position by
position with identical vowels and similar consonants.  Identical words
always rhyme.  Words without dictionary coverage fall back to comparing
grapheme rhyme suffixes.
"""

from __future__ import annotations

import configparser
import enum
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from .phonetics import (
    ARPABET_VOWELS,
    EndingPhoneticRepresentation,
    LanguageProfile,
    ENGLISH_PROFILE,
    NoVowelError,
    PronouncingDictionary,
    grapheme_rhyme_suffix,
    normalize_word,
)


class RhymeKind(enum.Enum):
    IDENTICAL = "identical"
    PERFECT = "perfect"
    NEAR = "near"
    NONE = "none"


_KIND_RANK = {
    RhymeKind.IDENTICAL: 3,
    RhymeKind.PERFECT: 2,
    RhymeKind.NEAR: 1,
    RhymeKind.NONE: 0,
}


@dataclass(frozen=True)
class RhymeVerdict:
    kind: RhymeKind

    @property
    def rhymes(self) -> bool:
        return self.kind is not RhymeKind.NONE


@dataclass(frozen=True)
class ConsonantClassTable:
    """Similarity classes plus cross-class compatibility groups."""

    classes: tuple[frozenset[str], ...]
    compatibility: tuple[frozenset[str], ...] = ()

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for group in self.classes:
            overlap = seen & group
            if overlap:
                raise ValueError(f"consonant classes overlap on {sorted(overlap)}")
            seen |= group
        for code in seen:
            if code in ARPABET_VOWELS:
                raise ValueError(f"vowel {code!r} in consonant class table")

    def class_of(self, consonant: str) -> frozenset[str] | None:
        for group in self.classes:
            if consonant in group:
                return group
        return None

    def compatible(self, a: str, b: str) -> bool:
        """True when the two consonants may occupy the same rhyme position."""
        if a == b:
            return True
        group = self.class_of(a)
        if group is not None and b in group:
            return True
        return any(a in extra and b in extra for extra in self.compatibility)

    @classmethod
    def from_config(cls, path: str | Path | None = None) -> "ConsonantClassTable":
        parser = configparser.ConfigParser()
        if path is None:
            text = (
                resources.files("versekit")
                .joinpath("data/consonant_classes.cfg")
                .read_text(encoding="utf-8")
            )
            parser.read_string(text)
        else:
            if not parser.read(path, encoding="utf-8"):
                raise FileNotFoundError(f"consonant class file not found: {path}")
        classes = tuple(
            frozenset(value.split()) for _, value in parser.items("classes")
        )
        compatibility = ()
        if parser.has_section("compatibility"):
            compatibility = tuple(
                frozenset(value.split()) for _, value in parser.items("compatibility")
            )
        return cls(classes, compatibility)


DEFAULT_CONSONANT_TABLE = ConsonantClassTable(
    classes=(
        frozenset({"P", "B"}),
        frozenset({"T", "D"}),
        frozenset({"K", "G"}),
        frozenset({"F", "V", "TH", "DH"}),
        frozenset({"S", "Z", "SH", "ZH"}),
        frozenset({"CH", "JH"}),
        frozenset({"M", "N", "NG"}),
        frozenset({"L", "R"}),
        frozenset({"W", "Y"}),
        frozenset({"HH"}),
    ),
    compatibility=(frozenset({"V", "D", "Z", "DH"}),),
)


def near_rhyme(
    a: EndingPhoneticRepresentation,
    b: EndingPhoneticRepresentation,
    table: ConsonantClassTable = DEFAULT_CONSONANT_TABLE,
) -> bool:
    """Position-wise ending comparison: equal vowels, similar consonants."""
    if len(a) != len(b):
        return False
    for sym_a, sym_b in zip(a.symbols, b.symbols):
        vowel_a = sym_a in ARPABET_VOWELS
        vowel_b = sym_b in ARPABET_VOWELS
        if vowel_a != vowel_b:
            return False
        if vowel_a:
            if sym_a != sym_b:
                return False
        elif not table.compatible(sym_a, sym_b):
            return False
    return True


def rhyme_verdict(
    dictionary: PronouncingDictionary,
    word_a: str,
    word_b: str,
    profile: LanguageProfile = ENGLISH_PROFILE,
    table: ConsonantClassTable = DEFAULT_CONSONANT_TABLE,
) -> RhymeVerdict:
    """Classify the rhyme relation between two words.

    Identical normalized spellings rhyme outright.  When both words have
    dictionary endings, any pronunciation pair may establish the verdict
    (the strongest kind wins).  Otherwise both words are compared by
    grapheme rhyme suffix; a word with no vowel anywhere yields none.
    """
    norm_a = normalize_word(word_a)
    norm_b = normalize_word(word_b)
    if not norm_a or not norm_b:
        raise ValueError(f"word empty after normalization: {word_a!r} / {word_b!r}")
    if norm_a == norm_b:
        return RhymeVerdict(RhymeKind.IDENTICAL)
    endings_a = dictionary.endings(norm_a)
    endings_b = dictionary.endings(norm_b)
    if endings_a and endings_b:
        best = RhymeKind.NONE
        for ea in endings_a:
            for eb in endings_b:
                if ea.symbols == eb.symbols:
                    kind = RhymeKind.PERFECT
                elif near_rhyme(ea, eb, table):
                    kind = RhymeKind.NEAR
                else:
                    kind = RhymeKind.NONE
                if _KIND_RANK[kind] > _KIND_RANK[best]:
                    best = kind
        return RhymeVerdict(best)
    try:
        suffix_a = grapheme_rhyme_suffix(norm_a, profile)
        suffix_b = grapheme_rhyme_suffix(norm_b, profile)
    except NoVowelError:
        return RhymeVerdict(RhymeKind.NONE)
    if suffix_a == suffix_b:
        return RhymeVerdict(RhymeKind.PERFECT)
    return RhymeVerdict(RhymeKind.NONE)


def rhymes(
    dictionary: PronouncingDictionary,
    word_a: str,
    word_b: str,
    profile: LanguageProfile = ENGLISH_PROFILE,
    table: ConsonantClassTable = DEFAULT_CONSONANT_TABLE,
) -> bool:
    return rhyme_verdict(dictionary, word_a, word_b, profile, table).rhymes


def group_label(index: int) -> str:
    """Spreadsheet-style labels: 0..25 -> A..Z, 26 -> AA, 27 -> AB, ..."""
    if index < 0:
        raise ValueError(f"negative group index {index}")
    label = ""
    index += 1
    while index:
        index, rem = divmod(index - 1, 26)
        label = chr(ord("A") + rem) + label
    return label


_LABEL_RE = re.compile(r"^[A-Z]+$")


@dataclass(frozen=True)
class RhymeSchema:
    """A stanza's rhyme pattern, one letter per line, in first-use order."""

    letters: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.letters:
            raise ValueError("empty rhyme schema")
        expected_next = 0
        seen: set[str] = set()
        for letter in self.letters:
            if not _LABEL_RE.match(letter):
                raise ValueError(f"bad schema letter {letter!r}")
            if letter in seen:
                continue
            if letter != group_label(expected_next):
                raise ValueError(
                    f"schema letters out of first-use order: {' '.join(self.letters)}"
                )
            seen.add(letter)
            expected_next += 1

    def __len__(self) -> int:
        return len(self.letters)

    def __iter__(self):
        return iter(self.letters)

    def __str__(self) -> str:
        return " ".join(self.letters)

    @property
    def group_count(self) -> int:
        return len(set(self.letters))

    @classmethod
    def from_string(cls, text: str) -> "RhymeSchema":
        """Parse "A B B" (space-separated) or compact "ABB" forms."""
        stripped = text.strip()
        if not stripped:
            raise ValueError("empty rhyme schema string")
        parts = stripped.split()
        if len(parts) == 1 and len(parts[0]) > 1:
            parts = list(parts[0])
        return cls(tuple(p.upper() for p in parts))


def last_word(line: str) -> str:
    """Normalized final alphanumeric-bearing token of a line."""
    for token in reversed(line.split()):
        normalized = normalize_word(token)
        if normalized:
            return normalized
    raise ValueError(f"line has no word tokens: {line!r}")


def induce_schema(
    dictionary: PronouncingDictionary,
    last_words: Sequence[str],
    profile: LanguageProfile = ENGLISH_PROFILE,
    table: ConsonantClassTable = DEFAULT_CONSONANT_TABLE,
) -> RhymeSchema:
    """Greedy first-match grouping of line-final words into a schema.

    Each word is compared against the first word (the representative) of
    every existing group in creation order and joins the first group whose
    representative it rhymes with; otherwise it opens a new group.
    """
    if not last_words:
        raise ValueError("no last words to annotate")
    representatives: list[str] = []
    letters: list[str] = []
    for word in last_words:
        assigned = None
        for i, rep in enumerate(representatives):
            if rhyme_verdict(dictionary, word, rep, profile, table).rhymes:
                assigned = i
                break
        if assigned is None:
            representatives.append(word)
            assigned = len(representatives) - 1
        letters.append(group_label(assigned))
    return RhymeSchema(tuple(letters))


def annotate_lines(
    dictionary: PronouncingDictionary,
    lines: Iterable[str],
    profile: LanguageProfile = ENGLISH_PROFILE,
    table: ConsonantClassTable = DEFAULT_CONSONANT_TABLE,
) -> RhymeSchema:
    """Induce the rhyme schema of full verse lines via their last words."""
    words = [last_word(line) for line in lines]
    return induce_schema(dictionary, words, profile, table)
