"""Pronouncing-dictionary access and rhyming-part extraction.

The phonetic layer works on ARPABET phonemes as found in CMU-format
dictionary files.  The rhyming part of a pronunciation is its ending
phonetic representation: the suffix starting at the last primary-stressed
vowel (falling back to the last vowel of any stress), with stress digits
stripped.  Words outside the dictionary are handled by a grapheme fallback
that cuts the spelling at the last run of vowel characters for the active
language profile.
"""

from __future__ import annotations

import configparser
import random
import re
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

ARPABET_VOWELS = frozenset(
    {
        "AA", "AE", "AH", "AO", "AW", "AY", "EH", "ER",
        "EY", "IH", "IY", "OW", "OY", "UH", "UW",
    }
)

ARPABET_CONSONANTS = frozenset(
    {
        "B", "CH", "D", "DH", "F", "G", "HH", "JH", "K", "L", "M", "N",
        "NG", "P", "R", "S", "SH", "T", "TH", "V", "W", "Y", "Z", "ZH",
    }
)

ARPABET_SYMBOLS = ARPABET_VOWELS | ARPABET_CONSONANTS

_PHONE_RE = re.compile(r"^([A-Z]+)([012])?$")
_VARIANT_RE = re.compile(r"\((\d+)\)$")


class DictionaryFormatError(ValueError):
    """Raised when a pronouncing-dictionary file cannot be parsed."""


class NoVowelError(ValueError):
    """Raised when a pronunciation or spelling contains no vowel."""


@dataclass(frozen=True)
class Phoneme:
    """One ARPABET phoneme; stress is present only on vowel codes."""

    symbol: str
    stress: int | None = None

    def __post_init__(self) -> None:
        if not self.symbol or not self.symbol.isupper():
            raise ValueError(f"bad phoneme symbol {self.symbol!r}")
        if self.stress is not None and self.symbol not in ARPABET_VOWELS:
            raise ValueError(f"stress digit on non-vowel {self.symbol!r}")

    @property
    def is_vowel(self) -> bool:
        return self.symbol in ARPABET_VOWELS

    @classmethod
    def parse(cls, token: str) -> "Phoneme":
        match = _PHONE_RE.match(token)
        if match is None:
            raise DictionaryFormatError(f"bad phoneme token {token!r}")
        symbol, stress = match.group(1), match.group(2)
        if symbol not in ARPABET_SYMBOLS:
            raise DictionaryFormatError(f"unknown ARPABET symbol {token!r}")
        if symbol in ARPABET_VOWELS and stress is None:
            raise DictionaryFormatError(f"vowel {token!r} missing stress digit")
        return cls(symbol, int(stress) if stress is not None else None)

    def __str__(self) -> str:
        return self.symbol if self.stress is None else f"{self.symbol}{self.stress}"


@dataclass(frozen=True)
class PhonemeSequence:
    """A full pronunciation: an ordered tuple of phonemes."""

    phonemes: tuple[Phoneme, ...]

    def __len__(self) -> int:
        return len(self.phonemes)

    def __iter__(self):
        return iter(self.phonemes)

    def has_vowel(self) -> bool:
        return any(p.is_vowel for p in self.phonemes)

    @classmethod
    def parse(cls, tokens: Iterable[str]) -> "PhonemeSequence":
        return cls(tuple(Phoneme.parse(t) for t in tokens))

    def __str__(self) -> str:
        return " ".join(str(p) for p in self.phonemes)


@dataclass(frozen=True)
class EndingPhoneticRepresentation:
    """Stress-stripped phoneme suffix from the last (primary) stressed vowel.

    The first symbol is always a vowel code.
    """

    symbols: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.symbols:
            raise ValueError("empty ending phonetic representation")
        if self.symbols[0] not in ARPABET_VOWELS:
            raise ValueError(f"ending must start at a vowel, got {self.symbols[0]!r}")

    def __len__(self) -> int:
        return len(self.symbols)

    @property
    def text(self) -> str:
        return " ".join(self.symbols)


def ending_phonetic_representation(
    sequence: PhonemeSequence,
) -> EndingPhoneticRepresentation:
    """Cut a pronunciation down to its rhyming part.

    Starts at the last vowel with primary stress (digit 1); when no vowel
    carries primary stress, starts at the last vowel of any stress.
    """
    anchor = -1
    fallback = -1
    for i, phone in enumerate(sequence.phonemes):
        if not phone.is_vowel:
            continue
        fallback = i
        if phone.stress == 1:
            anchor = i
    if anchor < 0:
        anchor = fallback
    if anchor < 0:
        raise NoVowelError(f"no vowel in pronunciation {sequence}")
    return EndingPhoneticRepresentation(
        tuple(p.symbol for p in sequence.phonemes[anchor:])
    )


def normalize_word(word: str) -> str:
    """Lowercase and strip non-alphanumeric characters from both ends.

    Interior characters (apostrophes, hyphens) survive: "don't" stays
    "don't", "(Yeah!)" becomes "yeah".
    """
    start, end = 0, len(word)
    while start < end and not word[start].isalnum():
        start += 1
    while end > start and not word[end - 1].isalnum():
        end -= 1
    return word[start:end].lower()


@dataclass(frozen=True)
class LanguageProfile:
    """Vowel inventory (and optional dictionary name) for one language."""

    code: str
    vowels: frozenset[str]
    dictionary: str | None = None

    def __post_init__(self) -> None:
        if not self.code:
            raise ValueError("empty language code")
        if not self.vowels:
            raise ValueError(f"language {self.code!r} has no vowels")


ENGLISH_PROFILE = LanguageProfile("en", frozenset("aeiouy"), "cmudict_en.txt")


def load_language_profiles(path: str | Path | None = None) -> dict[str, LanguageProfile]:
    """Read per-language profiles from an INI file (bundled file by default)."""
    parser = configparser.ConfigParser()
    if path is None:
        text = (
            resources.files("versekit")
            .joinpath("data/language_profiles.cfg")
            .read_text(encoding="utf-8")
        )
        parser.read_string(text)
    else:
        if not parser.read(path, encoding="utf-8"):
            raise FileNotFoundError(f"language profile file not found: {path}")
    profiles: dict[str, LanguageProfile] = {}
    for code in parser.sections():
        vowels = frozenset(parser.get(code, "vowels", fallback="").split())
        dictionary = parser.get(code, "dictionary", fallback=None)
        profiles[code] = LanguageProfile(code, vowels, dictionary)
    if not profiles:
        raise DictionaryFormatError(f"no language profiles in {path}")
    return profiles


def grapheme_rhyme_suffix(word: str, profile: LanguageProfile) -> str:
    """Spelling-based rhyming part: suffix from the last vowel-letter run.

    Used for out-of-dictionary words and languages without a pronouncing
    dictionary.  Raises NoVowelError when no profile vowel occurs.
    """
    normalized = normalize_word(word)
    if not normalized:
        raise NoVowelError(f"word {word!r} is empty after normalization")
    for i in range(len(normalized) - 1, -1, -1):
        if normalized[i] in profile.vowels:
            start = i
            while start > 0 and normalized[start - 1] in profile.vowels:
                start -= 1
            return normalized[start:]
    raise NoVowelError(f"no vowel characters in {normalized!r}")


@dataclass
class PronouncingDictionary:
    """Word to pronunciations mapping loaded from a CMU-format file."""

    entries: dict[str, tuple[PhonemeSequence, ...]] = field(default_factory=dict)

    def __contains__(self, word: str) -> bool:
        return normalize_word(word) in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def pronunciations(self, word: str) -> tuple[PhonemeSequence, ...]:
        """All pronunciations for a word, () when out of dictionary."""
        return self.entries.get(normalize_word(word), ())

    def endings(self, word: str) -> tuple[EndingPhoneticRepresentation, ...]:
        """Rhyming parts of every pronunciation that contains a vowel."""
        out = []
        for seq in self.pronunciations(word):
            if seq.has_vowel():
                out.append(ending_phonetic_representation(seq))
        return tuple(out)

    @classmethod
    def load(cls, path: str | Path) -> "PronouncingDictionary":
        """Parse a CMU-format file: ';;;' comments, WORD(2) variants."""
        entries: dict[str, list[PhonemeSequence]] = {}
        with open(path, "r", encoding="utf-8", errors="replace") as handle:
            for line_no, raw in enumerate(handle, start=1):
                line = raw.strip()
                if not line or line.startswith(";;;"):
                    continue
                parts = line.split()
                if len(parts) < 2:
                    raise DictionaryFormatError(
                        f"{path}:{line_no}: entry has no phonemes: {line!r}"
                    )
                headword = _VARIANT_RE.sub("", parts[0])
                word = normalize_word(headword)
                if not word:
                    raise DictionaryFormatError(
                        f"{path}:{line_no}: unusable headword {parts[0]!r}"
                    )
                try:
                    seq = PhonemeSequence.parse(parts[1:])
                except DictionaryFormatError as exc:
                    raise DictionaryFormatError(f"{path}:{line_no}: {exc}") from exc
                entries.setdefault(word, []).append(seq)
        if not entries:
            raise DictionaryFormatError(f"{path}: no entries")
        return cls({word: tuple(seqs) for word, seqs in entries.items()})

    @classmethod
    def bundled(cls, name: str = "cmudict_en.txt") -> "PronouncingDictionary":
        """Load a dictionary shipped as package data."""
        with resources.as_file(resources.files("versekit") / "data" / name) as path:
            return cls.load(path)


def emit_epr_training_pairs(
    dictionary: PronouncingDictionary,
    last_words: Mapping[str, int] | Iterable[str],
    count: int,
    seed: int,
) -> list[tuple[str, str]]:
    """Sample (word, rhyming-part) supervision pairs from a last-word multiset.

    Sampling is frequency-weighted and deterministic for a given seed.
    Out-of-dictionary words are skipped; the rhyming part comes from the
    first pronunciation that contains a vowel.
    """
    if count < 0:
        raise ValueError(f"count must be >= 0, got {count}")
    counter = (
        Counter(dict(last_words))
        if isinstance(last_words, Mapping)
        else Counter(normalize_word(w) for w in last_words)
    )
    support: list[tuple[str, str]] = []
    weights: list[int] = []
    for word, freq in sorted(counter.items()):
        if freq <= 0 or not word:
            continue
        endings = dictionary.endings(word)
        if not endings:
            continue
        support.append((word, endings[0].text))
        weights.append(freq)
    if count == 0:
        return []
    if not support:
        raise ValueError("no in-dictionary words to sample from")
    rng = random.Random(seed)
    picks = rng.choices(range(len(support)), weights=weights, k=count)
    return [support[i] for i in picks]
