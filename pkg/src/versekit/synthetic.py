"""Deterministic synthetic lyrics for experiments and tests.

Every word is drawn from the bundled pronouncing dictionary, so induced
schemas are meaningful, rhyme partners always exist in-vocabulary, and
toy language models trained on this corpus can actually rhyme.
"""

from __future__ import annotations

import random

from .corpus import SongDocument

# line-final word pools; words within a family rhyme with each other
RHYME_FAMILIES: dict[str, tuple[str, ...]] = {
    "ell": ("tell", "hell", "bell", "well", "fell", "sell", "shell", "farewell"),
    "ain": ("pain", "rain", "train", "chain", "main", "gain", "remain"),
    "ide": ("ride", "side", "tide", "wide", "hide", "pride", "dive", "five", "alive", "drive"),
    "eye": ("cry", "fly", "my", "why", "sky", "high", "die", "sigh", "goodbye"),
    "eel": ("feel", "we'll", "wheel"),
    "eeld": ("field", "yield", "shield"),
    "day": ("day", "way", "say", "play", "stay", "away", "today"),
    "old": ("old", "cold", "gold", "hold", "told", "bold"),
    "snow": ("go", "know", "no", "snow", "so", "grow", "oh"),
    "sun": ("run", "sun", "fun", "done", "one", "young"),
    "dream": ("dream", "stream", "seem", "team", "gleam"),
    "river": ("river", "giver", "shiver", "deliver", "liver"),
    "heart": ("art", "heart", "start", "part", "apart"),
    "love": ("love", "above", "dove", "glove"),
    "down": ("down", "town", "crown"),
    "found": ("found", "ground", "sound", "around"),
    "time": ("time", "climb", "rhyme", "crime", "sublime"),
    "song": ("song", "long", "strong", "wrong"),
    "free": ("free", "tree", "three", "me", "be", "see", "sea", "she", "we"),
    "moon": ("moon", "soon", "tune", "june", "noon"),
    "stone": ("alone", "stone", "phone", "bone"),
    "fire": ("fire", "desire", "higher", "wire"),
    "near": ("fear", "near"),
    "ear": ("hear", "here", "ear"),
}

FILLER_WORDS: tuple[str, ...] = (
    "the", "and", "oh", "to", "in", "it", "is", "on", "of", "that", "this",
    "when", "will", "can", "not", "now", "then", "all", "for", "with", "did",
    "my", "your", "we", "you", "i", "me", "a", "don't", "into",
)

SCHEMA_PATTERNS: tuple[str, ...] = ("AA", "AABB", "ABAB", "ABBA", "AAA", "ABB")

_GENRES = ("pop", "rock", "folk")
_EMOTIONS = ("sad", "happy", "hopeful", "lonely")
_TOPICS = ("love", "night", "road", "river")
_ARTISTS = (
    "the silver rail", "echo and stone", "the midnight train",
    "paper crown", "the river three",
)
_SECTION_HEADERS = ("Verse", "Chorus", "Bridge")


def _line(rng: random.Random, end_word: str) -> str:
    count = rng.randint(2, 5)
    words = [rng.choice(FILLER_WORDS) for _ in range(count)]
    return " ".join(words + [end_word])


def _stanza(rng: random.Random) -> list[str]:
    pattern = rng.choice(SCHEMA_PATTERNS)
    families = rng.sample(sorted(RHYME_FAMILIES), len(set(pattern)))
    by_letter = dict(zip(sorted(set(pattern)), families))
    lines = []
    for letter in pattern:
        family = RHYME_FAMILIES[by_letter[letter]]
        lines.append(_line(rng, rng.choice(family)))
    return lines


def make_song(song_id: str, rng: random.Random, language: str = "en") -> SongDocument:
    """One synthetic song with 2-3 headed sections of rhyming lines."""
    sections = []
    for index in range(rng.randint(2, 3)):
        header = rng.choice(_SECTION_HEADERS)
        body = "\n".join(_stanza(rng))
        sections.append(f"[{header} {index + 1}]\n{body}")
    title_family = RHYME_FAMILIES[rng.choice(sorted(RHYME_FAMILIES))]
    return SongDocument(
        song_id=song_id,
        lyrics="\n\n".join(sections),
        title=f"the {rng.choice(title_family)}",
        artist=rng.choice(_ARTISTS),
        genre=rng.choice(_GENRES),
        language=language,
        emotions=(rng.choice(_EMOTIONS),),
        topics=(rng.choice(_TOPICS),),
    )


def make_songs(
    n_songs: int, seed: int = 0, language: str = "en", id_prefix: str = "song"
) -> list[SongDocument]:
    """A reproducible corpus of n_songs synthetic songs."""
    if n_songs < 0:
        raise ValueError(f"n_songs must be >= 0, got {n_songs}")
    rng = random.Random(seed)
    return [
        make_song(f"{id_prefix}-{index:05d}", rng, language)
        for index in range(n_songs)
    ]
