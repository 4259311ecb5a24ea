"""Tokenization, vocabulary, and an add-k smoothed n-gram language model.

The model scores and proposes tokens over the exact prompt/target wire
formats.  Prompt tokens condition the distribution but are never scored.
Anything implementing TokenGenerator (a vocabulary plus a next-token
distribution over id context) can drive the constrained decoder; the
n-gram model here is the bundled reference implementation.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Protocol, Sequence

import numpy as np

from .util import canonical_json

BOS = "<bos>"
EOS = "<eos>"
SEP = "<sep>"
EOL = "<eol>"
UNK = "<unk>"

PROMPT_TAGS = (
    "<title>", "<artist>", "<genre>", "<emotions>",
    "<topics>", "<lang>", "<context>", "<rhyming_schema>",
)

_RHYME_TOKEN_RE = re.compile(r"^<rhyme_([A-Z]+)>$")
_SPECIAL_TOKEN_RE = re.compile(
    r"<(?:bos|eos|sep|eol|unk|title|artist|genre|emotions|topics|lang|context|"
    r"rhyming_schema|rhyme_[A-Z]+)>"
)


def rhyme_token(letter: str) -> str:
    if not re.match(r"^[A-Z]+$", letter):
        raise ValueError(f"bad rhyme letter {letter!r}")
    return f"<rhyme_{letter}>"


def rhyme_token_letter(token: str) -> str | None:
    match = _RHYME_TOKEN_RE.match(token)
    return match.group(1) if match else None


def is_special_token(token: str) -> bool:
    return _SPECIAL_TOKEN_RE.fullmatch(token) is not None


def tokenize(text: str) -> list[str]:
    """Whitespace tokenization with special tokens kept atomic.

    Special tokens split off even when juxtaposed, so "<bos><title> X"
    yields ["<bos>", "<title>", "X"].
    """
    tokens: list[str] = []
    pos = 0
    for match in _SPECIAL_TOKEN_RE.finditer(text):
        tokens.extend(text[pos : match.start()].split())
        tokens.append(match.group(0))
        pos = match.end()
    tokens.extend(text[pos:].split())
    return tokens


_BASE_RESERVED = (
    [BOS, EOS, SEP, EOL, UNK]
    + [rhyme_token(chr(c)) for c in range(ord("A"), ord("Z") + 1)]
    + list(PROMPT_TAGS)
)


@dataclass
class Vocabulary:
    """Token/id mapping with special tokens pinned at the front."""

    tokens: list[str]
    index: dict[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.index:
            self.index = {token: i for i, token in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise ValueError("duplicate tokens in vocabulary")
        if UNK not in self.index:
            raise ValueError("vocabulary must contain <unk>")

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def id(self, token: str) -> int:
        """Token id, mapping out-of-vocabulary tokens to <unk>."""
        return self.index.get(token, self.index[UNK])

    def token(self, token_id: int) -> str:
        return self.tokens[token_id]

    def encode(self, tokens: Sequence[str]) -> list[int]:
        unk = self.index[UNK]
        return [self.index.get(t, unk) for t in tokens]

    def decode(self, ids: Sequence[int]) -> list[str]:
        return [self.tokens[i] for i in ids]

    def word_ids(self) -> list[int]:
        """Ids of ordinary (non-special) tokens, ascending."""
        return [i for i, t in enumerate(self.tokens) if not is_special_token(t)]

    @classmethod
    def build(cls, token_streams: Iterable[Sequence[str]], min_count: int = 1) -> "Vocabulary":
        """Reserved specials first, then frequent corpus tokens, sorted.

        Special-shaped tokens seen in the corpus (e.g. <rhyme_AA>) are always
        kept regardless of count; ordinary tokens need count >= min_count.
        """
        counts: Counter[str] = Counter()
        for stream in token_streams:
            counts.update(stream)
        reserved = list(_BASE_RESERVED)
        reserved_set = set(reserved)
        extra_special = sorted(
            t for t in counts if is_special_token(t) and t not in reserved_set
        )
        words = sorted(
            t
            for t, c in counts.items()
            if not is_special_token(t) and c >= min_count
        )
        return cls(reserved + extra_special + words)


class TokenGenerator(Protocol):
    """Minimal surface the constrained decoder needs from any model."""

    @property
    def vocab(self) -> Vocabulary: ...

    def next_distribution(self, context_ids: Sequence[int]) -> np.ndarray: ...


MODEL_FORMAT = "versekit-ngram"
MODEL_VERSION = 1


@dataclass
class NGramModel:
    """Add-k smoothed n-gram model with backoff on unseen contexts.

    counts[m] maps a length-m context tuple of token ids to a Counter of
    next-token ids.  P(t | ctx) = (count + k) / (total + k * |V|) under the
    longest context of length < order that was seen in training.
    """

    vocabulary: Vocabulary
    order: int
    k: float
    min_count: int = 1
    mode: str = "lwf"
    counts: list[dict[tuple[int, ...], Counter]] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.order < 1:
            raise ValueError(f"order must be >= 1, got {self.order}")
        if self.k <= 0:
            raise ValueError(f"smoothing k must be > 0, got {self.k}")
        if self.mode not in ("lwf", "plain"):
            raise ValueError(f"mode must be lwf or plain, got {self.mode!r}")
        if not self.counts:
            self.counts = [{} for _ in range(self.order)]
        if len(self.counts) != self.order:
            raise ValueError("counts tables must match model order")

    @property
    def vocab(self) -> Vocabulary:
        return self.vocabulary

    def _observe(self, stream: Sequence[int], score_from: int) -> None:
        for position in range(score_from, len(stream)):
            token = stream[position]
            for m in range(min(self.order - 1, position) + 1):
                context = tuple(stream[position - m : position])
                table = self.counts[m].setdefault(context, Counter())
                table[token] += 1

    def _context_counter(self, context_ids: Sequence[int]) -> Counter:
        """Longest trained context wins; the empty context always exists."""
        limit = min(self.order - 1, len(context_ids))
        for m in range(limit, -1, -1):
            context = tuple(context_ids[len(context_ids) - m :])
            counter = self.counts[m].get(context)
            if counter is not None:
                return counter
        return Counter()

    def next_distribution(self, context_ids: Sequence[int]) -> np.ndarray:
        """Smoothed probability vector over the whole vocabulary."""
        counter = self._context_counter(context_ids)
        size = len(self.vocabulary)
        dist = np.full(size, self.k, dtype=np.float64)
        for token_id, count in counter.items():
            dist[token_id] += count
        dist /= sum(counter.values()) + self.k * size
        return dist

    def probability(self, context_ids: Sequence[int], token_id: int) -> float:
        counter = self._context_counter(context_ids)
        total = sum(counter.values())
        return (counter.get(token_id, 0) + self.k) / (total + self.k * len(self.vocabulary))

    def sequence_logprob(
        self, prompt_ids: Sequence[int], target_ids: Sequence[int]
    ) -> float:
        """Sum of log P over target positions; prompt only conditions."""
        if not target_ids:
            raise ValueError("empty target sequence")
        stream = list(prompt_ids) + list(target_ids)
        total = 0.0
        for position in range(len(prompt_ids), len(stream)):
            total += float(np.log(self.probability(stream[:position], stream[position])))
        return total

    def score_text(self, prompt: str, target: str) -> tuple[float, int]:
        """(log-probability, token count) for a prompt/target text pair."""
        prompt_ids = self.vocabulary.encode(tokenize(prompt))
        target_ids = self.vocabulary.encode(tokenize(target))
        return self.sequence_logprob(prompt_ids, target_ids), len(target_ids)

    def save(self, path: str | Path) -> None:
        """Write a canonical JSON model file (stable bytes for equal models)."""
        counts_json: list[dict[str, dict[str, int]]] = []
        for table in self.counts:
            layer: dict[str, dict[str, int]] = {}
            for context, counter in table.items():
                key = " ".join(str(i) for i in context)
                layer[key] = {str(t): c for t, c in counter.items()}
            counts_json.append(layer)
        payload = {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "order": self.order,
            "k": self.k,
            "min_count": self.min_count,
            "mode": self.mode,
            "vocab": self.vocabulary.tokens,
            "counts": counts_json,
        }
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(canonical_json(payload))
            handle.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "NGramModel":
        with open(path, "r", encoding="utf-8") as handle:
            try:
                payload = json.load(handle)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}: not a model file: {exc}") from exc
        if payload.get("format") != MODEL_FORMAT:
            raise ValueError(f"{path}: unrecognized model format")
        if payload.get("version") != MODEL_VERSION:
            raise ValueError(f"{path}: unsupported model version {payload.get('version')}")
        counts: list[dict[tuple[int, ...], Counter]] = []
        for layer in payload["counts"]:
            table: dict[tuple[int, ...], Counter] = {}
            for key, counter in layer.items():
                context = tuple(int(i) for i in key.split()) if key else ()
                table[context] = Counter({int(t): int(c) for t, c in counter.items()})
            counts.append(table)
        return cls(
            vocabulary=Vocabulary(list(payload["vocab"])),
            order=int(payload["order"]),
            k=float(payload["k"]),
            min_count=int(payload.get("min_count", 1)),
            mode=str(payload.get("mode", "lwf")),
            counts=counts,
        )


def train_ngram(
    pairs: Iterable[tuple[str, str]],
    order: int = 3,
    k: float = 0.01,
    min_count: int = 1,
    mode: str = "lwf",
) -> NGramModel:
    """Count n-grams over (prompt, target) text pairs.

    Every context length from 0 to order-1 is tabulated at each target
    position, so backoff always lands on a trained table.  Prompt tokens
    supply left context but are never predicted.
    """
    if not 1 <= order <= 6:
        raise ValueError(f"order must be in [1, 6], got {order}")
    token_pairs: list[tuple[list[str], list[str]]] = []
    for prompt, target in pairs:
        token_pairs.append((tokenize(prompt), tokenize(target)))
    if not token_pairs:
        raise ValueError("no training pairs")
    vocabulary = Vocabulary.build(
        (p + t for p, t in token_pairs), min_count=min_count
    )
    model = NGramModel(vocabulary=vocabulary, order=order, k=k, min_count=min_count, mode=mode)
    for prompt_tokens, target_tokens in token_pairs:
        stream = vocabulary.encode(prompt_tokens) + vocabulary.encode(target_tokens)
        model._observe(stream, score_from=len(prompt_tokens))
    return model


def train_from_records(
    records,
    order: int = 3,
    k: float = 0.01,
    min_count: int = 1,
    mode: str = "lwf",
    include_language: bool = False,
) -> NGramModel:
    """train_ngram over paragraph records, formatting prompts and targets."""
    from .corpus import (
        GenerationSpec,
        format_lwf_target,
        format_plain_target,
        format_prompt,
    )

    pairs = []
    for record in records:
        spec = GenerationSpec.from_record(record, include_language=include_language)
        if mode == "lwf":
            target = format_lwf_target(record.lines, record.last_words, record.schema)
        else:
            target = format_plain_target(record.lines)
        pairs.append((format_prompt(spec), target))
    return train_ngram(pairs, order=order, k=k, min_count=min_count, mode=mode)
