"""Rhyme-schema-constrained stanza generation over any TokenGenerator.

The decoder walks a small grammar per verse: the rhyme symbol for the next
schema letter is forced, a line-final word is chosen (or forced, or
restricted to rhyme partners in assist mode), <sep> is forced, and the
verse body is sampled freely until <eol> or the per-verse token budget.
After the last verse <eos> is forced, so every output parses as a
last-word-first target.  Forced tokens contribute nothing to the LM score.
"""

from __future__ import annotations

import enum
import math
import random
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .corpus import GenerationSpec, format_lwf_target, format_prompt
from .lm import EOL, EOS, SEP, TokenGenerator, rhyme_token, tokenize
from .metrics import rhyme_precision
from .phonetics import ENGLISH_PROFILE, LanguageProfile, PronouncingDictionary, normalize_word
from .rhyme import ConsonantClassTable, DEFAULT_CONSONANT_TABLE, RhymeSchema, rhyme_verdict
from .util import derive_seed


class Phase(enum.Enum):
    EXPECT_RHYME_SYMBOL = "expect_rhyme_symbol"
    EXPECT_LAST_WORD = "expect_last_word"
    EXPECT_SEP = "expect_sep"
    IN_VERSE = "in_verse"
    EXPECT_EOS = "expect_eos"
    DONE = "done"


@dataclass(frozen=True)
class Verse:
    letter: str
    last_word: str
    tokens: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.tokens:
            raise ValueError("empty verse")

    @property
    def text(self) -> str:
        return " ".join(self.tokens)


@dataclass(frozen=True)
class CandidateStanza:
    """A finished generation: verses plus the free-step LM log-probability."""

    verses: tuple[Verse, ...]
    lm_logprob: float
    rerank: float | None = None

    @property
    def lines(self) -> tuple[str, ...]:
        return tuple(verse.text for verse in self.verses)

    @property
    def text(self) -> str:
        return "\n".join(self.lines)

    def schema(self) -> RhymeSchema:
        return RhymeSchema(tuple(verse.letter for verse in self.verses))

    def to_target_text(self) -> str:
        """The stanza as a last-word-first target string."""
        return format_lwf_target(
            self.lines,
            tuple(verse.last_word for verse in self.verses),
            self.schema(),
        )

    def to_json(self) -> dict:
        return {
            "verses": [
                {"letter": v.letter, "last_word": v.last_word, "tokens": list(v.tokens)}
                for v in self.verses
            ],
            "lm_logprob": self.lm_logprob,
            "rerank": self.rerank,
        }

    @classmethod
    def from_json(cls, row: Mapping) -> "CandidateStanza":
        if "verses" not in row:
            raise ValueError("stanza row missing verses")
        return cls(
            verses=tuple(
                Verse(str(v["letter"]), str(v["last_word"]), tuple(v["tokens"]))
                for v in row["verses"]
            ),
            lm_logprob=float(row.get("lm_logprob", 0.0)),
            rerank=None if row.get("rerank") is None else float(row["rerank"]),
        )


@dataclass(frozen=True)
class DecodeState:
    """Position in the verse grammar; immutable so beams can share history."""

    phase: Phase
    verse_index: int
    pending_word: str | None
    body: tuple[str, ...]
    verses: tuple[Verse, ...]
    realized: tuple[tuple[str, str], ...]
    context_ids: tuple[int, ...]
    lm_logprob: float

    def realized_word(self, letter: str) -> str | None:
        for known_letter, word in self.realized:
            if known_letter == letter:
                return word
        return None

    def realized_words(self, letter: str) -> tuple[str, ...]:
        return tuple(word for known_letter, word in self.realized if known_letter == letter)


@dataclass
class StepOptions:
    """Either one forced token or a free choice over support ids."""

    forced_token: str | None = None
    support_ids: np.ndarray | None = None


@dataclass(frozen=True)
class DecodeSettings:
    rhyme_assist: bool = False
    verse_final_match: bool = True
    temperature: float = 1.0

    def __post_init__(self) -> None:
        if self.temperature <= 0:
            raise ValueError(f"temperature must be > 0, got {self.temperature}")


class DecodeBudgetError(RuntimeError):
    """No candidate finished within the step budget; carries the best partial."""

    def __init__(self, message: str, best_partial: DecodeState | None = None) -> None:
        super().__init__(message)
        self.best_partial = best_partial


class ConstrainedDecoder:
    """Applies the LWF grammar to one GenerationSpec over one generator."""

    def __init__(
        self,
        generator: TokenGenerator,
        spec: GenerationSpec,
        dictionary: PronouncingDictionary | None = None,
        profile: LanguageProfile = ENGLISH_PROFILE,
        table: ConsonantClassTable = DEFAULT_CONSONANT_TABLE,
        settings: DecodeSettings = DecodeSettings(),
    ) -> None:
        if settings.rhyme_assist and dictionary is None:
            raise ValueError("rhyme assist needs a pronouncing dictionary")
        self.generator = generator
        self.spec = spec
        self.dictionary = dictionary
        self.profile = profile
        self.table = table
        self.settings = settings
        vocab = generator.vocab
        self.vocab = vocab
        self._eol_id = self._require_token(EOL)
        self._eos_id = self._require_token(EOS)
        self._sep_id = self._require_token(SEP)
        for letter in set(spec.schema.letters):
            self._require_token(rhyme_token(letter))
        word_ids = []
        for token_id in vocab.word_ids():
            if normalize_word(vocab.token(token_id)):
                word_ids.append(token_id)
        if not word_ids:
            raise ValueError("vocabulary has no usable word tokens")
        self._word_ids = np.array(word_ids, dtype=np.int64)
        self._assist_cache: dict[str, np.ndarray] = {}
        # maximum emitted tokens: per verse 3 specials + word + body budget
        self.step_budget = len(spec.schema) * (spec.max_verse_tokens + 4) + 1

    def _require_token(self, token: str) -> int:
        if token not in self.vocab:
            raise ValueError(f"vocabulary is missing required token {token}")
        return self.vocab.id(token)

    def initial_state(self) -> DecodeState:
        prompt_ids = tuple(self.vocab.encode(tokenize(format_prompt(self.spec))))
        return DecodeState(
            phase=Phase.EXPECT_RHYME_SYMBOL,
            verse_index=0,
            pending_word=None,
            body=(),
            verses=(),
            realized=(),
            context_ids=prompt_ids,
            lm_logprob=0.0,
        )

    def _assist_support(self, realized: str) -> np.ndarray:
        """Word tokens whose normalized form rhymes with the realized word."""
        cached = self._assist_cache.get(realized)
        if cached is not None:
            return cached
        assert self.dictionary is not None
        ids = [
            token_id
            for token_id in self._word_ids
            if rhyme_verdict(
                self.dictionary,
                normalize_word(self.vocab.token(int(token_id))),
                realized,
                self.profile,
                self.table,
            ).rhymes
        ]
        support = np.array(ids, dtype=np.int64) if ids else self._word_ids
        self._assist_cache[realized] = support
        return support

    def _group_support(self, realized: tuple[str, ...]) -> np.ndarray:
        """Word tokens that rhyme with every final already committed to a group.

        Near rhyme is not transitive, so anchoring on the first word alone
        would let a group collect pairwise non-rhyming finals.  The running
        intersection always contains the group's own earlier words, so it
        never empties under assist-driven choices; the guard covers forced
        words injected from outside the support.
        """
        support = self._assist_support(realized[0])
        for word in realized[1:]:
            narrowed = np.intersect1d(support, self._assist_support(word))
            if narrowed.size:
                support = narrowed
        return support

    def step_options(self, state: DecodeState) -> StepOptions:
        """Resolve the grammar at this state into a forced token or support."""
        if state.phase is Phase.EXPECT_RHYME_SYMBOL:
            letter = self.spec.schema.letters[state.verse_index]
            return StepOptions(forced_token=rhyme_token(letter))
        if state.phase is Phase.EXPECT_LAST_WORD:
            forced = self.spec.forced_last_words.get(state.verse_index)
            if forced is not None:
                return StepOptions(forced_token=forced)
            if self.settings.rhyme_assist:
                letter = self.spec.schema.letters[state.verse_index]
                realized = state.realized_words(letter)
                if realized:
                    return StepOptions(support_ids=self._group_support(realized))
            return StepOptions(support_ids=self._word_ids)
        if state.phase is Phase.EXPECT_SEP:
            return StepOptions(forced_token=SEP)
        if state.phase is Phase.IN_VERSE:
            if len(state.body) >= self.spec.max_verse_tokens:
                return StepOptions(forced_token=EOL)
            if self._eol_permitted(state):
                support = np.append(self._word_ids, self._eol_id)
            else:
                support = self._word_ids
            return StepOptions(support_ids=support)
        if state.phase is Phase.EXPECT_EOS:
            return StepOptions(forced_token=EOS)
        raise ValueError("decode already finished")

    def _eol_permitted(self, state: DecodeState) -> bool:
        if not state.body:
            return False
        if not self.settings.verse_final_match:
            return True
        assert state.pending_word is not None
        return normalize_word(state.body[-1]) == normalize_word(state.pending_word)

    def apply(self, state: DecodeState, token: str, logprob_delta: float) -> DecodeState:
        """Advance the grammar with one emitted token."""
        context_ids = state.context_ids + (self.vocab.id(token),)
        logprob = state.lm_logprob + logprob_delta
        if state.phase is Phase.EXPECT_RHYME_SYMBOL:
            return replace(
                state,
                phase=Phase.EXPECT_LAST_WORD,
                context_ids=context_ids,
                lm_logprob=logprob,
            )
        if state.phase is Phase.EXPECT_LAST_WORD:
            letter = self.spec.schema.letters[state.verse_index]
            # Every committed final is recorded; the anchor stays first.
            realized = state.realized + ((letter, normalize_word(token)),)
            return replace(
                state,
                phase=Phase.EXPECT_SEP,
                pending_word=token,
                realized=realized,
                context_ids=context_ids,
                lm_logprob=logprob,
            )
        if state.phase is Phase.EXPECT_SEP:
            return replace(
                state,
                phase=Phase.IN_VERSE,
                body=(),
                context_ids=context_ids,
                lm_logprob=logprob,
            )
        if state.phase is Phase.IN_VERSE:
            if token != EOL:
                return replace(
                    state,
                    body=state.body + (token,),
                    context_ids=context_ids,
                    lm_logprob=logprob,
                )
            assert state.pending_word is not None
            body = state.body
            if not body:
                body = (state.pending_word,)
            elif (
                self.settings.verse_final_match
                and normalize_word(body[-1]) != normalize_word(state.pending_word)
            ):
                # budget-forced line end: the committed word takes the last slot
                body = body[:-1] + (state.pending_word,)
            verse = Verse(
                letter=self.spec.schema.letters[state.verse_index],
                last_word=state.pending_word,
                tokens=body,
            )
            verse_index = state.verse_index + 1
            phase = (
                Phase.EXPECT_EOS if verse_index == len(self.spec.schema) else Phase.EXPECT_RHYME_SYMBOL
            )
            return replace(
                state,
                phase=phase,
                verse_index=verse_index,
                pending_word=None,
                body=(),
                verses=state.verses + (verse,),
                context_ids=context_ids,
                lm_logprob=logprob,
            )
        if state.phase is Phase.EXPECT_EOS:
            return replace(
                state, phase=Phase.DONE, context_ids=context_ids, lm_logprob=logprob
            )
        raise ValueError("decode already finished")

    def constrained_step(
        self,
        state: DecodeState,
        dist: np.ndarray | None = None,
        rng: random.Random | None = None,
    ) -> tuple[str, DecodeState]:
        """One grammar-legal token: forced, sampled, or greedy-argmax."""
        options = self.step_options(state)
        if options.forced_token is not None:
            return options.forced_token, self.apply(state, options.forced_token, 0.0)
        if dist is None:
            dist = self.generator.next_distribution(state.context_ids)
        support = options.support_ids
        probs = np.asarray(dist, dtype=np.float64)[support]
        if rng is None:
            choice = int(np.argmax(probs))
        else:
            weights = probs
            if self.settings.temperature != 1.0:
                weights = probs ** (1.0 / self.settings.temperature)
            total = float(weights.sum())
            if total <= 0:
                weights = np.full(len(support), 1.0 / len(support))
            else:
                weights = weights / total
            choice = int(np.searchsorted(np.cumsum(weights), rng.random(), side="right"))
            choice = min(choice, len(support) - 1)
        token_id = int(support[choice])
        token = self.vocab.token(token_id)
        return token, self.apply(state, token, math.log(float(probs[choice])))

    def finish(self, state: DecodeState) -> CandidateStanza:
        if state.phase is not Phase.DONE:
            raise ValueError("decode not finished")
        return CandidateStanza(verses=state.verses, lm_logprob=state.lm_logprob)

    def sample(self, rng: random.Random) -> CandidateStanza:
        state = self.initial_state()
        for _ in range(self.step_budget + 1):
            if state.phase is Phase.DONE:
                return self.finish(state)
            _, state = self.constrained_step(state, rng=rng)
        if state.phase is Phase.DONE:
            return self.finish(state)
        raise DecodeBudgetError("decode exceeded step budget", best_partial=state)

    def greedy(self) -> CandidateStanza:
        state = self.initial_state()
        for _ in range(self.step_budget + 1):
            if state.phase is Phase.DONE:
                return self.finish(state)
            _, state = self.constrained_step(state)
        if state.phase is Phase.DONE:
            return self.finish(state)
        raise DecodeBudgetError("decode exceeded step budget", best_partial=state)


def rerank_score(
    stanza: CandidateStanza,
    spec: GenerationSpec,
    dictionary: PronouncingDictionary,
    profile: LanguageProfile = ENGLISH_PROFILE,
    table: ConsonantClassTable = DEFAULT_CONSONANT_TABLE,
) -> float:
    """Schema adherence of the actual verse-final words, in [0, 1].

    Stanzas with the wrong verse count are scaled by the fraction of verses
    they did produce.
    """
    finals = [verse.tokens[-1] for verse in stanza.verses]
    score = rhyme_precision(finals, spec.schema, dictionary, profile, table)
    if len(stanza.verses) != len(spec.schema):
        score *= min(len(stanza.verses), len(spec.schema)) / len(spec.schema)
    return score


def beam_search(
    generator: TokenGenerator,
    spec: GenerationSpec,
    beam_width: int = 4,
    dictionary: PronouncingDictionary | None = None,
    profile: LanguageProfile = ENGLISH_PROFILE,
    table: ConsonantClassTable = DEFAULT_CONSONANT_TABLE,
    settings: DecodeSettings = DecodeSettings(),
) -> CandidateStanza:
    """Deterministic beam search under the grammar; beam 1 is greedy."""
    if beam_width < 1:
        raise ValueError(f"beam width must be >= 1, got {beam_width}")
    decoder = ConstrainedDecoder(generator, spec, dictionary, profile, table, settings)
    prompt_len = len(decoder.initial_state().context_ids)

    def sort_key(state: DecodeState) -> tuple:
        return (-state.lm_logprob, state.context_ids[prompt_len:])

    beams = [decoder.initial_state()]
    finished: list[DecodeState] = []
    for _ in range(decoder.step_budget + 1):
        if not beams:
            break
        expansions: list[DecodeState] = []
        for state in beams:
            options = decoder.step_options(state)
            if options.forced_token is not None:
                expansions.append(decoder.apply(state, options.forced_token, 0.0))
                continue
            dist = generator.next_distribution(state.context_ids)
            support = options.support_ids
            probs = np.asarray(dist, dtype=np.float64)[support]
            order = np.argsort(-probs, kind="stable")[:beam_width]
            for position in order:
                token = decoder.vocab.token(int(support[int(position)]))
                expansions.append(
                    decoder.apply(state, token, math.log(float(probs[int(position)])))
                )
        beams = []
        for state in expansions:
            if state.phase is Phase.DONE:
                finished.append(state)
            else:
                beams.append(state)
        beams = sorted(beams, key=sort_key)[:beam_width]
    if not finished:
        best_partial = min(beams, key=sort_key) if beams else None
        raise DecodeBudgetError("no candidate finished within budget", best_partial)
    return decoder.finish(min(finished, key=sort_key))


def sample_stanza(
    generator: TokenGenerator,
    spec: GenerationSpec,
    seed: int | None = None,
    sample_index: int = 0,
    dictionary: PronouncingDictionary | None = None,
    profile: LanguageProfile = ENGLISH_PROFILE,
    table: ConsonantClassTable = DEFAULT_CONSONANT_TABLE,
    settings: DecodeSettings = DecodeSettings(),
) -> CandidateStanza:
    """One constrained sample; independent substream per sample index."""
    decoder = ConstrainedDecoder(generator, spec, dictionary, profile, table, settings)
    root = spec.seed if seed is None else seed
    rng = random.Random(derive_seed(root, f"sample:{sample_index}"))
    return decoder.sample(rng)


def sample_and_rerank(
    generator: TokenGenerator,
    spec: GenerationSpec,
    k: int = 20,
    seed: int | None = None,
    dictionary: PronouncingDictionary | None = None,
    profile: LanguageProfile = ENGLISH_PROFILE,
    table: ConsonantClassTable = DEFAULT_CONSONANT_TABLE,
    settings: DecodeSettings = DecodeSettings(),
) -> tuple[CandidateStanza, list[CandidateStanza]]:
    """Draw k constrained samples, keep the most schema-adherent.

    Ties break by LM log-probability, then by sample index.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if dictionary is None:
        raise ValueError("reranking needs a pronouncing dictionary")
    candidates: list[CandidateStanza] = []
    for index in range(k):
        stanza = sample_stanza(
            generator, spec, seed, index, dictionary, profile, table, settings
        )
        score = rerank_score(stanza, spec, dictionary, profile, table)
        candidates.append(replace(stanza, rerank=score))
    best = candidates[0]
    for stanza in candidates[1:]:
        if (stanza.rerank, stanza.lm_logprob) > (best.rerank, best.lm_logprob):
            best = stanza
    return best, candidates
