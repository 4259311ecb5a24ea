"""Sectioning, record construction, wire formats, and dataset splitting."""

from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from versekit.corpus import (
    GenerationSpec,
    ParagraphRecord,
    SectionType,
    SongDocument,
    build_records,
    chunk_unsectioned,
    classify_section_header,
    filter_languages,
    format_lwf_target,
    format_plain_target,
    format_prompt,
    parse_lwf_target,
    parse_plain_target,
    parse_prompt,
    parse_sections,
    read_records,
    read_songs,
    record_row,
    split_dataset,
    write_records,
    write_songs,
)
from versekit.rhyme import RhymeSchema, induce_schema
from versekit.synthetic import make_songs

_WORD = st.text(alphabet="abcdefghijklmnopqrstuvwxyz", min_size=1, max_size=8)


class TestSectioning:
    @pytest.mark.parametrize(
        ("header", "kind"),
        [
            ("Verse 1", SectionType.VERSE),
            ("verse2", SectionType.VERSE),
            ("chorus", SectionType.CHORUS),
            ("Pre-Chorus", SectionType.PRECHORUS),
            ("Pre Chorus 2", SectionType.PRECHORUS),
            ("Bridge", SectionType.BRIDGE),
            ("INTRO", SectionType.INTRO),
            ("Outro", SectionType.OUTRO),
            ("Hook", SectionType.OTHER),
            ("Refrain", SectionType.OTHER),
        ],
    )
    def test_classify_section_header(self, header, kind):
        assert classify_section_header(header) is kind

    def test_parse_sections_with_headers(self):
        song = SongDocument(
            song_id="s",
            lyrics="lead in\n\n[Verse 1]\nline one\n\nline two\n[Chorus]\nhook line\n",
        )
        assert [(t, lines) for t, lines in parse_sections(song)] == [
            (SectionType.OTHER, ["lead in"]),
            (SectionType.VERSE, ["line one", "line two"]),
            (SectionType.CHORUS, ["hook line"]),
        ]

    def test_parse_sections_headerless(self):
        song = SongDocument(song_id="s", lyrics="a\nb\n\nc\n")
        assert parse_sections(song) == [(SectionType.OTHER, ["a", "b", "c"])]

    def test_chunk_unsectioned(self):
        lines = [f"l{i}" for i in range(14)]
        assert [len(g) for g in chunk_unsectioned(lines, 6)] == [6, 6, 2]
        # A trailing single line cannot form a stanza and is dropped.
        assert [len(g) for g in chunk_unsectioned(lines[:13], 6)] == [6, 6]
        assert chunk_unsectioned(["only"], 6) == []


class TestParagraphRecord:
    def test_aligned_lengths_required(self):
        with pytest.raises(ValueError):
            ParagraphRecord(
                song_id="s",
                section_type=SectionType.VERSE,
                section_index=0,
                lines=("a line", "b line"),
                last_words=("line",),
                schema=RhymeSchema.from_string("A A"),
            )

    def test_first_section_has_no_context(self):
        with pytest.raises(ValueError):
            ParagraphRecord(
                song_id="s",
                section_type=SectionType.VERSE,
                section_index=0,
                lines=("a line",),
                last_words=("line",),
                schema=RhymeSchema.from_string("A"),
                previous_lines=("earlier",),
            )


class TestBuildRecords:
    def test_invariants_on_synthetic_corpus(self, dictionary):
        songs = make_songs(30, seed=5)
        records = build_records(songs, dictionary)
        assert records
        by_song: dict[str, list[ParagraphRecord]] = {}
        for record in records:
            by_song.setdefault(record.song_id, []).append(record)
            assert record.schema == induce_schema(dictionary, record.last_words)
            assert (record.section_index == 0) == (not record.previous_lines)
            for line in record.lines:
                assert line == " ".join(line.split())
        for group in by_song.values():
            indices = [r.section_index for r in group]
            assert indices == sorted(indices)

    def test_context_is_previous_section(self, dictionary):
        song = SongDocument(
            song_id="s",
            lyrics="[Verse]\nwe ride\nwe hide\n[Chorus]\nwe dive\nalive\n",
        )
        records = build_records([song], dictionary)
        assert len(records) == 2
        assert records[0].previous_lines == ()
        assert records[1].previous_lines == ("we ride", "we hide")

    def test_multilingual_filter_drops_rare_languages(self, dictionary):
        en = make_songs(5, seed=0, id_prefix="en")
        fr = [
            SongDocument(song_id=f"fr-{i}", lyrics="la nuit\nla pluit\n", language="fr")
            for i in range(2)
        ]
        kept = build_records(en + fr, dictionary, multilingual=True, min_songs=3)
        assert {r.language for r in kept} == {"en"}
        both = build_records(en + fr, dictionary, multilingual=True, min_songs=2)
        assert {r.language for r in both} == {"en", "fr"}

    def test_monolingual_mode_keeps_everything(self, dictionary):
        fr = [
            SongDocument(song_id=f"fr-{i}", lyrics="la nuit\nla pluit\n", language="fr")
            for i in range(2)
        ]
        records = build_records(fr, dictionary, min_songs=3000)
        assert {r.language for r in records} == {"fr"}

    def test_filter_languages_counts_songs(self):
        songs = [SongDocument(song_id=f"e{i}", lyrics="x\n") for i in range(4)]
        songs += [SongDocument(song_id="f0", lyrics="x\n", language="fr")]
        kept = filter_languages(songs, min_songs=2)
        assert {s.language for s in kept} == {"en"}

    def test_parallel_build_matches_serial(self, dictionary):
        songs = make_songs(20, seed=9)
        serial = build_records(songs, dictionary, jobs=1)
        parallel = build_records(songs, dictionary, jobs=4)
        assert serial == parallel


class TestPromptFormat:
    def test_reference_prompt_is_byte_exact(self):
        spec = GenerationSpec(
            schema=RhymeSchema.from_string("A B B"),
            title="The River",
            artist="Bruce Springsteen",
            emotions=("sad",),
        )
        assert format_prompt(spec) == (
            "<bos><title> The River <artist> Bruce Springsteen "
            "<emotions> sad <rhyming_schema> A B B <eos>"
        )

    def test_field_order_and_context_separator(self):
        spec = GenerationSpec(
            schema=RhymeSchema.from_string("A B"),
            title="Night, Day",
            artist="The Band",
            genre="folk",
            emotions=("sad", "warm"),
            topics=("rivers",),
            language="en",
            previous_lines=("first line", "second line"),
        )
        assert format_prompt(spec) == (
            "<bos><title> Night, Day <artist> The Band <genre> folk "
            "<emotions> sad warm <topics> rivers <lang> en "
            "<context> first line <eol> second line <rhyming_schema> A B <eos>"
        )

    def test_commas_removed_from_tag_values(self):
        spec = GenerationSpec(
            schema=RhymeSchema.from_string("A"),
            genre="fo,lk rock",
            emotions=("wa,rm",),
        )
        assert format_prompt(spec) == (
            "<bos><genre> fo lk rock <emotions> wa rm <rhyming_schema> A <eos>"
        )

    def test_schema_only_prompt(self):
        spec = GenerationSpec(schema=RhymeSchema.from_string("A"))
        assert format_prompt(spec) == "<bos><rhyming_schema> A <eos>"

    def test_parse_requires_schema(self):
        with pytest.raises(ValueError):
            parse_prompt("<bos><title> X <eos>")

    @given(
        title=st.one_of(st.none(), _WORD),
        artist=st.one_of(st.none(), _WORD),
        genre=st.one_of(st.none(), _WORD),
        emotions=st.lists(_WORD, max_size=3),
        topics=st.lists(_WORD, max_size=3),
        language=st.one_of(st.none(), st.sampled_from(["en", "fr", "de"])),
        pattern=st.lists(st.integers(min_value=0, max_value=2), min_size=1, max_size=6),
    )
    def test_round_trip(self, title, artist, genre, emotions, topics, language, pattern):
        seen: dict[int, int] = {}
        letters = []
        for value in pattern:
            seen.setdefault(value, len(seen))
            letters.append("ABC"[seen[value]])
        spec = GenerationSpec(
            schema=RhymeSchema(tuple(letters)),
            title=title,
            artist=artist,
            genre=genre,
            emotions=tuple(emotions),
            topics=tuple(topics),
            language=language,
        )
        assert parse_prompt(format_prompt(spec)) == spec


class TestTargetFormats:
    LINES = (
        "We'd go down to the river",
        "And into the river we'd dive",
        "Oh down to the river we'd ride",
    )
    WORDS = ("river", "dive", "ride")

    def test_reference_lwf_target_is_byte_exact(self):
        schema = RhymeSchema.from_string("A B B")
        assert format_lwf_target(self.LINES, self.WORDS, schema) == (
            "<rhyme_A> river <sep> We'd go down to the river <eol> "
            "<rhyme_B> dive <sep> And into the river we'd dive <eol> "
            "<rhyme_B> ride <sep> Oh down to the river we'd ride <eol> <eos>"
        )

    def test_plain_target(self):
        assert format_plain_target(self.LINES) == (
            "We'd go down to the river <eol> "
            "And into the river we'd dive <eol> "
            "Oh down to the river we'd ride <eol> <eos>"
        )

    def test_lwf_round_trip(self):
        schema = RhymeSchema.from_string("A B B")
        text = format_lwf_target(self.LINES, self.WORDS, schema)
        lines, words, parsed = parse_lwf_target(text)
        assert lines == self.LINES
        assert words == self.WORDS
        assert parsed == schema

    def test_plain_round_trip(self):
        assert parse_plain_target(format_plain_target(self.LINES)) == self.LINES

    def test_mismatched_lengths_rejected(self):
        with pytest.raises(ValueError):
            format_lwf_target(self.LINES, self.WORDS[:2], RhymeSchema.from_string("A B B"))

    def test_malformed_target_rejected(self):
        with pytest.raises(ValueError):
            parse_lwf_target("<rhyme_A> word <sep> no terminator")


class TestSplitDataset:
    def _records(self, n_songs: int, dictionary):
        return build_records(make_songs(n_songs, seed=2), dictionary)

    def test_partition_and_determinism(self, dictionary):
        records = self._records(60, dictionary)
        train, dev, test = split_dataset(records, (0.8, 0.1, 0.1), seed=1)
        again = split_dataset(records, (0.8, 0.1, 0.1), seed=1)
        assert (train, dev, test) == again
        assert len(train) + len(dev) + len(test) == len(records)
        ids = lambda part: {id(r) for r in part}
        assert not (ids(train) & ids(dev) | ids(train) & ids(test) | ids(dev) & ids(test))

    def test_no_song_straddles_buckets(self, dictionary):
        records = self._records(80, dictionary)
        parts = split_dataset(records, (0.6, 0.2, 0.2), seed=0)
        song_bucket: dict[str, int] = {}
        for bucket, part in enumerate(parts):
            for record in part:
                assert song_bucket.setdefault(record.song_id, bucket) == bucket

    def test_ratio_validation(self, dictionary):
        records = self._records(5, dictionary)
        with pytest.raises(ValueError):
            split_dataset(records, (0.5, 0.2, 0.2), seed=0)


class TestGenerationSpec:
    def test_forced_word_validation(self):
        schema = RhymeSchema.from_string("A B")
        with pytest.raises(ValueError):
            GenerationSpec(schema=schema, forced_last_words={2: "river"})
        with pytest.raises(ValueError):
            GenerationSpec(schema=schema, forced_last_words={0: "  "})

    def test_json_round_trip(self):
        spec = GenerationSpec(
            schema=RhymeSchema.from_string("A B B"),
            title="The River",
            artist="Bruce Springsteen",
            emotions=("sad",),
            forced_last_words={0: "river"},
            max_verse_tokens=12,
            seed=7,
        )
        assert GenerationSpec.from_json(spec.to_json()) == spec

    def test_from_record_copies_metadata(self, dictionary):
        record = build_records(make_songs(4, seed=1), dictionary)[1]
        spec = GenerationSpec.from_record(record)
        assert spec.schema == record.schema
        assert spec.title == record.title
        assert spec.previous_lines == record.previous_lines


class TestJsonlRoundTrips:
    def test_songs(self, tmp_path):
        songs = make_songs(6, seed=4)
        path = tmp_path / "songs.jsonl"
        assert write_songs(path, songs) == 6
        assert read_songs(path) == songs

    def test_records(self, tmp_path, dictionary):
        records = build_records(make_songs(6, seed=4), dictionary)
        path = tmp_path / "records.jsonl"
        write_records(path, records)
        assert read_records(path) == records

    def test_record_row_targets_parse_back(self, dictionary):
        record = build_records(make_songs(3, seed=6), dictionary)[0]
        row = record_row(record)
        lines, words, schema = parse_lwf_target(row["target_lwf"])
        assert lines == record.lines
        assert words == record.last_words
        assert schema == record.schema
        assert parse_plain_target(row["target_plain"]) == record.lines
        assert parse_prompt(row["prompt"]).schema == record.schema
