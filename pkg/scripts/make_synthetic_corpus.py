#!/usr/bin/env python3
"""Generate a synthetic song corpus for pipeline experiments.

Writes a songs JSONL file whose lyrics follow clean rhyme schemes drawn
from the bundled dictionary, suitable for exercising dataset construction,
LM training, and decoding end to end.
"""

from __future__ import annotations

import argparse
import sys

from versekit.corpus import write_songs
from versekit.synthetic import make_songs


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--songs", type=int, default=300, help="number of songs")
    parser.add_argument("--seed", type=int, default=0, help="generation seed")
    parser.add_argument("--language", default="en", help="language code for every song")
    parser.add_argument("--id-prefix", default="song", help="song id prefix")
    parser.add_argument("--out", required=True, help="output songs JSONL path")
    args = parser.parse_args(argv)

    if args.songs < 1:
        parser.error("--songs must be positive")
    songs = make_songs(args.songs, seed=args.seed, language=args.language,
                       id_prefix=args.id_prefix)
    write_songs(args.out, songs)
    print(f"wrote {len(songs)} songs to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
