"""Shared text primitives: tokenization, sentence splitting, stable hashing.

Every component that looks at text (indexing, embedding, generation,
judging) goes through these functions so the whole pipeline agrees on
what a token and a sentence are.
"""

from __future__ import annotations

import re

# Maximal alphanumeric runs, lowercased. Underscore is punctuation here.
_WORD_RE = re.compile(r"[^\W_]+", re.UNICODE)

_SENTENCE_SPLIT_RE = re.compile(r"(?<=[.!?])\s+")

# Trailing tokens that end with '.' but do not end a sentence.
ABBREVIATIONS = frozenset(
    {
        "al.", "cf.", "dr.", "e.g.", "etc.", "fig.", "i.e.", "jr.", "mr.",
        "mrs.", "ms.", "no.", "prof.", "st.", "vs.",
    }
)

# Fixed in-repo stopword list used by the entailment judge. Content-token
# comparisons ignore these.
STOPWORDS = frozenset(
    {
        "a", "an", "and", "are", "as", "at", "be", "but", "by", "for",
        "from", "had", "has", "have", "in", "is", "it", "its", "of", "on",
        "or", "that", "the", "their", "there", "these", "this", "to",
        "was", "were", "which", "with",
    }
)


def tokenize(text: str) -> list[str]:
    """Lowercase and split into maximal alphanumeric runs."""
    return _WORD_RE.findall(text.lower())


def content_tokens(text: str) -> set[str]:
    """Token set with stopwords removed."""
    return {t for t in tokenize(text) if t not in STOPWORDS}


def _ends_with_abbreviation(fragment: str) -> bool:
    tail = fragment.rsplit(None, 1)[-1].lower() if fragment.split() else ""
    if tail in ABBREVIATIONS:
        return True
    # Single-letter initials such as "J." never close a sentence.
    return len(tail) == 2 and tail.endswith(".") and tail[0].isalpha()


def split_sentences(text: str) -> list[str]:
    """Split text into sentences on ``.?!`` and line boundaries.

    Fragments whose last token is a known abbreviation are glued back to
    the following fragment, so "e.g. this" stays one sentence.
    """
    sentences: list[str] = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        merged: list[str] = []
        for part in _SENTENCE_SPLIT_RE.split(line):
            part = part.strip()
            if not part:
                continue
            if merged and _ends_with_abbreviation(merged[-1]):
                merged[-1] = f"{merged[-1]} {part}"
            else:
                merged.append(part)
        sentences.extend(merged)
    return sentences


_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def fnv1a64(text: str) -> int:
    """FNV-1a 64-bit hash of the UTF-8 encoding of ``text``.

    Used wherever a platform-stable token hash is needed (feature
    hashing, embeddings, label derivation). Not for security.
    """
    h = _FNV_OFFSET
    for byte in text.encode("utf-8"):
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h
