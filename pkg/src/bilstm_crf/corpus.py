"""BIO column corpora: parsing, validation, vocabularies and padded batches.

File layout: one ``<char><TAB or space><label>`` pair per line, a blank line
ends a sentence, lines starting with ``#`` are comments.
"""

from __future__ import annotations

import io
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence, TextIO, Union

import numpy as np

DEFAULT_LABELS = (
    "B-PER", "I-PER",
    "B-LOC", "I-LOC",
    "B-ORG", "I-ORG",
    "B-NUM", "I-NUM",
    "B-CRI", "I-CRI",
    "O",
)

ENTITY_TYPES = ("PER", "LOC", "ORG", "NUM", "CRI")

PAD_ID = 0
UNK_ID = 1


class CorpusError(ValueError):
    """Malformed corpus input; ``lineno`` is 1-based when known."""

    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class LabeledSentence:
    chars: tuple[str, ...]
    labels: tuple[str, ...]

    def __init__(self, chars: Iterable[str], labels: Iterable[str]):
        chars, labels = tuple(chars), tuple(labels)
        if not chars:
            raise CorpusError("empty sentence")
        if len(chars) != len(labels):
            raise CorpusError(f"{len(chars)} chars but {len(labels)} labels")
        object.__setattr__(self, "chars", chars)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return len(self.chars)


def split_label(label: str) -> tuple[str, str | None]:
    """Split ``B-LOC`` into ``("B", "LOC")``; ``O`` gives ``("O", None)``."""
    if label == "O":
        return "O", None
    prefix, sep, etype = label.partition("-")
    if not sep or prefix not in ("B", "I") or not etype:
        raise CorpusError(f"malformed BIO label {label!r}")
    return prefix, etype


class LabelSet:
    """Ordered label inventory with a label <-> [0, k) bijection."""

    def __init__(self, labels: Sequence[str] = DEFAULT_LABELS):
        labels = tuple(labels)
        if len(set(labels)) != len(labels):
            raise ValueError("duplicate labels")
        if not labels:
            raise ValueError("empty label set")
        for label in labels:
            split_label(label)
        self.labels = labels
        self.index = {label: i for i, label in enumerate(labels)}

    def __len__(self) -> int:
        return len(self.labels)

    def __contains__(self, label: object) -> bool:
        return label in self.index

    def __eq__(self, other: object) -> bool:
        return isinstance(other, LabelSet) and self.labels == other.labels

    def __hash__(self) -> int:
        return hash(self.labels)

    def __repr__(self) -> str:
        return f"LabelSet({list(self.labels)!r})"

    def id_of(self, label: str) -> int:
        return self.index[label]

    def label_of(self, idx: int) -> str:
        return self.labels[idx]

    @property
    def entity_types(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for label in self.labels:
            etype = split_label(label)[1]
            if etype is not None:
                seen.setdefault(etype)
        return tuple(seen)


class Vocabulary:
    """Character ids; 0 is PAD, 1 is UNK, corpus characters start at 2."""

    PAD = "<PAD>"
    UNK = "<UNK>"

    def __init__(self, chars: Sequence[str] = (), min_count: int = 1):
        self.chars = tuple(chars)
        self.min_count = min_count
        self.index = {ch: i + 2 for i, ch in enumerate(self.chars)}
        if len(self.index) != len(self.chars):
            raise ValueError("duplicate characters in vocabulary")

    def __len__(self) -> int:
        return len(self.chars) + 2

    def __contains__(self, ch: object) -> bool:
        return ch in self.index

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Vocabulary) and self.chars == other.chars

    def id_of(self, ch: str) -> int:
        return self.index.get(ch, UNK_ID)

    def char_of(self, idx: int) -> str:
        if idx == PAD_ID:
            return self.PAD
        if idx == UNK_ID:
            return self.UNK
        return self.chars[idx - 2]


@dataclass(frozen=True)
class EncodedBatch:
    char_ids: np.ndarray  # (batch, max_len) int
    label_ids: np.ndarray  # (batch, max_len) int, 0 past each length
    lengths: np.ndarray  # (batch,) int

    def __len__(self) -> int:
        return len(self.lengths)

    @property
    def mask(self) -> np.ndarray:
        width = self.char_ids.shape[1]
        return np.arange(width)[None, :] < self.lengths[:, None]


def _split_fields(line: str) -> list[str]:
    if "\t" in line:
        return line.split("\t")
    return line.split(" ")


def parse_bio(
    source: Union[str, bytes, TextIO],
    label_set: LabelSet | None = None,
) -> list[LabeledSentence]:
    """Parse a BIO column corpus into sentences.

    ``source`` may be text, UTF-8 bytes or an open text stream. Every label
    must belong to ``label_set`` (the default 11-label inventory if omitted).
    Raises :class:`CorpusError` with the offending line number.
    """
    label_set = label_set or LabelSet()
    if isinstance(source, bytes):
        try:
            source = source.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CorpusError(f"input is not valid UTF-8: {exc}") from exc
    stream = io.StringIO(source) if isinstance(source, str) else source

    sentences: list[LabeledSentence] = []
    chars: list[str] = []
    labels: list[str] = []
    for lineno, raw in enumerate(stream, 1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            if chars:
                sentences.append(LabeledSentence(chars, labels))
                chars, labels = [], []
            continue
        if line.startswith("#"):
            continue
        fields = _split_fields(line)
        if len(fields) != 2:
            raise CorpusError(
                f"expected '<char> <label>', got {len(fields)} fields: {line!r}", lineno
            )
        ch, label = fields
        if len(ch) != 1:
            raise CorpusError(f"token {ch!r} is not a single character", lineno)
        if label not in label_set:
            raise CorpusError(f"unknown label {label!r}", lineno)
        chars.append(ch)
        labels.append(label)
    if chars:
        sentences.append(LabeledSentence(chars, labels))
    return sentences


def read_bio(path, label_set: LabelSet | None = None) -> list[LabeledSentence]:
    with open(path, "rb") as f:
        data = f.read()
    return parse_bio(data, label_set)


def serialize_bio(sentences: Iterable[LabeledSentence], sep: str = "\t") -> str:
    blocks = []
    for sent in sentences:
        blocks.append("".join(f"{c}{sep}{l}\n" for c, l in zip(sent.chars, sent.labels)))
    return "\n".join(blocks)


def write_bio(path, sentences: Iterable[LabeledSentence]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(serialize_bio(sentences))


def validate_bio(labels: Sequence[str]) -> list[int]:
    """Positions holding an ``I-X`` not preceded by ``B-X`` or ``I-X``."""
    violations = []
    prev_type = None
    for i, label in enumerate(labels):
        prefix, etype = split_label(label)
        if prefix == "I" and prev_type != etype:
            violations.append(i)
        prev_type = etype
    return violations


def build_vocab(sentences: Iterable, min_count: int = 1) -> Vocabulary:
    """Assign ids (from 2, by first occurrence) to characters seen ``min_count`` times.

    ``sentences`` holds :class:`LabeledSentence` objects or plain character
    sequences.
    """
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    counts: Counter[str] = Counter()
    order: dict[str, None] = {}
    for sent in sentences:
        chars = sent.chars if isinstance(sent, LabeledSentence) else sent
        for ch in chars:
            counts[ch] += 1
            order.setdefault(ch)
    if not counts:
        raise CorpusError("cannot build a vocabulary from an empty corpus")
    return Vocabulary([ch for ch in order if counts[ch] >= min_count], min_count)


def encode_chars(
    char_seqs: Sequence[Sequence[str]], vocab: Vocabulary, max_len: int
) -> tuple[np.ndarray, np.ndarray]:
    """Char ids and lengths for unlabeled sequences, truncating at ``max_len``."""
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    char_ids = np.full((len(char_seqs), max_len), PAD_ID, dtype=np.int64)
    lengths = np.zeros(len(char_seqs), dtype=np.int64)
    for row, chars in enumerate(char_seqs):
        chars = chars[:max_len]
        lengths[row] = len(chars)
        char_ids[row, : len(chars)] = [vocab.id_of(ch) for ch in chars]
    return char_ids, lengths


def encode(
    sentences: Sequence[LabeledSentence],
    vocab: Vocabulary,
    label_set: LabelSet,
    max_len: int = 300,
) -> EncodedBatch:
    char_ids, lengths = encode_chars([s.chars for s in sentences], vocab, max_len)
    label_ids = np.zeros_like(char_ids)
    for row, sent in enumerate(sentences):
        n = lengths[row]
        label_ids[row, :n] = [label_set.id_of(l) for l in sent.labels[:n]]
    return EncodedBatch(char_ids, label_ids, lengths)


def decode(batch: EncodedBatch, vocab: Vocabulary, label_set: LabelSet) -> list[LabeledSentence]:
    """Inverse of :func:`encode` for in-vocabulary, untruncated sentences."""
    out = []
    for row, n in enumerate(batch.lengths):
        chars = [vocab.char_of(int(i)) for i in batch.char_ids[row, :n]]
        labels = [label_set.label_of(int(i)) for i in batch.label_ids[row, :n]]
        out.append(LabeledSentence(chars, labels))
    return out
