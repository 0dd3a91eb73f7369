"""Annotated-document data model, BIO codec, corpus statistics, and agreement.

Documents carry character-offset standoff annotations over eight phenotype
labels. The BIO codec aligns those annotations with a subword tokenization
(labels live on word-initial pieces; continuations and special tokens are
ignored) and decodes tag sequences back into character spans.
"""

from __future__ import annotations

import json
import logging
import random
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .errors import ConfigurationError, ParseError, ValidationError
from .tokenizer import TokenizedText, basic_tokenize

logger = logging.getLogger(__name__)


class EntityLabel(str, Enum):
    """The eight phenotype categories annotated in this corpus."""

    HORMONE_RECEPTOR_TYPE = "HormoneReceptorType"
    HORMONE_RECEPTOR_STATUS = "HormoneReceptorStatus"
    TUMOR_SIZE = "TumorSize"
    TUMOR_SITE = "TumorSite"
    CANCER_GRADE = "CancerGrade"
    HISTOLOGICAL_TYPE = "HistologicalType"
    CANCER_LATERALITY = "CancerLaterality"
    CANCER_STAGE = "CancerStage"

    def __str__(self) -> str:  # serialized name is the stable string
        return self.value


LABELS: tuple[EntityLabel, ...] = tuple(EntityLabel)

OUTSIDE_TAG = "O"
IGNORE_TAG = "IGNORE"
IGNORE_ID = -1

#: The 17 trainable tags: O plus B-/I- per label, in declaration order.
TAGS: tuple[str, ...] = (OUTSIDE_TAG,) + tuple(
    f"{prefix}-{label.value}" for label in LABELS for prefix in ("B", "I")
)
TAG_TO_ID: dict[str, int] = {t: i for i, t in enumerate(TAGS)}
N_TAGS = len(TAGS)


@dataclass(frozen=True, order=True)
class EntitySpan:
    """A character-offset annotation: [start_char, end_char) with a label."""

    start_char: int
    end_char: int
    label: EntityLabel

    def overlaps(self, other: "EntitySpan") -> bool:
        return self.start_char < other.end_char and other.start_char < self.end_char


@dataclass
class Document:
    """Raw text plus its entity annotations, sorted by start offset."""

    doc_id: str
    text: str
    entities: list[EntitySpan] = field(default_factory=list)

    def __post_init__(self) -> None:
        seen: set[tuple[int, int, EntityLabel]] = set()
        for span in self.entities:
            if not (0 <= span.start_char < span.end_char <= len(self.text)):
                raise ValidationError(
                    f"doc {self.doc_id!r}: span ({span.start_char}, "
                    f"{span.end_char}) out of bounds for text of length "
                    f"{len(self.text)}"
                )
            key = (span.start_char, span.end_char, span.label)
            if key in seen:
                raise ValidationError(
                    f"doc {self.doc_id!r}: duplicate span {key}"
                )
            seen.add(key)
        self.entities.sort(key=lambda s: (s.start_char, s.end_char, s.label.value))

    def span_text(self, span: EntitySpan) -> str:
        return self.text[span.start_char : span.end_char]


def load_corpus(path: str | Path) -> list[Document]:
    """Read a line-delimited corpus file: one JSON document record per line.

    Raises:
        ParseError: malformed JSON or missing fields, naming the line number.
        ValidationError: a span that does not fit its text, naming the doc_id.
    """
    docs: list[Document] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                doc_id = rec["doc_id"]
                text = rec["text"]
                spans = [
                    EntitySpan(int(e["start"]), int(e["end"]), EntityLabel(e["label"]))
                    for e in rec.get("entities", [])
                ]
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"{path}: line {lineno}: {exc}") from exc
            docs.append(Document(doc_id, text, spans))
    return docs


def save_corpus(corpus: Iterable[Document], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in corpus:
            rec = {
                "doc_id": doc.doc_id,
                "text": doc.text,
                "entities": [
                    {"start": s.start_char, "end": s.end_char, "label": s.label.value}
                    for s in doc.entities
                ],
            }
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def split_sentences(text: str) -> list[tuple[str, int]]:
    """Split on newlines and on periods followed by whitespace.

    Returns (sentence, start_offset) pairs; sentences are stripped but
    offsets point at the first retained character in the original text.
    """
    sentences: list[tuple[str, int]] = []

    def emit(segment: str, seg_start: int) -> None:
        stripped = segment.strip()
        if stripped:
            lead = len(segment) - len(segment.lstrip())
            sentences.append((stripped, seg_start + lead))

    start = 0
    n = len(text)
    for i, ch in enumerate(text):
        if ch == "\n":
            emit(text[start:i], start)
            start = i + 1
        elif ch == "." and i + 1 < n and text[i + 1].isspace():
            emit(text[start : i + 1], start)
            start = i + 1
    emit(text[start:], start)
    return sentences


@dataclass(frozen=True)
class LabelStats:
    total_mentions: int
    unique_forms: int


@dataclass(frozen=True)
class CorpusStats:
    n_documents: int
    n_sentences: int
    n_tokens: int
    per_label: dict[EntityLabel, LabelStats]


def corpus_stats(
    corpus: Sequence[Document],
    sentence_splitter: Callable[[str], list[tuple[str, int]]] = split_sentences,
) -> CorpusStats:
    """Count documents, sentences, word-level tokens, and entity mentions.

    Unique surface forms are computed on lowercased entity text.
    """
    n_sentences = 0
    n_tokens = 0
    totals: Counter[EntityLabel] = Counter()
    forms: dict[EntityLabel, set[str]] = {label: set() for label in LABELS}
    for doc in corpus:
        n_sentences += len(sentence_splitter(doc.text))
        n_tokens += len(basic_tokenize(doc.text))
        for span in doc.entities:
            totals[span.label] += 1
            forms[span.label].add(doc.span_text(span).lower())
    per_label = {
        label: LabelStats(totals[label], len(forms[label])) for label in LABELS
    }
    return CorpusStats(len(corpus), n_sentences, n_tokens, per_label)


def format_stats(stats: CorpusStats) -> str:
    lines = [
        f"documents\t{stats.n_documents}",
        f"sentences\t{stats.n_sentences}",
        f"tokens\t{stats.n_tokens}",
        "label\ttotal_mentions\tunique_forms",
    ]
    for label in LABELS:
        ls = stats.per_label[label]
        lines.append(f"{label.value}\t{ls.total_mentions}\t{ls.unique_forms}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class TagSequence:
    """One tag per tokenized piece; IGNORE marks positions excluded from loss."""

    tags: tuple[str, ...]

    def __post_init__(self) -> None:
        for tag in self.tags:
            if tag != IGNORE_TAG and tag not in TAG_TO_ID:
                raise ValidationError(f"unknown tag {tag!r}")

    def __len__(self) -> int:
        return len(self.tags)

    def __iter__(self):
        return iter(self.tags)


def encode_bio(
    tokenized: TokenizedText,
    entities: Sequence[EntitySpan],
    policy: str = "expand",
) -> TagSequence:
    """Align entity spans to a tokenization as BIO tags over pieces.

    The first subword of an entity's first word gets B-label, first subwords
    of its remaining words get I-label; continuation subwords and special
    tokens get IGNORE; every other word-initial subword gets O.

    An entity boundary falling strictly inside a word is resolved per
    ``policy``: "expand" widens the span to the enclosing word(s) and logs a
    warning; "strict" raises ValidationError.
    """
    if policy not in ("expand", "strict"):
        raise ConfigurationError(f"unknown alignment policy {policy!r}")
    ranges = tokenized.word_ranges()
    word_tags: dict[int, str] = {}
    for span in sorted(entities, key=lambda s: (s.start_char, s.end_char)):
        words = [
            w
            for w, (ws, we) in ranges.items()
            if ws < span.end_char and span.start_char < we
        ]
        if not words:
            logger.warning(
                "entity (%d, %d, %s) covers no token; skipped",
                span.start_char, span.end_char, span.label.value,
            )
            continue
        words.sort()
        first, last = words[0], words[-1]
        if span.start_char > ranges[first][0] or span.end_char < ranges[last][1]:
            if policy == "strict":
                raise ValidationError(
                    f"entity ({span.start_char}, {span.end_char}, "
                    f"{span.label.value}) splits a word"
                )
            logger.warning(
                "entity (%d, %d, %s) splits a word; expanded to (%d, %d)",
                span.start_char, span.end_char, span.label.value,
                ranges[first][0], ranges[last][1],
            )
        if any(w in word_tags for w in words):
            logger.warning(
                "entity (%d, %d, %s) overlaps an earlier entity; skipped",
                span.start_char, span.end_char, span.label.value,
            )
            continue
        word_tags[first] = f"B-{span.label.value}"
        for w in words[1:]:
            word_tags[w] = f"I-{span.label.value}"
    tags = []
    for i in range(len(tokenized)):
        if tokenized.is_special(i) or tokenized.is_continuation[i]:
            tags.append(IGNORE_TAG)
        else:
            tags.append(word_tags.get(tokenized.word_index[i], OUTSIDE_TAG))
    return TagSequence(tuple(tags))


def decode_bio(
    tags: TagSequence | Sequence[str],
    tokenized: TokenizedText,
    strict: bool = False,
) -> list[EntitySpan]:
    """Turn a tag sequence back into character spans.

    Maximal runs of B-X (I-X)* over word-initial positions become one span
    covering [start of first word, end of last word]. An orphan I-X (no open
    run of the same label) is repaired to B-X, or rejected when ``strict``.
    """
    tag_list = list(tags)
    if len(tag_list) != len(tokenized):
        raise ValidationError(
            f"tag count {len(tag_list)} does not match piece count {len(tokenized)}"
        )
    ranges = tokenized.word_ranges()
    spans: list[EntitySpan] = []
    open_label: EntityLabel | None = None
    open_start = 0
    open_end = 0

    def close() -> None:
        nonlocal open_label
        if open_label is not None:
            spans.append(EntitySpan(open_start, open_end, open_label))
            open_label = None

    for i, tag in enumerate(tag_list):
        if tokenized.is_special(i) or tokenized.is_continuation[i]:
            continue
        w = tokenized.word_index[i]
        ws, we = ranges[w]
        if tag == IGNORE_TAG or tag == OUTSIDE_TAG:
            close()
            continue
        prefix, _, name = tag.partition("-")
        label = EntityLabel(name)
        if prefix == "B":
            close()
            open_label, open_start, open_end = label, ws, we
        elif prefix == "I":
            if open_label == label:
                open_end = we
            else:
                if strict:
                    raise ValidationError(f"orphan tag {tag!r} at piece {i}")
                close()
                open_label, open_start, open_end = label, ws, we
        else:
            raise ValidationError(f"unknown tag {tag!r}")
    close()
    spans.sort(key=lambda s: (s.start_char, s.end_char, s.label.value))
    return spans


def word_level_tags(
    words: Sequence[tuple[str, int, int]], entities: Sequence[EntitySpan]
) -> list[str]:
    """BIO tags over whole words (used for CoNLL export and token labels)."""
    tags = [OUTSIDE_TAG] * len(words)
    for span in sorted(entities, key=lambda s: (s.start_char, s.end_char)):
        hit = [
            i
            for i, (_, ws, we) in enumerate(words)
            if ws < span.end_char and span.start_char < we
        ]
        if not hit or any(tags[i] != OUTSIDE_TAG for i in hit):
            continue
        tags[hit[0]] = f"B-{span.label.value}"
        for i in hit[1:]:
            tags[i] = f"I-{span.label.value}"
    return tags


def export_conll(corpus: Sequence[Document]) -> str:
    """CoNLL-style export: token TAB tag, blank line between sentences."""
    blocks: list[str] = []
    for doc in corpus:
        for sent, off in split_sentences(doc.text):
            words = [(w, s + off, e + off) for w, s, e in basic_tokenize(sent)]
            tags = word_level_tags(words, doc.entities)
            lines = [f"{w}\t{t}" for (w, _, _), t in zip(words, tags)]
            blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"


def token_labels(doc: Document) -> list[str]:
    """Word-level label (entity name or O) per token of the document."""
    words = basic_tokenize(doc.text)
    tags = word_level_tags(words, doc.entities)
    return [t.partition("-")[2] if t != OUTSIDE_TAG else OUTSIDE_TAG for t in tags]


def cohen_kappa(labels_a: Sequence[str], labels_b: Sequence[str]) -> float:
    """Chance-corrected agreement between two annotators' label sequences.

    kappa = (p_o - p_e) / (1 - p_e); returns exactly 1.0 when both observed
    and expected agreement are 1 (two identical constant annotations).
    """
    if len(labels_a) != len(labels_b):
        raise ValidationError(
            f"label sequences differ in length: {len(labels_a)} vs {len(labels_b)}"
        )
    n = len(labels_a)
    if n == 0:
        raise ValidationError("cannot compute agreement on empty sequences")
    p_o = sum(a == b for a, b in zip(labels_a, labels_b)) / n
    count_a = Counter(labels_a)
    count_b = Counter(labels_b)
    p_e = sum(count_a[c] * count_b.get(c, 0) for c in count_a) / (n * n)
    if p_e == 1.0:
        return 1.0
    return (p_o - p_e) / (1.0 - p_e)


def split_corpus(
    corpus: Sequence[Document], test_fraction: float, seed: int
) -> tuple[list[Document], list[Document]]:
    """Deterministic document-level split; |test| = round(fraction * n)."""
    if not corpus:
        raise ValidationError("cannot split an empty corpus")
    if not 0.0 < test_fraction < 1.0:
        raise ConfigurationError(
            f"test_fraction must be in (0, 1), got {test_fraction}"
        )
    n = len(corpus)
    n_test = int(round(test_fraction * n))
    rng = random.Random(seed)
    test_idx = set(rng.sample(range(n), n_test))
    train = [doc for i, doc in enumerate(corpus) if i not in test_idx]
    test = [doc for i, doc in enumerate(corpus) if i in test_idx]
    return train, test
