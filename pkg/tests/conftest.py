import pytest

from phenotag.basevocab import default_vocabulary
from phenotag.corpus import Document, EntitySpan, split_sentences
from phenotag.synthesis import generate_synthetic
from phenotag.tokenizer import SPECIAL_TOKENS, Vocabulary


@pytest.fixture(scope="session")
def base_vocab():
    return default_vocabulary()


@pytest.fixture(scope="session")
def corpus200():
    return generate_synthetic(seed=1, n_docs=200)


def make_vocab(*tokens: str, placeholders: int = 0) -> Vocabulary:
    """Small hand-rolled vocabulary: specials, then the given tokens."""
    extra = tuple(f"[unused{i}]" for i in range(placeholders))
    return Vocabulary(SPECIAL_TOKENS + extra + tuple(tokens))


def explode_sentences(docs, limit=None):
    """One document per sentence, entities shifted to sentence coordinates."""
    out = []
    for doc in docs:
        for sent, off in split_sentences(doc.text):
            ents = [
                EntitySpan(e.start_char - off, e.end_char - off, e.label)
                for e in doc.entities
                if off <= e.start_char and e.end_char <= off + len(sent)
            ]
            out.append(Document(f"sent-{len(out):04d}", sent, ents))
            if limit is not None and len(out) >= limit:
                return out
    return out
