"""Checkpoint container, embedding warm-start after vocabulary expansion, and
embedding export.

The on-disk format is a self-describing binary container: a JSON metadata
block (config, vocabulary digest, step count, optimizer name) followed by
named tensors stored as row-major little-endian float64.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ParseError, ValidationError
from ..tokenizer import UNK, Vocabulary, wordpiece
from .config import ModelConfig
from .model import init_params

_MAGIC = b"PHTCKPT1"


@dataclass
class Checkpoint:
    """Named parameter tensors plus training metadata."""

    params: dict[str, np.ndarray]
    config: ModelConfig
    vocab_digest: str = ""
    step: int = 0
    optimizer: str = "adam"

    def copy(self) -> "Checkpoint":
        return Checkpoint(
            params={k: v.copy() for k, v in self.params.items()},
            config=self.config,
            vocab_digest=self.vocab_digest,
            step=self.step,
            optimizer=self.optimizer,
        )

    def validate_finite(self) -> None:
        for name, tensor in self.params.items():
            if not np.isfinite(tensor).all():
                raise ValidationError(f"tensor {name!r} contains non-finite values")


def init_model(config: ModelConfig, vocab: Vocabulary | None = None) -> Checkpoint:
    """Deterministically initialize a fresh model for the given config."""
    if vocab is not None and len(vocab) != config.vocab_size:
        raise ValidationError(
            f"config.vocab_size {config.vocab_size} != vocabulary size {len(vocab)}"
        )
    params = init_params(config)
    return Checkpoint(
        params=params,
        config=config,
        vocab_digest=vocab.digest() if vocab is not None else "",
    )


def save_checkpoint(ckpt: Checkpoint, path: str | Path) -> None:
    meta = {
        "config": ckpt.config.to_dict(),
        "vocab_digest": ckpt.vocab_digest,
        "step": ckpt.step,
        "optimizer": ckpt.optimizer,
    }
    meta_bytes = json.dumps(meta, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(meta_bytes)))
        fh.write(meta_bytes)
        fh.write(struct.pack("<I", len(ckpt.params)))
        for name in sorted(ckpt.params):
            arr = np.ascontiguousarray(ckpt.params[name], dtype="<f8")
            name_b = name.encode("utf-8")
            fh.write(struct.pack("<H", len(name_b)))
            fh.write(name_b)
            fh.write(struct.pack("<B", arr.ndim))
            for dim in arr.shape:
                fh.write(struct.pack("<Q", dim))
            fh.write(arr.tobytes(order="C"))


def load_checkpoint(path: str | Path) -> Checkpoint:
    with open(path, "rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise ParseError(f"{path}: not a checkpoint file")
        (meta_len,) = struct.unpack("<I", fh.read(4))
        meta = json.loads(fh.read(meta_len).decode("utf-8"))
        (n_tensors,) = struct.unpack("<I", fh.read(4))
        params: dict[str, np.ndarray] = {}
        for _ in range(n_tensors):
            (name_len,) = struct.unpack("<H", fh.read(2))
            name = fh.read(name_len).decode("utf-8")
            (ndim,) = struct.unpack("<B", fh.read(1))
            shape = tuple(
                struct.unpack("<Q", fh.read(8))[0] for _ in range(ndim)
            )
            count = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(fh.read(count * 8), dtype="<f8").astype(np.float64)
            params[name] = data.reshape(shape)
    ckpt = Checkpoint(
        params=params,
        config=ModelConfig.from_dict(meta["config"]),
        vocab_digest=meta["vocab_digest"],
        step=meta["step"],
        optimizer=meta.get("optimizer", "adam"),
    )
    ckpt.validate_finite()
    return ckpt


RESIZE_POLICIES = ("subword-mean", "keep-slot-row", "random")


def resize_for_vocab(
    ckpt: Checkpoint,
    old_vocab: Vocabulary,
    new_vocab: Vocabulary,
    init_policy: str = "subword-mean",
) -> Checkpoint:
    """Re-initialize embedding rows of slots rewritten by a vocabulary expansion.

    The two vocabularies must have equal size (slot replacement, never
    append). Under the default "subword-mean" policy each rewritten slot gets
    the arithmetic mean of the embeddings of the new word's wordpiece
    decomposition under the old vocabulary, falling back to a seeded random
    row when the decomposition is [UNK]. Every other tensor element is copied
    unchanged.
    """
    if init_policy not in RESIZE_POLICIES:
        raise ValidationError(
            f"unknown init policy {init_policy!r}; choose from {RESIZE_POLICIES}"
        )
    if len(old_vocab) != len(new_vocab):
        raise ValidationError(
            f"vocabulary sizes differ ({len(old_vocab)} vs {len(new_vocab)}); "
            "only slot replacement is supported"
        )
    if ckpt.vocab_digest and ckpt.vocab_digest != old_vocab.digest():
        raise ValidationError("checkpoint was not trained with old_vocab")
    old_placeholders = set(old_vocab.placeholder_ids)
    changed = [
        i for i, (a, b) in enumerate(zip(old_vocab.tokens, new_vocab.tokens)) if a != b
    ]
    for i in changed:
        if i not in old_placeholders:
            raise ValidationError(
                f"token id {i} changed from {old_vocab.tokens[i]!r} to "
                f"{new_vocab.tokens[i]!r} but was not a placeholder slot"
            )
    out = ckpt.copy()
    out.vocab_digest = new_vocab.digest()
    emb = out.params["tok_emb"]
    for i in changed:
        if init_policy == "keep-slot-row":
            continue
        word = new_vocab.tokens[i]
        row = None
        if init_policy == "subword-mean":
            pieces = wordpiece(word, old_vocab)
            if pieces != [UNK]:
                rows = emb[[old_vocab.id_of(p) for p in pieces]]
                row = rows.mean(axis=0)
        if row is None:  # "random" policy, or [UNK] fallback under subword-mean
            rng = np.random.default_rng([ckpt.config.seed, i])
            row = rng.normal(0.0, 0.02, emb.shape[1])
        emb[i] = row
    return out


def export_embeddings(
    ckpt: Checkpoint, vocab: Vocabulary, tokens: list[str]
) -> tuple[np.ndarray, list[str]]:
    """Embedding rows for the given tokens, in input order.

    Whole-word vocabulary members yield their embedding row; anything else
    yields the mean of its wordpiece rows ([UNK]'s row if the decomposition
    fails).
    """
    emb = ckpt.params["tok_emb"]
    rows = []
    for token in tokens:
        word = token.lower()
        if word in vocab:
            rows.append(emb[vocab.id_of(word)])
        else:
            pieces = wordpiece(word, vocab)
            rows.append(emb[[vocab.id_of(p) for p in pieces]].mean(axis=0))
    if not rows:
        return np.zeros((0, emb.shape[1])), []
    return np.stack(rows), list(tokens)
