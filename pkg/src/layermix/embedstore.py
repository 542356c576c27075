"""Multi-layer embedding files (MLEB), CoNLL corpora, and their alignment.

MLEB layout (all integers little-endian):

    bytes 0-3   magic "MLEB"
    u32         version (currently 1)
    u32         L, number of layers
    u32         D, vector dimension
    u64         sentence count
    per sentence:
        u32           token count n
        n times       u16 byte length + UTF-8 token bytes
        L*n*D f32     values, layer-major, then token, then dimension

The float payload is float32 so a write/read cycle is bitwise exact.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger("layermix.embedstore")

MAGIC = b"MLEB"
VERSION = 1
HEADER = struct.Struct("<4sIIIQ")

BIO = "BIO"
PLAIN = "PLAIN"


class MlebError(Exception):
    """Malformed MLEB file; ``offset`` is the byte position of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


class BadMagicError(MlebError):
    pass


class UnsupportedVersionError(MlebError):
    pass


class TruncatedError(MlebError):
    def __init__(self, offset: int, expected: int, actual: int):
        super().__init__(f"truncated file: expected {expected} bytes, have {actual}", offset)
        self.expected = expected
        self.actual = actual


class NonFiniteError(MlebError):
    pass


class ConllParseError(Exception):
    """Malformed CoNLL line; ``line`` is the 1-based line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class AlignError(Exception):
    """Embeddings and labels disagree; ``sentence`` is the first bad index."""

    def __init__(self, message: str, sentence: int):
        super().__init__(f"sentence {sentence}: {message}")
        self.sentence = sentence


@dataclass
class SentenceEmbedding:
    """One sentence: token strings plus an (L, n_tokens, D) float32 stack."""

    tokens: list[str]
    layers: np.ndarray

    def validate(self) -> None:
        if self.layers.ndim != 3:
            raise ValueError(f"layers must be 3-d (L, n, D), got shape {self.layers.shape}")
        if self.layers.shape[1] != len(self.tokens):
            raise ValueError(
                f"layer token axis {self.layers.shape[1]} != token count {len(self.tokens)}"
            )
        if not np.all(np.isfinite(self.layers)):
            raise ValueError("non-finite value in embedding layers")

    def __eq__(self, other) -> bool:
        if not isinstance(other, SentenceEmbedding):
            return NotImplemented
        return (
            self.tokens == other.tokens
            and self.layers.dtype == other.layers.dtype
            and self.layers.shape == other.layers.shape
            and np.array_equal(self.layers, other.layers)
        )


@dataclass
class EmbeddingDataset:
    num_layers: int
    dim: int
    sentences: list[SentenceEmbedding] = field(default_factory=list)

    def validate(self) -> None:
        if self.num_layers < 1 or self.dim < 1:
            raise ValueError("num_layers and dim must be >= 1")
        for i, sent in enumerate(self.sentences):
            sent.validate()
            if sent.layers.shape[0] != self.num_layers or sent.layers.shape[2] != self.dim:
                raise ValueError(
                    f"sentence {i}: layer shape {sent.layers.shape} does not match "
                    f"(L={self.num_layers}, D={self.dim})"
                )

    @property
    def num_tokens(self) -> int:
        return sum(len(s.tokens) for s in self.sentences)

    def __eq__(self, other) -> bool:
        if not isinstance(other, EmbeddingDataset):
            return NotImplemented
        return (
            self.num_layers == other.num_layers
            and self.dim == other.dim
            and self.sentences == other.sentences
        )


@dataclass
class LabeledCorpus:
    sentences: list[tuple[list[str], list[str]]]
    tagset: list[str]
    scheme: str = PLAIN

    @property
    def num_tokens(self) -> int:
        return sum(len(tokens) for tokens, _ in self.sentences)


@dataclass
class AlignedDataset:
    """Pairs of (sentence embedding, int tag index array); tagset gives the mapping."""

    pairs: list[tuple[SentenceEmbedding, np.ndarray]]
    tagset: list[str]

    def __len__(self) -> int:
        return len(self.pairs)


def write_embeddings(dataset: EmbeddingDataset, path) -> None:
    """Write ``dataset`` in MLEB format; byte-for-byte deterministic."""
    dataset.validate()
    chunks = [HEADER.pack(MAGIC, VERSION, dataset.num_layers, dataset.dim, len(dataset.sentences))]
    for sent in dataset.sentences:
        chunks.append(struct.pack("<I", len(sent.tokens)))
        for token in sent.tokens:
            raw = token.encode("utf-8")
            if len(raw) > 0xFFFF:
                raise ValueError(f"token longer than 65535 bytes: {token[:32]!r}...")
            chunks.append(struct.pack("<H", len(raw)))
            chunks.append(raw)
        chunks.append(np.ascontiguousarray(sent.layers, dtype="<f4").tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(chunks))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, count: int) -> bytes:
        if self.pos + count > len(self.data):
            raise TruncatedError(self.pos, expected=count, actual=len(self.data) - self.pos)
        chunk = self.data[self.pos : self.pos + count]
        self.pos += count
        return chunk

    def u16(self) -> int:
        return struct.unpack("<H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]


def load_embeddings(path) -> EmbeddingDataset:
    """Read an MLEB file, rejecting malformed content with a located error."""
    with open(path, "rb") as fh:
        data = fh.read()
    reader = _Reader(data)
    magic = reader.take(4)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}, expected {MAGIC!r}", offset=0)
    version = reader.u32()
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported version {version}", offset=4)
    num_layers = reader.u32()
    dim = reader.u32()
    (num_sentences,) = struct.unpack("<Q", reader.take(8))
    if num_layers < 1 or dim < 1:
        raise MlebError(f"invalid header: L={num_layers}, D={dim}", offset=8)

    sentences = []
    for _ in range(num_sentences):
        n_tokens = reader.u32()
        tokens = []
        for _ in range(n_tokens):
            length = reader.u16()
            tokens.append(reader.take(length).decode("utf-8"))
        payload_offset = reader.pos
        count = num_layers * n_tokens * dim
        payload = reader.take(4 * count)
        values = np.frombuffer(payload, dtype="<f4", count=count)
        finite = np.isfinite(values)
        if not finite.all():
            bad = int(np.argmin(finite))
            raise NonFiniteError(
                f"non-finite float32 value at payload index {bad}",
                offset=payload_offset + 4 * bad,
            )
        layers = values.reshape(num_layers, n_tokens, dim).copy()
        sentences.append(SentenceEmbedding(tokens=tokens, layers=layers))
    if reader.pos != len(data):
        raise MlebError(f"{len(data) - reader.pos} trailing bytes after payload", offset=reader.pos)
    return EmbeddingDataset(num_layers=num_layers, dim=dim, sentences=sentences)


def _check_bio_tag(tag: str, line_no: int) -> None:
    if tag == "O":
        return
    if (tag.startswith("B-") or tag.startswith("I-")) and len(tag) > 2:
        return
    raise ConllParseError(f"tag {tag!r} is not valid under the BIO scheme", line_no)


def load_conll(path, scheme: str = PLAIN) -> LabeledCorpus:
    """Parse "token<TAB>tag" lines, one sentence per blank-line-separated block.

    Under BIO, an I-X with no open X chunk is repaired to B-X with a warning,
    mirroring how such glitches are conventionally tolerated in shared-task data.
    """
    if scheme not in (BIO, PLAIN):
        raise ValueError(f"unknown scheme {scheme!r}")
    sentences: list[tuple[list[str], list[str]]] = []
    tagset: list[str] = []
    seen: set[str] = set()
    tokens: list[str] = []
    tags: list[str] = []

    def flush() -> None:
        if tokens:
            sentences.append((list(tokens), list(tags)))
            tokens.clear()
            tags.clear()

    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip():
                flush()
                continue
            fields = line.split("\t")
            if len(fields) != 2 or not fields[0] or not fields[1]:
                raise ConllParseError(
                    f"expected 'token<TAB>tag', got {len(fields)} field(s)", line_no
                )
            token, tag = fields
            if scheme == BIO:
                _check_bio_tag(tag, line_no)
                if tag.startswith("I-"):
                    prev = tags[-1] if tags else "O"
                    if prev != "B-" + tag[2:] and prev != tag:
                        logger.warning(
                            "%s:%d: %r does not continue a %r chunk; repaired to %r",
                            path,
                            line_no,
                            tag,
                            tag[2:],
                            "B-" + tag[2:],
                        )
                        tag = "B-" + tag[2:]
            tokens.append(token)
            tags.append(tag)
            if tag not in seen:
                seen.add(tag)
                tagset.append(tag)
    flush()
    return LabeledCorpus(sentences=sentences, tagset=tagset, scheme=scheme)


def write_conll(corpus: LabeledCorpus, path) -> None:
    """Inverse of :func:`load_conll`: token<TAB>tag lines, blank line between sentences."""
    with open(path, "w", encoding="utf-8") as fh:
        for tokens, tags in corpus.sentences:
            for token, tag in zip(tokens, tags):
                fh.write(f"{token}\t{tag}\n")
            fh.write("\n")


def align(
    embeddings: EmbeddingDataset,
    corpus: LabeledCorpus,
    tagset: list[str] | None = None,
) -> AlignedDataset:
    """Pair embeddings with tag index sequences.

    Counts must match exactly; token strings are compared only to warn (other
    tokenizers may normalize differently).  ``tagset`` overrides the corpus
    tagset when several splits must share one index mapping; it must cover
    every tag in the corpus.
    """
    if len(embeddings.sentences) != len(corpus.sentences):
        raise AlignError(
            f"sentence count mismatch: {len(embeddings.sentences)} embeddings vs "
            f"{len(corpus.sentences)} labeled",
            sentence=min(len(embeddings.sentences), len(corpus.sentences)),
        )
    tagset = list(tagset) if tagset is not None else list(corpus.tagset)
    index = {tag: i for i, tag in enumerate(tagset)}
    pairs = []
    for i, (sent, (tokens, tags)) in enumerate(zip(embeddings.sentences, corpus.sentences)):
        if len(sent.tokens) != len(tags):
            raise AlignError(
                f"token count mismatch: {len(sent.tokens)} embedded vs {len(tags)} labeled",
                sentence=i,
            )
        if sent.tokens != tokens:
            logger.warning("sentence %d: token strings differ between embeddings and labels", i)
        try:
            tag_ids = np.array([index[t] for t in tags], dtype=np.int64)
        except KeyError as exc:
            raise AlignError(f"tag {exc.args[0]!r} missing from tagset", sentence=i) from None
        pairs.append((sent, tag_ids))
    return AlignedDataset(pairs=pairs, tagset=tagset)
