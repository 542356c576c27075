"""Synthetic multi-layer embedding fixtures with one informative layer.

Each tag owns a fixed prototype vector drawn from N(0, I).  On the chosen
informative layer a token's vector is its tag prototype plus N(0, sigma_signal^2)
noise; every other layer is pure N(0, sigma_noise^2) noise carrying no tag
information.  With sigma_signal well below sigma_noise this makes layer
informativeness measurable by a nearest-prototype classifier, which is the
oracle the harness experiments are checked against.

Generation is a pure function of the spec (including its seed); identical
specs produce bitwise-identical datasets and files.
"""

from __future__ import annotations

import dataclasses
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .embedstore import (
    BIO,
    PLAIN,
    EmbeddingDataset,
    LabeledCorpus,
    SentenceEmbedding,
    write_conll,
    write_embeddings,
)
from .errors import ConfigError

# BIO tag chain: P(entity start) after O, then per-position continue/stop.
_BIO_START = 0.4
_BIO_CONTINUE = 0.5
_BIO_NEW_ENTITY = 0.2


@dataclass
class SynthSpec:
    layers: int = 3
    dim: int = 16
    tags: int = 3
    n_train: int = 200
    n_dev: int = 50
    n_test: int = 50
    min_len: int = 5
    max_len: int = 10
    informative_layer: int = 1
    sigma_signal: float = 0.1
    sigma_noise: float = 1.0
    scheme: str = PLAIN
    seed: int = 0

    @classmethod
    def from_dict(cls, data: dict) -> "SynthSpec":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown fixture spec keys: {sorted(unknown)}")
        spec = cls(**data)
        spec.validate()
        return spec

    def validate(self) -> None:
        if self.layers < 1 or self.dim < 1:
            raise ConfigError("layers and dim must be >= 1")
        if self.tags < 1:
            raise ConfigError("tags must be >= 1")
        if min(self.n_train, self.n_dev, self.n_test) < 1:
            raise ConfigError("n_train, n_dev and n_test must all be >= 1")
        if not 1 <= self.min_len <= self.max_len:
            raise ConfigError(f"bad length range [{self.min_len}, {self.max_len}]")
        if not 0 <= self.informative_layer < self.layers:
            raise ConfigError(
                f"informative_layer {self.informative_layer} out of range for "
                f"layers={self.layers}"
            )
        if self.sigma_signal <= 0 or self.sigma_noise <= 0:
            raise ConfigError("sigma_signal and sigma_noise must be > 0")
        if self.scheme not in (PLAIN, BIO):
            raise ConfigError(f"scheme must be PLAIN or BIO, got {self.scheme!r}")
        if self.scheme == BIO and (self.tags < 3 or self.tags % 2 == 0):
            raise ConfigError("BIO needs an odd tag count >= 3 (O plus B/I per entity type)")


def canonical_tagset(scheme: str, tags: int) -> list[str]:
    """Tag strings in prototype order: T0..Tn for PLAIN; O, B-E0, I-E0, ... for BIO."""
    if scheme == PLAIN:
        return [f"T{i}" for i in range(tags)]
    tagset = ["O"]
    for k in range((tags - 1) // 2):
        tagset.append(f"B-E{k}")
        tagset.append(f"I-E{k}")
    return tagset


@dataclass
class SynthData:
    spec: SynthSpec
    tagset: list[str]
    prototypes: np.ndarray  # (T, D) float32, rows aligned with tagset
    embeddings: tuple[EmbeddingDataset, EmbeddingDataset, EmbeddingDataset]
    corpora: tuple[LabeledCorpus, LabeledCorpus, LabeledCorpus]


def _sample_tags_plain(n: int, tags: int, rng: np.random.Generator) -> np.ndarray:
    return rng.integers(0, tags, size=n)


def _sample_tags_bio(n: int, tags: int, rng: np.random.Generator) -> np.ndarray:
    types = (tags - 1) // 2
    ids = np.empty(n, dtype=np.int64)
    current = -1  # entity type currently open, -1 for none
    for i in range(n):
        u = rng.random()
        if current < 0:
            if u < _BIO_START:
                current = int(rng.integers(0, types))
                ids[i] = 1 + 2 * current  # B-Ek
            else:
                ids[i] = 0  # O
        else:
            if u < _BIO_CONTINUE:
                ids[i] = 2 + 2 * current  # I-Ek
            elif u < _BIO_CONTINUE + _BIO_NEW_ENTITY:
                current = int(rng.integers(0, types))
                ids[i] = 1 + 2 * current
            else:
                current = -1
                ids[i] = 0
    return ids


def _generate_split(
    spec: SynthSpec,
    count: int,
    prototypes: np.ndarray,
    rng: np.random.Generator,
    tagset: list[str],
) -> tuple[EmbeddingDataset, LabeledCorpus]:
    sentences = []
    labeled = []
    for s in range(count):
        n = int(rng.integers(spec.min_len, spec.max_len + 1))
        if spec.scheme == PLAIN:
            tag_ids = _sample_tags_plain(n, spec.tags, rng)
        else:
            tag_ids = _sample_tags_bio(n, spec.tags, rng)
        layers = np.empty((spec.layers, n, spec.dim))
        for j in range(spec.layers):
            if j == spec.informative_layer:
                layers[j] = prototypes[tag_ids] + rng.normal(0.0, spec.sigma_signal, (n, spec.dim))
            else:
                layers[j] = rng.normal(0.0, spec.sigma_noise, (n, spec.dim))
        tokens = [f"tok{s}.{i}" for i in range(n)]
        sentences.append(SentenceEmbedding(tokens=tokens, layers=layers.astype(np.float32)))
        labeled.append((tokens, [tagset[t] for t in tag_ids]))
    dataset = EmbeddingDataset(num_layers=spec.layers, dim=spec.dim, sentences=sentences)
    corpus = LabeledCorpus(sentences=labeled, tagset=list(tagset), scheme=spec.scheme)
    return dataset, corpus


def generate(spec: SynthSpec) -> SynthData:
    """Draw prototypes once, then train/dev/test splits, all from one seeded stream."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    tagset = canonical_tagset(spec.scheme, spec.tags)
    prototypes = rng.normal(0.0, 1.0, size=(len(tagset), spec.dim))
    splits = [
        _generate_split(spec, count, prototypes, rng, tagset)
        for count in (spec.n_train, spec.n_dev, spec.n_test)
    ]
    return SynthData(
        spec=spec,
        tagset=tagset,
        prototypes=prototypes.astype(np.float32),
        embeddings=tuple(s[0] for s in splits),
        corpora=tuple(s[1] for s in splits),
    )


def nearest_prototype_accuracy(
    embeddings: EmbeddingDataset,
    corpus: LabeledCorpus,
    layer: int,
    prototypes: np.ndarray,
    tagset: list[str],
) -> float:
    """Classify each token by the nearest prototype (Euclidean) on one layer.

    ``tagset`` gives the tag string for each prototype row; it may differ from
    ``corpus.tagset`` ordering (e.g. for corpora reloaded from disk).
    """
    if prototypes is None or len(prototypes) == 0:
        raise ValueError("prototypes are required for the nearest-prototype oracle")
    if not 0 <= layer < embeddings.num_layers:
        raise ValueError(f"layer {layer} out of range for L={embeddings.num_layers}")
    if len(prototypes) != len(tagset):
        raise ValueError(f"{len(prototypes)} prototypes for {len(tagset)} tags")
    if len(embeddings.sentences) != len(corpus.sentences):
        raise ValueError("embeddings and corpus have different sentence counts")
    protos = np.asarray(prototypes, dtype=np.float64)
    index = {tag: i for i, tag in enumerate(tagset)}
    correct = 0
    total = 0
    for sent, (_, tags) in zip(embeddings.sentences, corpus.sentences):
        vectors = sent.layers[layer].astype(np.float64)
        dists = ((vectors[:, None, :] - protos[None, :, :]) ** 2).sum(axis=2)
        predicted = np.argmin(dists, axis=1)
        gold = np.array([index[t] for t in tags])
        correct += int((predicted == gold).sum())
        total += len(tags)
    return correct / total if total else 0.0


def write_prototypes(prototypes: np.ndarray, path) -> None:
    """Sidecar format: u32 LE count, u32 LE dim, then count*dim float32 LE."""
    protos = np.ascontiguousarray(prototypes, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<II", protos.shape[0], protos.shape[1]))
        fh.write(protos.tobytes())


def load_prototypes(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 8:
        raise ValueError(f"{path}: prototype file shorter than its header")
    count, dim = struct.unpack("<II", data[:8])
    expected = 8 + 4 * count * dim
    if len(data) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, have {len(data)}")
    return np.frombuffer(data, dtype="<f4", offset=8).reshape(count, dim).copy()


def write_fixtures(data: SynthData, out_dir) -> list[tuple[Path, str]]:
    """Write MLEB + CoNLL files per split plus the prototype sidecar.

    Returns (path, one-line summary) per file written, in write order.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[tuple[Path, str]] = []
    for name, dataset, corpus in zip(
        ("train", "dev", "test"), data.embeddings, data.corpora
    ):
        mleb_path = out / f"{name}.mleb"
        write_embeddings(dataset, mleb_path)
        written.append(
            (
                mleb_path,
                f"layers={dataset.num_layers} dim={dataset.dim} "
                f"sentences={len(dataset.sentences)} tokens={dataset.num_tokens}",
            )
        )
        conll_path = out / f"{name}.conll"
        write_conll(corpus, conll_path)
        written.append(
            (conll_path, f"sentences={len(corpus.sentences)} tagset={','.join(corpus.tagset)}")
        )
    proto_path = out / "prototypes.bin"
    write_prototypes(data.prototypes, proto_path)
    written.append(
        (proto_path, f"prototypes={data.prototypes.shape[0]} dim={data.prototypes.shape[1]}")
    )
    return written
