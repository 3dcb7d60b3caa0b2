"""Auxiliary per-document embeddings used for candidate retrieval.

Three independent spaces: entity vectors averaged over a document's linked
entities, a sign vector decoded from the thumbnail hash, and token vectors
averaged over the title. The entity and image spaces carry no lexical
content, so translations of the same article land on identical vectors.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from docembed._validation import DataError
from docembed.corpus import Document


class Space(enum.Enum):
    ENTITY = "entity"
    IMAGE = "image"
    TEXT = "text"


@dataclass
class AuxEmbedding:
    doc_id: str
    space: Space
    vector: np.ndarray


@dataclass
class EmbedTables:
    """Pre-trained lookup tables for entity and token vectors."""

    entity_table: dict[str, np.ndarray] = field(default_factory=dict)
    token_table: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        _check_table(self.entity_table, "entity_table")
        _check_table(self.token_table, "token_table")


def _check_table(table: dict[str, np.ndarray], name: str) -> None:
    dim = None
    for key, vec in table.items():
        arr = np.asarray(vec, dtype=np.float64)
        if arr.ndim != 1:
            raise DataError(f"{name} entry {key!r} is not a vector")
        if dim is None:
            dim = arr.shape[0]
        elif arr.shape[0] != dim:
            raise DataError(
                f"{name} entry {key!r} has dimension {arr.shape[0]}, expected {dim}"
            )
        table[key] = arr


def load_table(path) -> dict[str, np.ndarray]:
    """Read a `key<TAB>v1,v2,...,vd` table file."""
    table: dict[str, np.ndarray] = {}
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            line = line.rstrip("\n")
            if not line:
                continue
            key, _, values = line.partition("\t")
            if not values:
                raise DataError(f"malformed table line: {line!r}")
            table[key] = np.array([float(v) for v in values.split(",")])
    _check_table(table, str(path))
    return table


def save_table(table: dict[str, np.ndarray], path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for key in sorted(table):
            values = ",".join(repr(float(v)) for v in table[key])
            handle.write(f"{key}\t{values}\n")


def hash_to_signs(hex_hash: str) -> np.ndarray:
    """Map a hex thumbnail hash to a +-1 vector, one component per bit."""
    bits = []
    for digit in hex_hash:
        value = int(digit, 16)
        bits.extend((value >> shift) & 1 for shift in (3, 2, 1, 0))
    return np.where(np.array(bits) > 0, 1.0, -1.0)


def embed_document(doc: Document, space: Space, tables: EmbedTables) -> AuxEmbedding | None:
    """Compute one auxiliary embedding, or None when the source is empty.

    Entity: mean of the known entity vectors. Image: sign vector from the
    thumbnail hash. Text: mean of the known token vectors of the
    whitespace-tokenized title. Unknown entities/tokens are skipped.
    """
    if space is Space.ENTITY:
        vecs = [tables.entity_table[e] for e in doc.entity_ids if e in tables.entity_table]
        if not vecs:
            return None
        return AuxEmbedding(doc.id, space, np.mean(vecs, axis=0))
    if space is Space.IMAGE:
        if not doc.image_hash:
            return None
        return AuxEmbedding(doc.id, space, hash_to_signs(doc.image_hash))
    if space is Space.TEXT:
        return embed_text(doc.id, doc.title, tables)
    raise ValueError(f"unknown space {space!r}")


def embed_text(doc_id: str, text: str, tables: EmbedTables) -> AuxEmbedding | None:
    vecs = [tables.token_table[t] for t in text.split() if t in tables.token_table]
    if not vecs:
        return None
    return AuxEmbedding(doc_id, Space.TEXT, np.mean(vecs, axis=0))


def embed_corpus(docs: list[Document], space: Space, tables: EmbedTables) -> list[AuxEmbedding]:
    out = []
    for doc in docs:
        emb = embed_document(doc, space, tables)
        if emb is not None:
            out.append(emb)
    return out
