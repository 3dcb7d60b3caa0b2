"""Weak-supervision mining and multitask contrastive training for document embeddings.

The package covers the full pipeline: corpus ingestion, auxiliary
per-document embeddings, approximate nearest-neighbor retrieval, triplet
and topic mining, tokenization/packing, a tiny trainable encoder with
contrastive and multi-label objectives, and frozen-embedding evaluation.
"""

__version__ = "0.1.0"

from docembed.corpus import Document, CorpusStats, ingest, dedup
from docembed.aux_embed import AuxEmbedding, EmbedTables, Space, embed_document
from docembed.neighbors import InvertedFileIndex, Neighbor, brute_force_topk

__all__ = [
    "Document",
    "CorpusStats",
    "ingest",
    "dedup",
    "AuxEmbedding",
    "EmbedTables",
    "Space",
    "embed_document",
    "InvertedFileIndex",
    "Neighbor",
    "brute_force_topk",
    "__version__",
]
