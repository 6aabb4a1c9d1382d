from .buckets import (
    NUM_DISTANCE_BUCKETS,
    NUM_SIZE_BUCKETS,
    bucket_cluster_size,
    bucket_distance,
)
from .conll import read_conll2012, write_conll2012
from .document import FINE_NR_TYPES, CorpusError, Document, NRType, Span
from .embeddings import (
    ContextualEmbeddings,
    EmbeddingTable,
    HashedEmbeddings,
    load_embeddings,
    reduce_layers,
)
from .jsonlines import read_documents, read_extended_json, write_extended_json

__all__ = [
    "ContextualEmbeddings",
    "CorpusError",
    "Document",
    "EmbeddingTable",
    "FINE_NR_TYPES",
    "HashedEmbeddings",
    "NRType",
    "NUM_DISTANCE_BUCKETS",
    "NUM_SIZE_BUCKETS",
    "Span",
    "bucket_cluster_size",
    "bucket_distance",
    "load_embeddings",
    "read_conll2012",
    "read_documents",
    "read_extended_json",
    "reduce_layers",
    "write_conll2012",
    "write_extended_json",
]
