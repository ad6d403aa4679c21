"""Reranking over compressed document representations."""

from ._core import (
    Checkpoint,
    ConfigError,
    Document,
    EmbeddingIndex,
    InvertedIndex,
    Query,
    Vocabulary,
    compress,
    detokenize,
    implied_bytes_per_value,
    index_size,
    kendall_tau,
    make_document,
    make_query,
    ndcg_at_k,
    parse_config,
    rerank_input_length,
    score_compressed,
    synthetic_corpus,
    teacher_scores,
    tokenize,
)

__all__ = [
    "Checkpoint",
    "ConfigError",
    "Document",
    "EmbeddingIndex",
    "InvertedIndex",
    "Query",
    "Vocabulary",
    "compress",
    "detokenize",
    "implied_bytes_per_value",
    "index_size",
    "kendall_tau",
    "make_document",
    "make_query",
    "ndcg_at_k",
    "parse_config",
    "rerank_input_length",
    "score_compressed",
    "synthetic_corpus",
    "teacher_scores",
    "tokenize",
]
