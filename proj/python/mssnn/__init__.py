"""Multitask dual-encoder retrieval pipeline.

Thin Python surface over the C++ core: tokenization, trained-model encoding,
index search, and the six pipeline commands (driven by a config file).
"""

from ._core import (
    DataError,
    Encoder,
    NumericError,
    ResponseIndex,
    Vocabulary,
    run_bench,
    run_eval,
    run_index,
    run_prepare,
    run_query,
    run_train,
    tokenize,
)

__all__ = [
    "DataError",
    "Encoder",
    "NumericError",
    "ResponseIndex",
    "Vocabulary",
    "run_bench",
    "run_eval",
    "run_index",
    "run_prepare",
    "run_query",
    "run_train",
    "tokenize",
]
