"""Multilingual sentence embeddings: a joint multi-encoder LSTM model
trained through partial translation paths, plus exact large-scale
similarity search for evaluating the shared embedding space.

Kept import-light on purpose: the command line sets BLAS thread
environment variables before any numeric module loads, so submodules
(mlse.corpus, mlse.bpe, mlse.seq2seq, mlse.simsearch, ...) are
imported explicitly by consumers.
"""

__version__ = "0.1.0"

__all__ = [
    "bpe",
    "cli",
    "config",
    "corpus",
    "nn",
    "report",
    "seq2seq",
    "simsearch",
]
