"""Pure-NumPy BM25 accumulation, used when the compiled kernel is absent."""

from __future__ import annotations

import numpy as np


def accumulate_term(
    scores: np.ndarray,
    touched: np.ndarray,
    ordinals: np.ndarray,
    tfs: np.ndarray,
    idf: float,
    k1_plus_1: float,
    denom: np.ndarray,
) -> None:
    """scores[o] += idf * (tf * (k1+1)) / (tf + denom[o]) over one postings list."""
    scores[ordinals] += idf * (tfs * k1_plus_1) / (tfs + denom[ordinals])
    touched[ordinals] = 1
