"""BM25 scoring kernel selection: compiled extension or NumPy fallback.

The compiled route is preferred when the extension built; setting
``REGRAG_NO_EXT=1`` forces the fallback (useful for benchmarking and
debugging). Both routes implement the same contract and produce identical
scores.
"""

import os

from regrag._kernels.fallback import accumulate_term as accumulate_term_py

if os.environ.get("REGRAG_NO_EXT"):
    accumulate_term = accumulate_term_py
    USING_COMPILED = False
else:
    try:
        from regrag._kernels._bm25 import accumulate_term

        USING_COMPILED = True
    except ImportError:
        accumulate_term = accumulate_term_py
        USING_COMPILED = False

__all__ = ["accumulate_term", "accumulate_term_py", "USING_COMPILED"]
