# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled BM25 accumulation kernel.

One call scores a single query term's postings into the shared accumulator.
The arithmetic expression tree matches the NumPy fallback exactly so both
routes produce bit-identical scores.
"""


def accumulate_term(
    double[::1] scores,
    unsigned char[::1] touched,
    int[::1] ordinals,
    double[::1] tfs,
    double idf,
    double k1_plus_1,
    double[::1] denom,
):
    """scores[o] += idf * (tf * (k1+1)) / (tf + denom[o]) over one postings list."""
    cdef Py_ssize_t j, n = ordinals.shape[0]
    cdef int o
    cdef double tf
    for j in range(n):
        o = ordinals[j]
        tf = tfs[j]
        scores[o] += idf * (tf * k1_plus_1) / (tf + denom[o])
        touched[o] = 1
