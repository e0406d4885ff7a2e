# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled Z2 column reduction (hot kernel).

Same contract as ``memloop._reduce_py.reduce_columns``: columns are bitsets,
here packed into dense uint64 word rows, reduced left to right with pivot
lookup by lowest set bit.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

cdef extern from *:
    """
    #if defined(__GNUC__) || defined(__clang__)
    static inline int memloop_hibit64(unsigned long long x)
        { return x ? 63 - __builtin_clzll(x) : -1; }
    #else
    static inline int memloop_hibit64(unsigned long long x)
        { int r = -1; while (x) { x >>= 1; ++r; } return r; }
    #endif
    """
    int memloop_hibit64(unsigned long long x) nogil


cdef inline long _low_of(cnp.uint64_t[:, ::1] words, Py_ssize_t j,
                         Py_ssize_t start_word) nogil:
    cdef Py_ssize_t w
    cdef int h
    for w in range(start_word, -1, -1):
        h = memloop_hibit64(words[j, w])
        if h >= 0:
            return w * 64 + h
    return -1


def reduce_columns(columns, long n_faces, bint need_chains=False,
                   bint need_basis=False):
    """Reduce boundary columns over Z2; see the pure-Python twin for the contract."""
    cdef Py_ssize_t n_cols = len(columns)
    cdef Py_ssize_t n_words = (n_faces + 63) // 64 if n_faces > 0 else 1
    cdef Py_ssize_t b_words = (n_cols + 63) // 64 if n_cols > 0 else 1

    lows_arr = np.full(n_cols, -1, dtype=np.int64)
    words_arr = np.zeros((n_cols, n_words), dtype=np.uint64)
    basis_arr = np.zeros((n_cols, b_words), dtype=np.uint64) if need_basis \
        else np.zeros((1, 1), dtype=np.uint64)
    owner_arr = np.full(n_faces if n_faces > 0 else 1, -1, dtype=np.int64)

    cdef cnp.int64_t[::1] lows = lows_arr
    cdef cnp.uint64_t[:, ::1] words = words_arr
    cdef cnp.uint64_t[:, ::1] basis = basis_arr
    cdef cnp.int64_t[::1] owner = owner_arr

    cdef Py_ssize_t j, w, i
    cdef long low, k, f
    cdef cnp.int64_t[::1] faces

    for j in range(n_cols):
        faces = np.ascontiguousarray(columns[j], dtype=np.int64)
        with nogil:
            for i in range(faces.shape[0]):
                f = faces[i]
                words[j, f >> 6] ^= (<cnp.uint64_t>1) << (f & 63)
            if need_basis:
                basis[j, j >> 6] ^= (<cnp.uint64_t>1) << (j & 63)
            low = _low_of(words, j, n_words - 1)
            while low >= 0:
                k = owner[low]
                if k < 0:
                    break
                for w in range(low // 64, -1, -1):
                    words[j, w] ^= words[k, w]
                if need_basis:
                    for w in range(b_words):
                        basis[j, w] ^= basis[k, w]
                low = _low_of(words, j, low // 64)
            if low >= 0:
                lows[j] = low
                owner[low] = j

    chains = {}
    cycles = {}
    cdef Py_ssize_t jj
    if need_chains or need_basis:
        for jj in range(n_cols):
            if lows_arr[jj] >= 0:
                if need_chains:
                    chains[jj] = _row_indices(words_arr[jj], n_faces)
            elif need_basis:
                cycles[jj] = _row_indices(basis_arr[jj], n_cols)
    return lows_arr, chains, cycles


def _row_indices(row, long n_bits):
    bits = np.unpackbits(row.view(np.uint8), bitorder="little")[:n_bits]
    return np.nonzero(bits)[0].astype(np.int64)
