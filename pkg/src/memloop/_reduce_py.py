"""Pure-Python Z2 column reduction (fallback backend).

Columns are stored as arbitrary-precision integers used as bitsets; bit ``i``
marks face ``i``. The reduction is the standard left-to-right persistence
algorithm: while a column shares its lowest-one ("low") with an earlier
reduced column, add that column over Z2.
"""

from __future__ import annotations

import numpy as np


def _mask_to_indices(mask: int, n_bits: int) -> np.ndarray:
    if mask == 0:
        return np.empty(0, dtype=np.int64)
    nbytes = (n_bits + 7) // 8
    raw = np.frombuffer(mask.to_bytes(nbytes, "little"), dtype=np.uint8)
    bits = np.unpackbits(raw, bitorder="little")
    return np.nonzero(bits)[0].astype(np.int64)


def reduce_columns(columns, n_faces: int, need_chains: bool = False,
                   need_basis: bool = False):
    """Reduce boundary columns over Z2.

    columns: sequence of integer index arrays (faces of each column).
    n_faces: size of the face index space.

    Returns (lows, chains, cycles):
      lows   -- int64 array; low face index per reduced column, -1 if zero.
      chains -- {j: face indices of the reduced column} for paired columns
                (only if need_chains).
      cycles -- {j: column indices of the reduction basis column} for columns
                that reduced to zero (only if need_basis).
    """
    n_cols = len(columns)
    lows = np.full(n_cols, -1, dtype=np.int64)
    reduced: list[int] = [0] * n_cols
    basis: list[int] = [0] * n_cols if need_basis else []
    pivot_owner: dict[int, int] = {}

    for j in range(n_cols):
        col = 0
        for f in columns[j]:
            col ^= 1 << int(f)
        b = 1 << j if need_basis else 0
        low = col.bit_length() - 1
        while col:
            owner = pivot_owner.get(low)
            if owner is None:
                break
            col ^= reduced[owner]
            if need_basis:
                b ^= basis[owner]
            low = col.bit_length() - 1
        reduced[j] = col
        if need_basis:
            basis[j] = b
        if col:
            lows[j] = low
            pivot_owner[low] = j

    chains = {}
    if need_chains:
        for j in range(n_cols):
            if lows[j] >= 0:
                chains[j] = _mask_to_indices(reduced[j], n_faces)
    cycles = {}
    if need_basis:
        for j in range(n_cols):
            if lows[j] < 0:
                cycles[j] = _mask_to_indices(basis[j], n_cols)
    return lows, chains, cycles
