"""Pure-Python twin of the compiled tally kernel.

Must stay operation-for-operation identical to _ckernels.tally: same per-cell
expression order, same accumulator updates, ascending cell order.  Any edit
here needs the mirror edit there; the parity tests compare outputs bitwise.
"""

import numpy as np


def tally(counts, probs, n):
    """Accumulate the per-replicate sums over occupied cells.

    ``counts``: occupancies of the occupied cells, ascending cell order.
    ``probs``: matching cell probabilities.  Returns ``(u, s, cp, chi_occ,
    psum)``: the pair term sum c(c-1)/p, the iid term sum c/p, the integer
    collision-pair count sum c(c-1)/2, the occupied-cell part of the direct
    chi-square formula sum (c - n p)^2/(n p), and sum p over occupied cells.
    Counts must satisfy c(c-1) < 2^63.
    """
    counts = np.ascontiguousarray(counts, dtype=np.int64)
    probs = np.ascontiguousarray(probs, dtype=np.float64)
    if counts.shape != probs.shape or counts.ndim != 1:
        raise ValueError("counts and probs must be matching 1-d arrays")
    fn = float(n)
    u = 0.0
    s = 0.0
    chi_occ = 0.0
    psum = 0.0
    cp = 0
    for c, p in zip(counts.tolist(), probs.tolist()):
        invp = 1.0 / p
        cc1 = c * (c - 1)
        fc = float(c)
        fcc1 = float(cc1)
        u = u + fcc1 * invp
        s = s + fc * invp
        cp = cp + (cc1 >> 1)
        np_i = fn * p
        dd = fc - np_i
        chi_occ = chi_occ + dd * dd / np_i
        psum = psum + p
    return u, s, cp, chi_occ, psum
