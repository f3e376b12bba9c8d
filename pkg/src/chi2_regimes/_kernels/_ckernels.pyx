# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled tally kernel.

Twin of _pykernels.tally: same per-cell expression order, same accumulator
updates, ascending cell order.  Compiled with -ffp-contract=off so no FMA
fusion breaks bit-identity with the interpreter.  Any edit here needs the
mirror edit there; the parity tests compare outputs bitwise.
"""

import numpy as np

cimport numpy as cnp  # noqa: F401  (sets up the numpy C API)


def tally(counts, probs, n):
    """Accumulate the per-replicate sums over occupied cells.

    Same contract as the pure twin: returns (u, s, cp, chi_occ, psum) for
    occupied-cell counts and probabilities given in ascending cell order.
    Counts must satisfy c(c-1) < 2^63.
    """
    cdef long long[::1] cv = np.ascontiguousarray(counts, dtype=np.int64)
    cdef double[::1] pv = np.ascontiguousarray(probs, dtype=np.float64)
    if cv.shape[0] != pv.shape[0]:
        raise ValueError("counts and probs must be matching 1-d arrays")
    cdef double fn = <double> (<long long> n)
    cdef double u = 0.0
    cdef double s = 0.0
    cdef double chi_occ = 0.0
    cdef double psum = 0.0
    cdef long long cp = 0
    cdef Py_ssize_t i
    cdef long long c, cc1
    cdef double p, invp, fc, fcc1, np_i, dd
    for i in range(cv.shape[0]):
        c = cv[i]
        p = pv[i]
        invp = 1.0 / p
        cc1 = c * (c - 1)
        fc = <double> c
        fcc1 = <double> cc1
        u = u + fcc1 * invp
        s = s + fc * invp
        cp = cp + (cc1 >> 1)
        np_i = fn * p
        dd = fc - np_i
        chi_occ = chi_occ + dd * dd / np_i
        psum = psum + p
    return u, s, cp, chi_occ, psum
