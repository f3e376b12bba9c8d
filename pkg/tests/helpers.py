"""Brute-force oracles shared by the unit and acceptance tests.

Everything here recomputes the library's claims from first principles on
parameter sets small enough to enumerate exhaustively, so the main code
paths are never used as their own oracle.
"""

from itertools import product

import numpy as np

from chi2_regimes.stat import SampleCounts, SampleSequence, coincidence_scores


def weighted_sequences(d, n):
    """Yield (sequence, probability) over all m**n outcome sequences of d."""
    pv = d.probs
    for seq in product(range(1, d.m + 1), repeat=n):
        w = 1.0
        for v in seq:
            w *= pv[v - 1]
        yield seq, w


def seq_counts(seq, m):
    counts = {}
    for v in seq:
        counts[v] = counts.get(v, 0) + 1
    return SampleCounts(len(seq), counts, m)


def brute_chi2(d, counts):
    """Textbook chi-square from dense observed-vs-expected cells."""
    pv = d.probs
    n = counts.n
    total = 0.0
    for i in range(1, d.m + 1):
        expected = n * pv[i - 1]
        diff = counts.counts.get(i, 0) - expected
        total += diff * diff / expected
    return total


def brute_u_s(d, counts):
    pv = d.probs
    u = sum(c * (c - 1) / pv[i - 1] for i, c in counts.counts.items())
    s = sum(c / pv[i - 1] for i, c in counts.counts.items())
    return u, s


def exact_moments(d, n):
    """Exact E/Var of chi2, E U, E S, Cov(U,S), and the three score-sum
    moments, by full enumeration of the product measure."""
    acc = {
        "e_chi2": 0.0, "e_chi2_sq": 0.0, "e_u": 0.0, "e_s": 0.0,
        "e_us": 0.0, "a1": 0.0, "a2": 0.0, "a3": 0.0,
    }
    for seq, w in weighted_sequences(d, n):
        counts = seq_counts(seq, d.m)
        chi2 = brute_chi2(d, counts)
        u, s = brute_u_s(d, counts)
        acc["e_chi2"] += w * chi2
        acc["e_chi2_sq"] += w * chi2 * chi2
        acc["e_u"] += w * u
        acc["e_s"] += w * s
        acc["e_us"] += w * u * s
        scores = coincidence_scores(d, SampleSequence(n, tuple(seq)))
        acc["a1"] += w * float(np.sum(scores))
        acc["a2"] += w * float(np.sum(scores ** 2))
        acc["a3"] += w * float(np.sum(scores ** 3))
    acc["var_chi2"] = acc["e_chi2_sq"] - acc["e_chi2"] ** 2
    acc["cov_us"] = acc["e_us"] - acc["e_u"] * acc["e_s"]
    return acc


def random_counts(rng, m, n_max=200):
    """A random counts map on 1..m with at least one draw."""
    n = int(rng.integers(1, n_max + 1))
    cells = rng.integers(1, m + 1, size=n)
    values, reps = np.unique(cells, return_counts=True)
    return {int(v): int(c) for v, c in zip(values, reps)}
