"""Pearson chi-square with many cells.

When the number of cells m grows with the sample size n, the classical
chi-square reference distribution can be the wrong one.  The statistic
decomposes as chi2 = (U + S)/n - n, where U counts coincident pairs weighted
by inverse cell probabilities and S is a plain iid sum.  The regime parameter
lambda = n/sqrt(m) then decides the limit of the standardized statistic:

- lambda -> 0: degenerate (mass collapses onto the no-collision atom),
- lambda in (0, inf): a shifted-scaled Poisson law driven by collision pairs,
- lambda -> inf: the standard normal.

This package provides exact cell-distribution moments (``dist``), the
statistic and its decomposition (``stat``), the three limit laws with
p-values (``limits``), closed-form theory values used as oracles
(``asymptotics``), a deterministic parallel Monte Carlo harness
(``montecarlo``), and a command-line front end (``cli``).
"""

__version__ = "0.1.0"
