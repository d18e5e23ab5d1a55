"""sdechaos: a numerical laboratory for diffusions with singular coefficients.

Computes parabolic semigroups and gradient-channel operators for uniformly
elliptic generators on truncated grids, evaluates Wiener-chaos kernels and
the strong-solvability criterion remainders, reconstructs solutions pathwise
from the driving noise, and runs seeded desk-scale experiments.
"""

__version__ = "0.1.0"
