"""Collaborative Monte Carlo localization with compressed belief exchange.

Two (or more) robots localize in a shared occupancy-grid map; when one
detects another it transmits a compressed summary of its belief, which the
receiver fuses through a detection model and reciprocal sampling.  Six
exchange strategies sit behind one interface: naive (full particle set),
standard thinning, density trees, divide-and-conquer cluster abstractions,
K-means mixtures, and kernel-halving root-thinning.
"""

__version__ = "0.1.0"

from .kernels import BACKEND as KERNEL_BACKEND  # noqa: F401
