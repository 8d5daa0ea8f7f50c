"""Histogram-based channel estimation for multi-level Flash memory.

Submodules
----------
channel_model
    Read-voltage distributions, bin probabilities and a seeded sampler.
binning
    Bin placement strategies and histogram quality metrics.
estimation
    Least-squares fitting of channel parameters to a histogram.
harness
    Trajectory sweeps, studies and report output.
"""

from .binning import BinBoundaries, Histogram, make_bins
from .channel_model import ChannelParams, LevelLayout, sample_reads
from .estimation import CostContext, SolverConfig, SolverReport, solve

__all__ = [
    "BinBoundaries",
    "ChannelParams",
    "CostContext",
    "Histogram",
    "LevelLayout",
    "SolverConfig",
    "SolverReport",
    "make_bins",
    "sample_reads",
    "solve",
]

__version__ = "0.1.0"
