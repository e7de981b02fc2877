"""Discrete-time quantum walks on finite graphs."""

from .graph import (
    Cut,
    CutFamily,
    GraphFormatError,
    InvalidGraphError,
    LabeledGraph,
    bridged_cliques,
    boundary_phi_prime,
    cayley_abelian,
    complete,
    conductance,
    cycle,
    pad_regular,
)
from .qwalk import CoinedWalk, RandomUnitaryWalk, UnitaryWalk, dft_coin, hadamard_coin
from .spectral import SpectralDecomposition, decompose, decompose_walk, limiting_distribution
from .mixing import MixingReport, amplify, measure_mixing

__version__ = "0.1.0"
