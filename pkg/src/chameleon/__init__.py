"""Simulation and exact analysis of a two-colour chameleon voter-type model on lattices."""

import warnings

# numba falls back to another threading layer when the installed TBB is too old
warnings.filterwarnings("ignore", message=".*TBB threading layer.*")

__version__ = "0.1.0"

from .lattice import (FIXED_BLUE_LINE, RING, STEP_PROFILE_LINE, CoinDraw, Color, Configuration,  # noqa: E402
                      ModelParams, Neighborhood, Topology, local_rule, sample_step, step)
from .rng import CoinStream  # noqa: E402

__all__ = ["__version__", "Color", "Neighborhood", "Topology", "RING", "FIXED_BLUE_LINE",
           "STEP_PROFILE_LINE", "ModelParams", "Configuration", "CoinDraw", "CoinStream",
           "local_rule", "step", "sample_step"]
