"""HMRF image segmentation solved by conjugate gradient over the class means."""

from .evaluation import confusion, dice, match_and_report
from .grid import LatticeShape, NeighborhoodSpec, neighbors, pair_cliques
from .model import (
    ImageVolume,
    Labeling,
    ModelParams,
    classify,
    class_stats,
    data_term,
    energy_mu,
    energy_xy,
    potts_term,
)
from .optim import CgConfig, FiniteDiffScheme, fd_gradient, minimize
from .phantom import PhantomSpec, generate
from .pipeline import PRESETS, RunConfig, run, segment

__version__ = "0.1.0"
