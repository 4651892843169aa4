"""Discounted bisimilarity distances for continuous-time Markov chains."""

from .bisim import bisim_classes, bisimilar
from .fixpoint import delta_op, discrepancy, gamma_op, iterate
from .globallp import build_d_program, solve_distance_lp
from .lp import LpProblem, LpSolution, solve_lp
from .metrics import kantorovich, tv_exp
from .model import Ctmc, LabelMetric, ModelError, load, parse_ctmc, perturb, random_ctmc, serialize
from .onthefly import OnTheFly, distance_matrix, on_the_fly
from .transport import Coupling, CouplingStructure, solve_tp

__all__ = [
    "Coupling", "CouplingStructure", "Ctmc", "LabelMetric", "LpProblem", "LpSolution", "ModelError", "OnTheFly",
    "bisim_classes", "bisimilar", "build_d_program", "delta_op", "discrepancy", "distance_matrix", "gamma_op",
    "iterate", "kantorovich", "load", "on_the_fly", "parse_ctmc", "perturb", "random_ctmc", "serialize",
    "solve_distance_lp", "solve_lp", "solve_tp", "tv_exp",
]
