from .base import CategoricalModel, ModelEval, hessian_log, log_hessians, score_vector, scores
from .poisson import PoissonModel, PoissonSpec, poisson_prob
from .polychoric import PolychoricModel, PolychoricParams, cell_grad, cell_prob, initial_params
from .rasch import RaschModel, RaschSpec, rasch_prob

__all__ = [
    "CategoricalModel",
    "ModelEval",
    "PoissonModel",
    "PoissonSpec",
    "PolychoricModel",
    "PolychoricParams",
    "RaschModel",
    "RaschSpec",
    "cell_grad",
    "cell_prob",
    "hessian_log",
    "initial_params",
    "log_hessians",
    "poisson_prob",
    "rasch_prob",
    "score_vector",
    "scores",
]
