"""Bayesian optimization of android facial expressions over an integer actuator lattice."""

from .acquisition import AcquisitionConfig, SearchExhausted, propose_next, ucb
from .evaluators import (
    EMOTIONS,
    EmotionScores,
    EvaluationResult,
    Evaluator,
    EvaluatorError,
    ExternalEvaluator,
    MalformedResponseError,
    QuadraticBowl,
    TransportError,
    external_evaluate,
)
from .facesim import FaceSimulator, au_activation, emotion_scores
from .gp import Dataset, GpModel, KernelConfig, Posterior, fit, log_marginal_likelihood, predict, select_hyperparameters
from .space import ParameterSpace, ReducedPoint

__version__ = "0.1.0"
