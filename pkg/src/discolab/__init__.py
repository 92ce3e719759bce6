"""Adversarial purification with a local implicit image function, on numpy."""

from .attacks import AttackConfig, bim, bpda_attack, fgsm, pgd, project_ball, run_attack
from .classifier import ClassifierConfig, ClassifierModel, accuracy, classifier_forward, predict, train_classifier
from .defense import (
    Defense,
    DefenseConfig,
    TrainHParams,
    classify_with_defense,
    defend,
    make_pairs,
    randomized_defend,
    train_disco,
)
from .disco import DiscoConfig, DiscoModel, QueryPoint, cascade, disco_forward, purify, query_rgb
from .evaluation import (
    EvalReport,
    TimingReport,
    TransferMatrix,
    cost_ratio,
    emit_report,
    eval_sa_ra,
    read_report,
    timing_eval,
    transfer_eval,
)

__version__ = "0.1.0"
