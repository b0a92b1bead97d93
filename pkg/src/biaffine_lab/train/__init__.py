from .losses import (
    LossParts,
    LossWeights,
    edge_loss,
    graph_relation_loss,
    relation_loss,
    sigmoid_edge_loss,
    tag_loss,
    total_loss,
)
from .loop import (
    HISTORY_COLUMNS,
    DivergenceError,
    EvalResult,
    HistoryRow,
    TrainResult,
    TrainSchedule,
    compute_losses,
    evaluate_model,
    read_history,
    train_loop,
    write_history,
)
from .optim import OptimizerState, adamw_step, cosine_warmup_lr, global_grad_norm, grad_clip

__all__ = [
    "HISTORY_COLUMNS",
    "DivergenceError",
    "EvalResult",
    "HistoryRow",
    "LossParts",
    "LossWeights",
    "OptimizerState",
    "TrainResult",
    "TrainSchedule",
    "adamw_step",
    "compute_losses",
    "cosine_warmup_lr",
    "edge_loss",
    "evaluate_model",
    "global_grad_norm",
    "grad_clip",
    "graph_relation_loss",
    "read_history",
    "relation_loss",
    "sigmoid_edge_loss",
    "tag_loss",
    "total_loss",
    "train_loop",
    "write_history",
]
