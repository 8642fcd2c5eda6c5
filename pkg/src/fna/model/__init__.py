from .encoder import EncoderSpec, attention_maps, forward, init_params, loss_and_grads
from .tasks import SyntheticTask, make_synthetic_task
from .training import TrainConfig, ablation_sweep, evaluate, sweep, train

__all__ = [
    "EncoderSpec",
    "SyntheticTask",
    "TrainConfig",
    "ablation_sweep",
    "attention_maps",
    "evaluate",
    "forward",
    "init_params",
    "loss_and_grads",
    "make_synthetic_task",
    "sweep",
    "train",
]
