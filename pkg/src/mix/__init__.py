from src.mix.baselines import cutmix, input_mixup, random_channel_mix, random_mask
from src.mix.catchup import (
    build_mask,
    catchup_mix_batch,
    filter_influence,
    mix_features,
    mix_labels,
    pair_mask,
    relative_filter_influence,
)
from src.mix.plan import MixAuditLog, MixPlan
from src.mix.sampling import sample_lambda, sample_layer

__all__ = [
    "build_mask",
    "catchup_mix_batch",
    "cutmix",
    "filter_influence",
    "input_mixup",
    "mix_features",
    "mix_labels",
    "pair_mask",
    "random_channel_mix",
    "random_mask",
    "relative_filter_influence",
    "MixAuditLog",
    "MixPlan",
    "sample_lambda",
    "sample_layer",
]
