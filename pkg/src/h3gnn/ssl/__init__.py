from .masking import (
    MaskState,
    apply_mask,
    mask_budget,
    mask_diffi,
    mask_prob,
    mask_probabilities,
    mask_random,
    rank_by_difficulty,
)
from .training import (
    SEARCH_SPACE,
    ConvergenceComparison,
    StudentTeacher,
    TrainConfig,
    TrainingDiverged,
    TrainLog,
    TrainResult,
    compare_convergence,
    decode,
    difficulty_scores,
    ema_update,
    epochs_to_fraction,
    latent_loss,
    load_checkpoint,
    moving_average,
    save_checkpoint,
    trends_downward,
    train,
    train_encoder_decoder,
)
