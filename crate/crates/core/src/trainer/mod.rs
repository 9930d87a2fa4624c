//! Training objectives, the optimization loop and the consistency bound check.

pub mod gradcheck;
pub mod losses;
pub mod optim;
pub mod prop1;
mod train;

pub use gradcheck::{gradient_check, GradCheck};
pub use losses::{bce, ddecc_loss, ec_cm_loss, hard_decision, total_loss, vanilla_cm_loss, PROB_CLAMP};
pub use optim::{cosine_lr, ema_update, Adam};
pub use prop1::{prop1_check, prop1_monte_carlo};
pub use train::{
    condition_of, ConditionKind, LossParts, Objective, PreparedBatch, StepRecord, TrainConfig,
    TrainState, Trainer, MIN_SYNDROME_SIGMA,
};
