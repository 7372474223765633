//! Actor-critic policy-gradient learner: λ-returns, policy and value
//! losses on the tape, RMSProp with global-norm clipping, and the
//! multi-worker training loop.

mod loss;
mod optimizer;
mod returns;
mod rollout;
mod trainer;

pub use loss::{gaussian_entropy, policy_loss, value_loss};
pub use optimizer::RmsProp;
pub use returns::{k_step_return, lambda_return_mixture, lambda_returns};
pub use rollout::{
    roll_window, Actor, ActorState, PolicyNet, RolloutSegment, RolloutStep, ValueNet,
};
pub(crate) use trainer::mix;
pub use trainer::{
    train, train_logged, CurvePoint, EnvFactory, EvalSink, LearnerConfig, TrainOutcome,
};
