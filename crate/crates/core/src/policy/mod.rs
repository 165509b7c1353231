//! Stacking policy: the reward table, a TD3 learner for cube-on-cube
//! stacking, and greedy evaluation that yields attempt datasets for other
//! theme objects.

mod env;
mod eval;
mod td3;

pub use env::{reward, RlAction, RlState, ACTION_CENTER, ACTION_MAX, PLACEMENT_SHRINK};
pub use eval::{curve_csv, curve_svg, evaluate_classes, evaluate_controller, evaluate_policy, EvalResult, EVAL_CLASSES, EVAL_TIMESTEPS};
pub use td3::{
    td3_train, CurvePoint, PolicyCheckpoint, PolicyQuality, ReplayStats, Td3Config, TrainOutcome, POLICY_FORMAT,
    POLICY_VERSION,
};
