//! Policy-gradient fine-tuning: advantages, value trackers, rollout
//! allocation, the clipped objective and the training loop.

pub mod advantage;
pub mod allocation;
pub mod objective;
pub mod tracker;
pub mod train;

pub use advantage::AdvantageSet;
pub use allocation::{allocate_rollouts, GroupAllocation};
pub use objective::{policy_objective, ObjectiveConfig, ObjectiveOutput};
pub use tracker::{TrackerConfig, ValueTracker};
pub use train::{evaluate_policy, train, TrainLogRow, TrainOutcome, TrackerLogRow};
