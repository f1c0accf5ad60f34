//! Dense rewards for code-generation RL built only from unit-test
//! execution.
//!
//! * [`problem`]: problems, test suites, trajectories and rollout groups.
//! * [`sandbox`]: runs candidate programs against a suite under limits.
//! * [`reward`]: difficulty-weighted turn rewards and decayed outcomes.
//! * [`advantage`]: group-relative turn and trajectory advantages.
//! * [`sim`]: a toy multi-turn environment and policy to train against.
//! * [`metrics`]: pass@k, degenerate-group ratio, stage timings.
//! * [`interchange`]: the JSONL record formats.

pub mod advantage;
pub mod error;
pub mod interchange;
pub mod metrics;
pub mod problem;
pub mod reward;
pub mod sandbox;
pub mod sim;

pub use advantage::{combined_advantages, AdvantageBundle, AdvantageParams, NormMode};
pub use error::{Error, Result};
pub use problem::{Problem, RolloutGroup, TrajectoryRecord, TurnRecord, UnitTest};
pub use reward::{compute_rewards, GroupTestStats, RewardBundle, RewardMode, RewardParams};
