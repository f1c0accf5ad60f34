//! Desk-scale training simulator: synthetic problems whose candidate
//! programs have fixed pass vectors, a tabular softmax policy per problem,
//! and the full reward/advantage/clipped-update loop on top.

pub mod compare;
pub mod env;
pub mod policy;
pub mod rollout;
pub mod train;
pub mod update;

pub use compare::{compare, ComparisonReport, ConfigSummary, CurvePoint};
pub use env::{reference_env, EnvConfig, Environment, GeneratedEnv, ProblemSpec, SyntheticProblem};
pub use policy::{State, ToyPolicy};
pub use rollout::{rollout_group, SimGroup, TurnStep};
pub use train::{ablation_configs, reference_config, train, StepMetrics, TrainConfig, TrainRun, Trainer};
pub use update::{clipped_update, surrogate, ClipRange, UpdateConfig, UpdateDiagnostics};
