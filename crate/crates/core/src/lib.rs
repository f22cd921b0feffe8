//! Online learning for Pandora's box and the prophet inequality.
//!
//! Finite-support distributions ([`stepdist`]), optimal index policies
//! ([`thresholds`]), exact policy evaluation ([`policy_eval`]), synthetic
//! instances ([`environments`]), optimistic learners ([`learners`]) and the
//! regret experiment harness ([`harness`]).

pub mod environments;
pub mod harness;
pub mod learners;
pub mod policy_eval;
pub mod rng;
pub mod stepdist;
pub mod thresholds;

pub use environments::{make_instance, CostSpec, EnvError, Environment, Family, InstanceSpec};
pub use harness::{run_episode, run_experiment, verify, ExperimentSpec, HarnessError, RegretTrace, Suite};
pub use learners::{Construction, Learner, LearnerConfig, LearnerError, OnlinePolicy};
pub use policy_eval::{expected_utility, run_policy, EpisodeOutcome, EvalError, ExactValue};
pub use stepdist::{DistError, StepCdf};
pub use thresholds::{Mode, ThresholdError, ThresholdVector};
