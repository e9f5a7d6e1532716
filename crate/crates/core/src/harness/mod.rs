//! Scenario presets, the slicing environment, controllers and run reports.

pub mod alarm;
pub mod env;
pub mod plot;
pub mod report;
pub mod run;
pub mod scenario;

pub use alarm::{detect_insufficient_resources, AlarmEvent, AlarmReason};
pub use env::{RewardMode, SlicingEnv, StepRecord};
pub use scenario::{HarnessConfig, Scenario, ScenarioSpec, SliceSpec, PRESETS};
pub use run::{compare, run_eval, run_training, Comparison, Controller, ControllerKind, RunReport, SliceReport, TrainedAgent};
