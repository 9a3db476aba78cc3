//! Pipeline orchestration: config files, on-disk artifacts and the stage
//! commands behind the `geoembed` binary.

pub mod artifacts;
mod config;
mod stages;
mod sweep;

pub use config::{InputPath, PipelineConfig, Variant};
pub use stages::{
    cmd_build, cmd_eval, cmd_select, cmd_synth, cmd_train, describe, load_assoc, load_representation, probe_settings,
    select_tags, selection_classes, selection_target, train_representation, weighting_params, Inputs, Labels, Trained,
};
pub use sweep::{candidates, cmd_sweep, Candidate, SweepDecision, SweepOutcome};
