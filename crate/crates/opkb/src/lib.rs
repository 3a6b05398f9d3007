//! File formats, checkpoints, stage manifests and the `opkb` command-line
//! pipeline on top of [`opkb_core`].
//!
//! Stages run one per process: `extract` → `build-kb` → `train-reasoner` /
//! `train-distmult` → `embed` / `train-task` → `evaluate`, plus `overlap` and
//! `repro-report`. Each stage refuses to overwrite outputs without
//! `--overwrite` and leaves a `<output>.manifest.json` with input hashes.

pub mod checkpoint;
pub mod cli;
pub mod error;
pub mod formats;
pub mod manifest;
pub mod report;
pub mod stages;

pub use error::{Failure, Result};
