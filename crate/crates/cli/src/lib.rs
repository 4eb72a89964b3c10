//! Configuration, file formats, and batch orchestration for the spherical
//! stochastic heat solver.
//!
//! The binary `sphere-heat` wraps this library; everything it does is
//! callable directly: [`config::ExperimentConfig`] describes a run,
//! [`files`] holds the tabular readers and writers, [`gridded`] ingests
//! lat-lon scalar fields, and [`commands`] executes the subcommands and
//! writes their artifacts.

pub mod commands;
pub mod config;
pub mod files;
pub mod gridded;
pub mod sample;

pub use files::{FileError, PathRecord};
