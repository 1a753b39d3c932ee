//! Online visuomotor prediction for a camera that moves over a still image.
//!
//! An agent sees a small window of a larger grayscale image and can move it
//! one pixel up, down, left or right, or hold still. It learns to predict its
//! next camera frame from the current frame and the chosen motor command with
//! an Extreme Learning Machine trained online, while one of four control
//! policies decides where to look next:
//!
//! | policy  | picks the command that...                          |
//! |---------|----------------------------------------------------|
//! | `rm`    | is drawn uniformly at random                       |
//! | `minpe` | recently produced the smallest prediction error    |
//! | `maxpe` | recently produced the largest prediction error     |
//! | `maxlp` | recently produced the largest learning progress    |
//!
//! The modules build on each other:
//!
//! - [`linalg`]: dense matrices and the Moore-Penrose pseudo-inverse.
//! - [`elm`]: the predictor, its batch and recursive least-squares trainers.
//! - [`world`]: image, camera, motor commands and sensor noise.
//! - [`controllers`]: the error history and the four policies.
//! - [`harness`]: the closed loop, metrics, and multi-seed comparisons.
//! - [`cli`]: the `visuomotor` command and its CSV/PGM writers.
//!
//! Runnable walkthroughs live in the crate's `examples/` directory.
//!
//! ```no_run
//! use visuomotor::controllers::ControllerKind;
//! use visuomotor::harness::{run_experiment, ExperimentConfig};
//!
//! let config = ExperimentConfig::default().with_kind(ControllerKind::MaxLp).with_seed(1);
//! let result = run_experiment(&config)?;
//! println!("final error {:.3e}", result.metrics.final_error);
//! # Ok::<(), visuomotor::Error>(())
//! ```

pub mod cli;
pub mod controllers;
pub mod elm;
mod error;
pub mod harness;
pub mod linalg;
pub mod pgm;
pub mod validate;
pub mod world;

pub use error::{Error, Result};
