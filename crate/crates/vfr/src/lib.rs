//! Quality-driven variable frame-rate decisions for 120 fps video.
//!
//! The crate decides, for every chunk of four consecutive source frames,
//! the lowest of 30, 60 or 120 fps that preserves perceived quality, then
//! materialises that decision by dropping and later duplicating frames.
//! Decisions come from two cascaded binary random forests over 32 low-cost
//! features (motion, temporal change, gradients, luma statistics).
//!
//! Modules follow the processing order: [`video_io`] loads raw 4:2:0 frames
//! and groups them into chunks, [`features`] turns chunks into feature
//! vectors, [`forest`] implements the random-forest learner, [`cascade`]
//! stacks two forests into the three-way decision, [`model_selection`]
//! evaluates and tunes models, [`pipeline`] applies decisions to frames and
//! reports savings, and [`subjective`] analyses viewer scores. [`synthetic`]
//! generates deterministic test clips; [`cli`] wires everything into the
//! `vfr` binary.

pub mod cascade;
pub mod cli;
pub mod error;
pub mod features;
pub mod forest;
pub mod model_selection;
mod persist;
pub mod pipeline;
pub mod rate;
pub mod subjective;
pub mod synthetic;
pub mod video_io;

pub use error::{Error, Result};
pub use rate::FrameRate;
