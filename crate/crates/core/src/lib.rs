//! Teacher-student distillation for dense optical flow.
//!
//! A slow, accurate teacher produces gold-truth flow for image pairs sampled
//! from a narrow target domain; a compact multi-scale student network is then
//! fine-tuned on those pairs and evaluated with endpoint error, SSIM and
//! long-term tracking drift.
//!
//! The crate is organised by pipeline stage:
//!
//! - [`flowcore`]: frames, flow fields, `.flo`/PNG I/O, color coding, cropping
//! - [`warp`]: bilinear sampling, backward warping, flow composition, mesh tracking
//! - [`metrics`]: EPE, SSIM, multi-scale L1 loss, boxplot statistics
//! - [`studentnet`]: the student encoder-decoder with analytic gradients and Adam
//! - [`distill`]: teachers, datasets, the fine-tuning loop and evaluation
//! - [`synthdata`]: synthetic sequences with exact ground-truth flow
//! - [`cli`]: the `flowdistill` command-line front end
//!
//! Runnable walkthroughs of each capability live in `examples/`.

pub mod cli;
pub mod distill;
mod error;
pub mod flowcore;
pub mod metrics;
pub mod studentnet;
pub mod synthdata;
pub mod warp;

pub use error::{Error, Result};
pub use flowcore::{FlowField, FramePair, ImageFrame};
