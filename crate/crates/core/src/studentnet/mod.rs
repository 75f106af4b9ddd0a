//! The compact student network, its optimizer and checkpoint format.

mod adam;
mod checkpoint;
mod net;
pub mod ops;
mod params;

pub use adam::{optimizer_step, AdamConfig, OptimizerState};
pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint};
pub use net::{NetConfig, StudentNet};
pub use params::ParamSet;
