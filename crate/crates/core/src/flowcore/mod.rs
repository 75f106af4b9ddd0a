//! Core value types shared by every stage: image frames, flow fields and
//! their on-disk formats.

mod color;
mod crop;
mod flo;
mod flow;
mod frame;

pub use color::{flow_to_color, COLOR_WHEEL_SIZE};
pub use crop::{crop_to_multiple, Crop};
pub use flo::{decode_flo, encode_flo, read_flo, write_flo, FLO_MAGIC};
pub use flow::FlowField;
pub use frame::{read_image, write_image, write_image_with_depth, BitDepth, FramePair, ImageFrame};
