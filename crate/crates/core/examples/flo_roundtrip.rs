//! Write a flow field to a Middlebury `.flo` file, read it back and render it
//! with the standard color wheel.
//!
//! ```text
//! cargo run --release --example flo_roundtrip -- /tmp/flo_demo
//! ```

use flowdistill::flowcore::{encode_flo, flow_to_color, read_flo, write_flo, write_image};
use flowdistill::FlowField;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "flo_demo".into());
    std::fs::create_dir_all(&out)?;

    // a vortex whose speed grows with the radius
    let (w, h) = (160, 120);
    let flow = FlowField::from_fn(w, h, |x, y| {
        let (dx, dy) = (x as f64 - w as f64 / 2.0, y as f64 - h as f64 / 2.0);
        (-dy * 0.05, dx * 0.05)
    })?;

    let path = format!("{out}/vortex.flo");
    write_flo(&flow, &path)?;
    let back = read_flo(&path)?;
    assert_eq!(back, flow, "f32 values survive the round trip bit for bit");
    println!("{path}: {} bytes, {}x{}", encode_flo(&flow).len(), back.width(), back.height());

    write_image(&flow_to_color(&back, None), format!("{out}/vortex.png"))?;
    println!("mean magnitude {:.3} px", back.mean_magnitude());
    Ok(())
}
