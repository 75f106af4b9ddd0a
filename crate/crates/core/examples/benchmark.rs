//! Inference latency of the student against a wider reference network.
//!
//! ```text
//! cargo run --release --example benchmark
//! ```

use std::time::Instant;

use flowdistill::cli::Latency;
use flowdistill::studentnet::{NetConfig, StudentNet};
use flowdistill::synthdata::{generate_sequence, Motion, SceneSpec, TextureKind};
use flowdistill::FramePair;

fn time(net: &StudentNet, pair: &FramePair, runs: usize) -> flowdistill::Result<Latency> {
    for _ in 0..3 {
        net.predict(pair)?;
    }
    let mut samples = Vec::with_capacity(runs);
    for _ in 0..runs {
        let t = Instant::now();
        net.predict(pair)?;
        samples.push(t.elapsed().as_secs_f64());
    }
    Ok(Latency::from_samples(&samples))
}

fn main() -> flowdistill::Result<()> {
    let spec = SceneSpec {
        texture: TextureKind::DensePerlin,
        motion: Motion::Translation { dx: 2.0, dy: 1.0 },
        illumination: vec![],
        frames: 2,
        width: 256,
        height: 256,
        seed: 5,
    };
    let seq = generate_sequence(&spec)?;
    let pair = FramePair::new(&seq.frames[0], &seq.frames[1])?;

    let student = StudentNet::init(NetConfig::default())?;
    let reference = StudentNet::init(NetConfig { base_width: 46, ..NetConfig::default() })?;
    let a = time(&student, &pair, 20)?;
    let b = time(&reference, &pair, 20)?;
    println!("student   {:>8} params  median {:.2} ms", student.param_count(), a.median * 1e3);
    println!("reference {:>8} params  median {:.2} ms", reference.param_count(), b.median * 1e3);
    println!("speedup {:.2}x", b.median / a.median);
    Ok(())
}
