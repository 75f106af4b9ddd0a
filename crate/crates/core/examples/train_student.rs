//! Train a small student on one translating pair and watch the multi-scale
//! loss fall. Uses the network and optimizer directly, without the
//! fine-tuning loop.

use flowdistill::studentnet::{load_checkpoint, optimizer_step, save_checkpoint, AdamConfig, NetConfig, OptimizerState, StudentNet};
use flowdistill::synthdata::{generate_sequence, Motion, SceneSpec, TextureKind};
use flowdistill::FramePair;

fn main() -> flowdistill::Result<()> {
    let spec = SceneSpec {
        texture: TextureKind::DensePerlin,
        motion: Motion::Translation { dx: 1.5, dy: -1.0 },
        illumination: vec![],
        frames: 2,
        width: 32,
        height: 32,
        seed: 11,
    };
    let seq = generate_sequence(&spec)?;
    let pair = FramePair::new(&seq.frames[0], &seq.frames[1])?;
    let gold = &seq.gt_flows[0];

    let cfg = NetConfig { base_width: 8, levels: 3, ..NetConfig::default() };
    let mut net = StudentNet::init(cfg)?;
    println!("student with {} parameters", net.param_count());
    let weights = vec![1.0; cfg.scales()];
    let mut opt = OptimizerState::new(AdamConfig { lr: 1e-3, ..AdamConfig::default() }, net.params());
    for step in 0..=300 {
        let (loss, grads) = net.backward(&pair, gold, &weights)?;
        if step % 50 == 0 {
            println!("step {step:3}  loss {loss:.4}");
        }
        optimizer_step(net.params_mut(), &grads, &mut opt)?;
    }
    let flow = net.predict(&pair)?;
    let (u, v) = flow.at(16, 16);
    println!("center prediction ({u:.2}, {v:.2}), target (1.50, -1.00)");

    let path = std::env::temp_dir().join("train_student_example.ckpt");
    save_checkpoint(&net, &path)?;
    let restored = load_checkpoint(&path)?;
    assert_eq!(restored.predict(&pair)?, flow);
    println!("checkpoint round trip ok: {}", path.display());
    Ok(())
}
