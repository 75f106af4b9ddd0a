//! Generate one synthetic regime, attach its exact flows as gold truth through
//! the analytic teacher and save it in the on-disk dataset layout.
//!
//! ```text
//! cargo run --release --example gen_dataset -- sparse /tmp/sparse_ds
//! ```

use flowdistill::distill::{generate_gold, AnalyticTeacher, SequenceDataset};
use flowdistill::synthdata::{build_regime, regime_spec, Regime};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let regime = Regime::parse(&args.next().unwrap_or_else(|| "rotation".into()))?;
    let out = args.next().unwrap_or_else(|| format!("{}_ds", regime.name()));

    let mut spec = regime_spec(regime, 7);
    spec.frames = 41; // a short excerpt; the full regime has 221 frames
    let data = build_regime(regime, spec)?;
    let ds = generate_gold(data.dataset, &AnalyticTeacher::new(data.ground_truth))?;
    ds.save(&out)?;

    let back = SequenceDataset::load(&out)?;
    let split = back.split();
    println!(
        "{out}: {} pairs at {}x{}, split {}/{}/{}",
        back.pair_count(),
        back.width(),
        back.height(),
        split.train.len(),
        split.val.len(),
        split.test.len()
    );
    println!("provenance: {}", back.provenance());
    Ok(())
}
