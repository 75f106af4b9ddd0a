//! The whole distillation loop at reduced size: pre-train a student on the
//! generic regime, fine-tune it on a narrow target regime with gold flow from a
//! (deliberately imperfect) teacher, and compare test EPE* before and after.
//!
//! ```text
//! cargo run --release --example distill_pipeline -- rotation
//! ```
//!
//! Runs in a few minutes on one core. The acceptance suite runs the same
//! protocol on the full 220-pair regimes.

use flowdistill::distill::{evaluate, fine_tune, fine_tune_observed, generate_gold, AnalyticTeacher, FineTuneConfig, NoisyTeacher};
use flowdistill::studentnet::{AdamConfig, NetConfig, StudentNet};
use flowdistill::synthdata::{build_regime, regime_spec, Regime};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let target = Regime::parse(&std::env::args().nth(1).unwrap_or_else(|| "rotation".into()))?;
    let adam = AdamConfig { lr: 1e-3, ..AdamConfig::default() };

    let mut generic = regime_spec(Regime::Generic, 0);
    generic.frames = 81;
    let g = build_regime(Regime::Generic, generic)?;
    let generic_ds = generate_gold(g.dataset, &AnalyticTeacher::new(g.ground_truth))?;
    let pretrain = FineTuneConfig { max_epochs: 15, patience: usize::MAX, adam, ..FineTuneConfig::default() };
    let student = fine_tune(StudentNet::init(NetConfig::default())?, &generic_ds, &pretrain)?.net;

    let mut spec = regime_spec(target, 0);
    spec.frames = 81;
    let t = build_regime(target, spec)?;
    // the teacher is accurate but not exact: smooth gaussian noise of 0.05 px
    let teacher = NoisyTeacher::new(AnalyticTeacher::new(t.ground_truth), 0.05, 2.0, 1)?;
    let target_ds = generate_gold(t.dataset, &teacher)?;

    let before = evaluate(&student, &target_ds, 0)?;
    let cfg = FineTuneConfig { adam, ..FineTuneConfig::default() };
    let outcome = fine_tune_observed(student, &target_ds, &cfg, |e| {
        if let Some(v) = e.val_loss {
            println!("epoch {:3}  train {:.4}  val {v:.4}", e.epoch, e.train_loss);
        }
    })?;
    let after = evaluate(&outcome.net, &target_ds, 0)?;

    println!("{}", outcome.log.summary());
    println!("generic student  EPE* {:.4}", before.mean);
    println!("fine-tuned       EPE* {:.4}", after.mean);
    println!("reduction        {:.1}%", 100.0 * (1.0 - after.mean / before.mean));
    Ok(())
}
