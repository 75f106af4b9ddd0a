//! The five subcommands. Each returns a human-readable report on success.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use super::config::RunConfig;
use crate::distill::{
    evaluate, fine_tune_observed, generate_gold, AnalyticTeacher, FlowPredictor, SequenceDataset, TeacherPredictor, ZeroFlow,
};
use crate::flowcore::{crop_to_multiple, flow_to_color, write_image};
use crate::studentnet::{load_checkpoint, save_checkpoint, NetConfig, StudentNet};
use crate::synthdata::{build_regime, generate_sequence, regime_spec, Illumination, Motion, Regime, SceneSpec, TextureKind};
use crate::warp::{mesh_drift, render_mesh_overlay, stabilization_error, track_mesh, write_trajectory_csv, TrackedMesh};
use crate::{Error, FlowField, FramePair, ImageFrame, Result};

fn write_text(path: &Path, body: &str) -> Result<()> {
    std::fs::write(path, body).map_err(|e| Error::io(path, e))
}

fn make_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// The output directory, refusing to write into the input dataset.
fn out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let out = cfg.path("out")?;
    if let Some(data) = cfg.get("data") {
        let same = match (std::fs::canonicalize(data), std::fs::canonicalize(&out)) {
            (Ok(a), Ok(b)) => a == b,
            _ => Path::new(data) == out,
        };
        if same {
            return Err(Error::InvalidConfig("--out must differ from --data; inputs are never modified".into()));
        }
    }
    make_dir(&out)?;
    Ok(out)
}

pub fn cmd_gen(cfg: &RunConfig) -> Result<String> {
    let regime = Regime::parse(cfg.require("regime")?)?;
    let seed = cfg.u64("seed")?;
    let mut spec = regime_spec(regime, seed);
    if let Some(frames) = cfg.opt_usize("frames")? {
        spec.frames = frames;
    }
    spec.illumination = match cfg.require("illumination")? {
        "default" => spec.illumination,
        "none" => vec![],
        "gain-ramp" => vec![Illumination::GainRamp { factor: cfg.f64("gain_factor")?, period: cfg.usize("gain_period")? }],
        "vignette" => vec![Illumination::Vignette { strength: 0.4 }],
        "specular" => vec![Illumination::Specular { count: 3, radius: 4.0, intensity: 0.5 }],
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown illumination `{other}`; expected default, none, gain-ramp, vignette or specular"
            )))
        }
    };
    let out = out_dir(cfg)?;
    let data = build_regime(regime, spec)?;
    let ds = generate_gold(data.dataset, &AnalyticTeacher::new(data.ground_truth))?;
    ds.save(&out)?;
    let s = ds.split();
    Ok(format!(
        "wrote {} frames of regime {} ({} train / {} val / {} test pairs) to {}",
        ds.frames().len(),
        regime.name(),
        s.train.len(),
        s.val.len(),
        s.test.len(),
        out.display()
    ))
}

fn load_dataset(cfg: &RunConfig) -> Result<SequenceDataset> {
    SequenceDataset::load(cfg.existing_dir("data")?)
}

fn require_gold(ds: &SequenceDataset, dir: &str) -> Result<()> {
    if ds.gold().is_none() {
        return Err(Error::Dataset(format!(
            "`{dir}` has no gold/ flows; run generate_gold with a teacher first (for synthetic data: flowdistill gen)"
        )));
    }
    Ok(())
}

pub fn cmd_distill(cfg: &RunConfig) -> Result<String> {
    let ds = load_dataset(cfg)?;
    require_gold(&ds, cfg.require("data")?)?;
    let net = match cfg.get("init") {
        Some(p) => load_checkpoint(p)?,
        None => StudentNet::init(cfg.net_config()?)?,
    };
    let ft = cfg.fine_tune_config()?;
    let out = out_dir(cfg)?;
    let outcome = fine_tune_observed(net, &ds, &ft, |e| {
        let val = e.val_loss.map(|v| format!(" val {v:.5}")).unwrap_or_default();
        eprintln!("epoch {:3} train {:.5}{val} ({:.1}s)", e.epoch, e.train_loss, e.elapsed);
    })?;
    save_checkpoint(&outcome.net, out.join("student.ckpt"))?;
    outcome.log.write(&out)?;
    write_text(&out.join("timing.csv"), &outcome.timing.to_csv())?;
    let mut report = outcome.log.summary();
    writeln!(report, "wall_seconds = {:.1}", outcome.timing.total_seconds).unwrap();
    writeln!(report, "checkpoint = {}", out.join("student.ckpt").display()).unwrap();
    Ok(report)
}

enum Model {
    Teacher(AnalyticTeacher),
    Zero,
    Student(StudentNet),
}

impl Model {
    /// `teacher` replays the dataset's gold flows, `zero` predicts no motion, anything else is a checkpoint.
    fn resolve(cfg: &RunConfig, ds: &SequenceDataset) -> Result<Model> {
        Ok(match cfg.require("model")? {
            "teacher" => {
                require_gold(ds, cfg.require("data")?)?;
                Model::Teacher(AnalyticTeacher::new(ds.gold().expect("checked").to_vec()))
            }
            "zero" => Model::Zero,
            path => Model::Student(load_checkpoint(path)?),
        })
    }

    fn with_predictor<T>(&self, f: impl FnOnce(&dyn FlowPredictor) -> T) -> T {
        match self {
            Model::Teacher(t) => f(&TeacherPredictor(t)),
            Model::Zero => f(&ZeroFlow),
            Model::Student(n) => f(n),
        }
    }
}

fn read_metrics(dir: &Path) -> Result<Vec<f64>> {
    let path = dir.join("metrics.csv");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split(',')
                .nth(1)
                .and_then(|v| v.trim().parse::<f64>().ok())
                .ok_or_else(|| Error::Format(format!("{}: bad row `{l}`", path.display())))
        })
        .collect()
}

fn compare(cfg: &RunConfig, spec: &str) -> Result<String> {
    let (pre, post) = spec.split_once(',').ok_or_else(|| Error::InvalidConfig("--compare expects pre_dir,post_dir".into()))?;
    let (a, b) = (read_metrics(Path::new(pre.trim()))?, read_metrics(Path::new(post.trim()))?);
    if a.is_empty() || b.is_empty() {
        return Err(Error::Dataset("a compared evaluation has no test pairs".into()));
    }
    let stats = |v: &[f64]| -> Result<(f64, f64)> {
        let s = crate::metrics::boxplot_stats(v)?;
        Ok((v.iter().sum::<f64>() / v.len() as f64, s.median))
    };
    let ((ma, da), (mb, db)) = (stats(&a)?, stats(&b)?);
    let pct = |x: f64, y: f64| if x > 0.0 { 100.0 * (x - y) / x } else { 0.0 };
    let mut s = String::new();
    writeln!(s, "{:<12} {:>12} {:>12}", "metric", "pre", "post").unwrap();
    writeln!(s, "{:<12} {:>12} {:>12}", "pairs", a.len(), b.len()).unwrap();
    writeln!(s, "{:<12} {:>12.6} {:>12.6}", "mean_epe", ma, mb).unwrap();
    writeln!(s, "{:<12} {:>12.6} {:>12.6}", "median_epe", da, db).unwrap();
    writeln!(s, "reduction_percent = {:.2}", pct(ma, mb)).unwrap();
    let out = out_dir(cfg)?;
    write_text(&out.join("comparison.txt"), &s)?;
    Ok(s)
}

pub fn cmd_eval(cfg: &RunConfig) -> Result<String> {
    if let Some(spec) = cfg.get("compare") {
        return compare(cfg, spec);
    }
    let ds = load_dataset(cfg)?;
    require_gold(&ds, cfg.require("data")?)?;
    let model = Model::resolve(cfg, &ds)?;
    let margin = cfg.usize("margin")?;
    let out = out_dir(cfg)?;
    let report = model.with_predictor(|p| evaluate(p, &ds, margin))?;
    report.write(&out)?;
    let n_vis = cfg.usize("visualize")?;
    if n_vis > 0 {
        let dir = out.join("flow");
        make_dir(&dir)?;
        model.with_predictor(|p| -> Result<()> {
            let m = p.multiple();
            for i in ds.split().test.clone().take(n_vis) {
                let pair = ds.pair(i);
                let (a, b) = (crop_to_multiple(pair.first, m)?, crop_to_multiple(pair.second, m)?);
                let pred = p.predict(i, &FramePair::new(&a, &b)?)?;
                let gold = crop_to_multiple(ds.gold_at(i)?, m)?;
                // one normalization for both so colors are comparable
                let scale = gold.magnitudes().into_iter().fold(0.0, f64::max).max(1e-6);
                write_image(&flow_to_color(&pred, Some(scale)), dir.join(format!("{i:06}_pred.png")))?;
                write_image(&flow_to_color(&gold, Some(scale)), dir.join(format!("{i:06}_gold.png")))?;
            }
            Ok(())
        })?;
    }
    let mut s = report.summary();
    writeln!(s, "wrote {}", out.join("metrics.csv").display()).unwrap();
    Ok(s)
}

pub fn cmd_track(cfg: &RunConfig) -> Result<String> {
    let ds = load_dataset(cfg)?;
    let model = Model::resolve(cfg, &ds)?;
    let out = out_dir(cfg)?;
    let m = model.with_predictor(|p| p.multiple());
    let frames = ds.frames().iter().map(|f| crop_to_multiple(f, m)).collect::<Result<Vec<_>>>()?;
    let gold = ds.gold().map(|g| g.iter().map(|f| crop_to_multiple(f, m)).collect::<Result<Vec<FlowField>>>()).transpose()?;
    let flows = model.with_predictor(|p| {
        (0..frames.len() - 1)
            .into_par_iter()
            .map(|i| p.predict(i, &FramePair::new(&frames[i], &frames[i + 1])?))
            .collect::<Result<Vec<_>>>()
    })?;
    let (w, h) = (frames[0].width(), frames[0].height());
    let mesh = TrackedMesh::grid(w, h, cfg.usize("mesh_nx")?, cfg.usize("mesh_ny")?, cfg.f64("mesh_margin")?)?;
    let track = track_mesh(&mesh, &flows)?;
    let reference = gold.as_ref().map(|g| track_mesh(&mesh, g)).transpose()?;
    let drift = reference.as_ref().map(|r| mesh_drift(&track, r)).transpose()?;
    let photometric = stabilization_error(&frames, &flows)?;

    let overlay = out.join("overlay");
    make_dir(&overlay)?;
    frames
        .par_iter()
        .zip(&track.meshes)
        .enumerate()
        .try_for_each(|(n, (f, mesh))| write_image(&render_mesh_overlay(f, mesh), overlay.join(format!("{n:06}.png"))))?;
    write_trajectory_csv(&track, 0, out.join("trajectory.csv"))?;
    let mut csv = String::from("frame,photometric_error,mesh_drift\n");
    for (n, e) in photometric.iter().enumerate() {
        let d = drift.as_ref().map(|d| format!("{:.6}", d[n])).unwrap_or_default();
        writeln!(csv, "{n},{e:.6},{d}").unwrap();
    }
    write_text(&out.join("drift.csv"), &csv)?;

    let first = track.meshes[0].points();
    let last = track.meshes.last().expect("initial mesh").points();
    let return_error = first.iter().zip(last).map(|(a, b)| (a.0 - b.0).hypot(a.1 - b.1)).sum::<f64>() / first.len() as f64;
    let mut s = String::new();
    writeln!(s, "frames = {}", frames.len()).unwrap();
    writeln!(s, "mean_photometric_error = {:.6}", photometric.iter().sum::<f64>() / photometric.len() as f64).unwrap();
    if let Some(d) = &drift {
        writeln!(s, "mean_mesh_drift = {:.6}", d.iter().sum::<f64>() / d.len() as f64).unwrap();
        writeln!(s, "final_mesh_drift = {:.6}", d.last().copied().unwrap_or(0.0)).unwrap();
    }
    writeln!(s, "return_error = {return_error:.6}").unwrap();
    write_text(&out.join("track_summary.txt"), &s)?;
    Ok(s)
}

/// Latency statistics in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct Latency {
    pub mean: f64,
    pub median: f64,
    pub p95: f64,
}

impl Latency {
    pub fn from_samples(samples: &[f64]) -> Latency {
        let mut s = samples.to_vec();
        s.sort_by(f64::total_cmp);
        let n = s.len();
        let median = if n % 2 == 1 { s[n / 2] } else { 0.5 * (s[n / 2 - 1] + s[n / 2]) };
        let p95 = s[((0.95 * n as f64).ceil() as usize).clamp(1, n) - 1];
        Latency { mean: s.iter().sum::<f64>() / n as f64, median, p95 }
    }
}

fn param_count(cfg: NetConfig) -> Result<usize> {
    Ok(StudentNet::init(cfg)?.param_count())
}

/// The reference configuration: the student's depth and the smallest width with
/// at least eight times its parameters, unless overridden.
pub fn heavy_config(cfg: &RunConfig, student: NetConfig) -> Result<NetConfig> {
    let levels = cfg.opt_usize("heavy_levels")?.unwrap_or(student.levels);
    let base = match cfg.opt_usize("heavy_base_width")? {
        Some(w) => w,
        None => {
            let target = 8 * param_count(student)?;
            let mut w = student.base_width;
            while param_count(NetConfig { base_width: w, levels, ..student })? < target {
                w += 1;
            }
            w
        }
    };
    let heavy = NetConfig { base_width: base, levels, ..student };
    heavy.validate()?;
    Ok(heavy)
}

fn bench_pair(size: usize, channels: usize) -> Result<(ImageFrame, ImageFrame)> {
    let texture = if channels == 2 { TextureKind::DensePerlin } else { TextureKind::TissueLike { octaves: 4 } };
    let spec = SceneSpec {
        texture,
        motion: Motion::Translation { dx: 1.5, dy: -0.75 },
        illumination: vec![],
        frames: 2,
        width: size,
        height: size,
        seed: 1,
    };
    let mut seq = generate_sequence(&spec)?;
    if channels == 6 {
        for f in seq.frames.iter_mut() {
            let rgb = f.data().iter().flat_map(|&v| [v, 0.8 * v, 0.6 * v]).collect();
            *f = ImageFrame::new(size, size, 3, rgb)?;
        }
    }
    let b = seq.frames.pop().expect("two frames");
    let a = seq.frames.pop().expect("two frames");
    Ok((a, b))
}

fn time_once(net: &StudentNet, pair: &FramePair) -> Result<f64> {
    let t = Instant::now();
    net.predict(pair)?;
    Ok(t.elapsed().as_secs_f64())
}

pub fn cmd_bench(cfg: &RunConfig) -> Result<String> {
    let student_cfg = cfg.net_config()?;
    let heavy_cfg = heavy_config(cfg, student_cfg)?;
    let (size, runs, warmup) = (cfg.usize("size")?, cfg.usize("runs")?, cfg.usize("warmup")?);
    if runs == 0 {
        return Err(Error::InvalidConfig("--runs must be at least 1".into()));
    }
    let out = out_dir(cfg)?;
    let (a, b) = bench_pair(size, student_cfg.input_channels)?;
    let pair = FramePair::new(&a, &b)?;
    let models = [("student", student_cfg), ("reference", heavy_cfg)];
    let nets = models.iter().map(|(_, c)| StudentNet::init(*c)).collect::<Result<Vec<_>>>()?;
    for net in &nets {
        for _ in 0..warmup {
            net.predict(&pair)?;
        }
    }
    // alternate the models so drifting machine load hits both alike
    let mut times = vec![Vec::with_capacity(runs); nets.len()];
    for _ in 0..runs {
        for (net, t) in nets.iter().zip(times.iter_mut()) {
            t.push(time_once(net, &pair)?);
        }
    }
    let mut csv = String::from("model,params,run,seconds\n");
    let mut rows = Vec::new();
    for (((name, c), net), times) in models.iter().zip(&nets).zip(&times) {
        for (i, t) in times.iter().enumerate() {
            writeln!(csv, "{name},{},{i},{t:.6}", net.param_count()).unwrap();
        }
        rows.push((*name, *c, net.param_count(), Latency::from_samples(times)));
    }
    write_text(&out.join("bench.csv"), &csv)?;
    let mut s = String::new();
    writeln!(s, "input = {size}x{size}, warmup = {warmup} (discarded), runs = {runs} (interleaved)").unwrap();
    for (name, c, params, l) in &rows {
        writeln!(
            s,
            "{name}: base_width {} levels {} params {params} mean {:.6}s median {:.6}s p95 {:.6}s",
            c.base_width, c.levels, l.mean, l.median, l.p95
        )
        .unwrap();
    }
    writeln!(s, "speedup = {:.3}", rows[1].3.median / rows[0].3.median).unwrap();
    write_text(&out.join("bench_summary.txt"), &s)?;
    Ok(s)
}
