//! Plug in a teacher whose flows were computed elsewhere: any model that writes
//! one `.flo` per pair (`000000.flo`, `000001.flo`, ...) can label a dataset.
//! A custom `TeacherOracle` impl works the same way for in-process models.
//!
//! ```text
//! cargo run --release --example external_teacher -- frames_dir flo_dir out_dir
//! ```
//!
//! Without arguments a small synthetic sequence stands in for both inputs.

use std::path::PathBuf;

use flowdistill::distill::{frame_name, generate_gold, gold_name, FileTeacher, SequenceDataset};
use flowdistill::flowcore::{read_image, write_flo, write_image};
use flowdistill::synthdata::{generate_sequence, Motion, SceneSpec, TextureKind};
use flowdistill::ImageFrame;

fn demo_inputs(root: &std::path::Path) -> flowdistill::Result<(PathBuf, PathBuf)> {
    let spec = SceneSpec {
        texture: TextureKind::TissueLike { octaves: 3 },
        motion: Motion::Translation { dx: 0.7, dy: 0.2 },
        illumination: vec![],
        frames: 6,
        width: 64,
        height: 64,
        seed: 2,
    };
    let seq = generate_sequence(&spec)?;
    let (frames, flows) = (root.join("frames"), root.join("teacher"));
    for d in [&frames, &flows] {
        std::fs::create_dir_all(d).map_err(|e| flowdistill::Error::Dataset(e.to_string()))?;
    }
    for (i, f) in seq.frames.iter().enumerate() {
        write_image(f, frames.join(frame_name(i)))?;
    }
    for (i, f) in seq.gt_flows.iter().enumerate() {
        write_flo(f, flows.join(gold_name(i)))?;
    }
    Ok((frames, flows))
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (frames_dir, flo_dir, out) = match args.as_slice() {
        [f, t, o] => (PathBuf::from(f), PathBuf::from(t), PathBuf::from(o)),
        _ => {
            let root = std::env::temp_dir().join("external_teacher_demo");
            let (f, t) = demo_inputs(&root)?;
            (f, t, root.join("dataset"))
        }
    };

    let mut paths: Vec<PathBuf> = std::fs::read_dir(&frames_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "png"))
        .collect();
    paths.sort();
    let frames = paths.iter().map(read_image).collect::<flowdistill::Result<Vec<ImageFrame>>>()?;

    // 60/20/20 split of the pairs
    let n = frames.len() - 1;
    let (train, val) = (n * 3 / 5, n / 5);
    let ds = SequenceDataset::new(frames, format!("frames from {}", frames_dir.display()))?.split_dataset(train, val, n - train - val)?;
    let ds = generate_gold(ds, &FileTeacher::new(&flo_dir))?;
    ds.save(&out)?;
    println!("labelled {} pairs from {} into {}", ds.pair_count(), flo_dir.display(), out.display());
    Ok(())
}
