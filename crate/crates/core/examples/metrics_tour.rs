//! Endpoint error, SSIM and boxplot summaries on small hand-built inputs.

use flowdistill::metrics::{boxplot_stats, epe_map, epe_mean, ssim};
use flowdistill::{FlowField, ImageFrame};

fn main() -> flowdistill::Result<()> {
    // a (3, 4) displacement error is 5 px everywhere
    let gold = FlowField::zeros(8, 8);
    let pred = FlowField::constant(8, 8, 3.0, 4.0)?;
    println!("EPE of a 3-4-5 offset: {}", epe_mean(&pred, &gold)?);

    // errors that grow towards the right edge
    let ramp = FlowField::from_fn(8, 8, |x, _| (x as f64 * 0.25, 0.0))?;
    let per_pixel = epe_map(&ramp, &gold)?;
    let stats = boxplot_stats(&per_pixel)?;
    let mean = per_pixel.iter().sum::<f64>() / per_pixel.len() as f64;
    println!("{}", stats.summary(mean));

    let data: Vec<f32> = (0..32 * 32).map(|i| (i % 32) as f32 / 31.0 * 0.8 + 0.1).collect();
    let a = ImageFrame::new(32, 32, 1, data.clone())?;
    let darker = ImageFrame::new(32, 32, 1, data.iter().map(|v| v * 0.7).collect())?;
    println!("SSIM identical {:.6}, darkened {:.6}", ssim(&a, &a)?, ssim(&a, &darker)?);
    Ok(())
}
