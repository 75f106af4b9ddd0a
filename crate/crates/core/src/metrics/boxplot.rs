use std::fmt::Write as _;

use crate::{Error, Result};

/// Five-number boxplot summary with Tukey whiskers at 1.5 IQR.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxplotStats {
    pub n: usize,
    pub median: f64,
    pub lower_quartile: f64,
    pub upper_quartile: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
}

/// Quantile of an ascending sample at rank `q * (n - 1)`; a fractional rank takes the
/// midpoint of its two neighbours.
pub fn quantile_midpoint(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        0.5 * (sorted[lo] + sorted[hi])
    }
}

pub fn boxplot_stats(samples: &[f64]) -> Result<BoxplotStats> {
    if samples.is_empty() {
        return Err(Error::Dataset("boxplot of an empty sample".into()));
    }
    if samples.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("boxplot sample is not finite".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile_midpoint(&sorted, 0.25);
    let median = quantile_midpoint(&sorted, 0.5);
    let q3 = quantile_midpoint(&sorted, 0.75);
    let iqr = q3 - q1;
    let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inside = || sorted.iter().copied().filter(|&s| s >= lo_fence && s <= hi_fence);
    // with every sample outside the fences the whiskers collapse onto the box
    let whisker_low = inside().reduce(f64::min).unwrap_or(q1);
    let whisker_high = inside().reduce(f64::max).unwrap_or(q3);
    let outliers = sorted.iter().copied().filter(|&s| s < lo_fence || s > hi_fence).collect();
    Ok(BoxplotStats { n: sorted.len(), median, lower_quartile: q1, upper_quartile: q3, whisker_low, whisker_high, outliers })
}

impl BoxplotStats {
    /// Plain-text `key = value` lines.
    pub fn summary(&self, mean: f64) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "n = {}", self.n);
        let _ = writeln!(s, "mean = {mean:.6}");
        let _ = writeln!(s, "median = {:.6}", self.median);
        let _ = writeln!(s, "lower_quartile = {:.6}", self.lower_quartile);
        let _ = writeln!(s, "upper_quartile = {:.6}", self.upper_quartile);
        let _ = writeln!(s, "whisker_low = {:.6}", self.whisker_low);
        let _ = writeln!(s, "whisker_high = {:.6}", self.whisker_high);
        let outliers: Vec<String> = self.outliers.iter().map(|o| format!("{o:.6}")).collect();
        let _ = writeln!(s, "outliers = {}", outliers.join(","));
        s
    }
}
