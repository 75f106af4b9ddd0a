//! Accuracy measures: endpoint error, SSIM, the multi-scale L1 training loss
//! and boxplot summaries.

mod boxplot;
mod epe;
mod multiscale;
mod ssim;

pub use boxplot::{boxplot_stats, quantile_midpoint, BoxplotStats};
pub use epe::{epe_map, epe_mean, epe_mean_with_margin};
pub use multiscale::{downsample_flow, multiscale_l1_loss, multiscale_l1_loss_and_grad, FlowLevel, MultiScaleFlow};
pub use ssim::{ssim, SSIM_SIGMA, SSIM_WINDOW};
