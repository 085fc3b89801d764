//! Metrics, baseline selectors, oracle selection and comparison reports.

mod metrics;
mod report;
mod select;

pub use metrics::{mse, psnr, ssim, PSNR_CAP_DB};
pub use report::{evaluate, MethodSummary, Selection, SelectionReport, SequenceRow};
pub use select::{frame_entropy_bits, select_ae_entropy, select_first, select_oracle, Method};
