//! Benchmark harness: reconstruction metrics, a Gaussian testbed with an
//! exact posterior, convergence sweeps, `n_l` ablations, timing and 16-bit
//! PGM quick-looks.

mod metrics;
mod pgm;
mod sweep;
mod testbed;

pub use metrics::{metrics, nmse, psnr, ssim, MetricsReport, PSNR_CAP, SSIM_K1, SSIM_K2, SSIM_SIGMA, SSIM_WINDOW};
pub use pgm::{quantize, read_pgm16, write_pgm16, PgmScale};
pub use sweep::{
    ablation_nl, convergence_sweep, dedup_nl, read_csv, run_chain, time_reconstructions, timing_report, write_csv,
    AblationConfig, AblationRow, ChainResult, RowStatus, SweepConfig, SweepRow, TimingRow, TimingRun,
};
pub use testbed::{GaussianTestbed, Testbed, TestbedConfig, TrainedTestbed};
