//! Measured quantities from timestamp streams: binned-count squeezing,
//! consecutive-detection runs, HBT g²(0) and HOM visibility.

mod correlation;
mod counting;
mod hom;

pub use correlation::{coincidence_histogram, g2_zero, g2_zero_excluding, Histogram, PeakRatio, MIN_SIDE_PEAKS};
pub use counting::{
    bernoulli_runs, bin_counts, consecutive_runs, implied_efficiency, predicted_run_rate, squeezing_report,
    ImpliedEfficiency, RunCounter, RunFit, RunLengthReport, SqueezingReport, MIN_EVENTS,
};
pub use hom::{
    correct_indistinguishability, hom_simulate, hom_simulate_with, hom_visibility, noise_probability, HomReport,
    HomSetup, HomStreams, HomVisibility,
};
