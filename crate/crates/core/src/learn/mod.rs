//! Downstream learners on graphs: label propagation and diffusion denoising.

mod diffusion;
mod io;
mod llgc;

pub use diffusion::magic_denoise;
pub use io::{read_labels_csv, write_labels_csv, write_likelihood_csv};
pub use llgc::{
    accuracy, llgc_gradient, llgc_objective, llgc_solve, llgc_stationarity, predict, LabelMatrix, Likelihood,
    Prediction,
};

/// Default fitting weight for [`llgc_solve`].
pub const DEFAULT_MU: f64 = 0.1;
