//! Nonlinear least squares and the concrete spectrum fits built on it.

mod linear;
mod lm;
mod odmr;

pub use linear::{fit_zero_crossing, ZeroCrossingFit, DEFAULT_WINDOW_FRACTION};
pub use lm::{nlls_fit, DataPoint, FitOptions, FitResult, FnModel, Model};
pub use odmr::{fit_odmr_spectrum, initial_guess, OdmrFit, OdmrFitOptions, OdmrModel, WidthMode};
