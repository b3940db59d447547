pub mod dmft;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod random_games;
pub mod seed;

pub use error::{Error, Result};

/// Render a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".to_string()
    } else if v > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}
