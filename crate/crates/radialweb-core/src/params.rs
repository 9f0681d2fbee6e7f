//! Model parameters and the derived geometric widths.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of the radial model: outer radius `n`, inner-radius fraction
/// `alpha`, angular-width exponent `delta` and jump-gap exponent `kappa`.
///
/// Derived quantities: `theta_n = n^{δ/2−1/2}` (width of the start wedge),
/// `phi_n = n^{δ−1/2}` (width of the containment wedge) and the horizontal
/// jump threshold `n^κ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n: u64,
    pub alpha: f64,
    pub delta: f64,
    pub kappa: f64,
}

impl ModelParams {
    pub fn new(n: u64, alpha: f64, delta: f64, kappa: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("n must be positive".into()));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter(format!("alpha must lie in (0,1), got {alpha}")));
        }
        if !(delta > 0.25 && delta < 1.0 / 3.0) {
            return Err(Error::InvalidParameter(format!(
                "delta must lie in (1/4, 1/3), got {delta}"
            )));
        }
        if !(kappa > 0.0 && kappa < 0.5 - delta) {
            return Err(Error::InvalidParameter(format!(
                "kappa must lie in (0, 1/2 - delta) = (0, {}), got {kappa}",
                0.5 - delta
            )));
        }
        let p = ModelParams { n, alpha, delta, kappa };
        if p.base_circle() < 1 {
            return Err(Error::InvalidParameter(format!(
                "degenerate geometry: floor(n*alpha) = {} must be >= 1",
                p.base_circle()
            )));
        }
        Ok(p)
    }

    /// Start-wedge angular width, n^{δ/2−1/2}.
    pub fn theta_n(&self) -> f64 {
        (self.n as f64).powf(self.delta / 2.0 - 0.5)
    }

    /// Containment-wedge angular width, n^{δ−1/2}.
    pub fn phi_n(&self) -> f64 {
        (self.n as f64).powf(self.delta - 0.5)
    }

    /// Horizontal gap threshold for origin jumps, n^κ.
    pub fn gap_threshold(&self) -> f64 {
        (self.n as f64).powf(self.kappa)
    }

    /// Innermost circle that still starts paths, ⌊nα⌋.
    pub fn base_circle(&self) -> u64 {
        (self.n as f64 * self.alpha).floor() as u64
    }

    /// Innermost circle that is sampled at all, ⌊nα⌋ − 1.
    pub fn lowest_circle(&self) -> u64 {
        self.base_circle().saturating_sub(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_ranges_are_enforced() {
        assert!(ModelParams::new(100, 0.5, 0.3, 0.1).is_ok());
        assert!(ModelParams::new(0, 0.5, 0.3, 0.1).is_err());
        assert!(ModelParams::new(100, 0.0, 0.3, 0.1).is_err());
        assert!(ModelParams::new(100, 1.0, 0.3, 0.1).is_err());
        assert!(ModelParams::new(100, 0.5, 0.25, 0.1).is_err());
        assert!(ModelParams::new(100, 0.5, 0.34, 0.1).is_err());
        assert!(ModelParams::new(100, 0.5, 0.3, 0.2).is_err());
        assert!(ModelParams::new(100, 0.5, 0.3, 0.0).is_err());
        // floor(n*alpha) must be at least 1
        assert!(ModelParams::new(2, 0.26, 0.3, 0.1).is_err());
    }

    #[test]
    fn derived_widths() {
        let p = ModelParams::new(10_000, 0.5, 0.3, 0.1).unwrap();
        assert!((p.theta_n() - (1e4_f64).powf(-0.35)).abs() < 1e-15);
        assert!((p.phi_n() - (1e4_f64).powf(-0.2)).abs() < 1e-15);
        assert!(p.theta_n() < p.phi_n());
        assert_eq!(p.base_circle(), 5000);
        assert_eq!(p.lowest_circle(), 4999);
    }
}
