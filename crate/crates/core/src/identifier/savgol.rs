//! Savitzky–Golay first-derivative estimation at the window center.

use nalgebra::DMatrix;

use super::IdentifierError;

/// Polynomial degree used for state-derivative estimates.
pub const SG_DEGREE: usize = 5;
/// Shortest admissible window for [`sg_derivative`].
pub const SG_MIN_WINDOW: usize = 7;

/// Precomputed derivative weights for an odd window and a polynomial degree.
#[derive(Debug, Clone, PartialEq)]
pub struct SavitzkyGolay {
    window: usize,
    degree: usize,
    /// Weights for unit sample spacing.
    weights: Vec<f64>,
}

impl SavitzkyGolay {
    pub fn new(window: usize, degree: usize) -> Result<Self, IdentifierError> {
        if window % 2 == 0 {
            return Err(IdentifierError::EvenWindow(window));
        }
        if window <= degree || window < 3 {
            return Err(IdentifierError::WindowTooShort { len: window, min: (degree + 2) | 1 });
        }
        let half = (window / 2) as f64;
        // Vandermonde in integer offsets around the center
        let design = DMatrix::from_fn(window, degree + 1, |r, p| (r as f64 - half).powi(p as i32));
        let pinv = design
            .svd(true, true)
            .pseudo_inverse(1e-13)
            .map_err(|_| IdentifierError::WindowTooShort { len: window, min: degree + 1 })?;
        let raw: Vec<f64> = pinv.row(1).iter().copied().collect();
        // derivative weights are odd about the center; enforce it exactly
        let weights = (0..window).map(|k| 0.5 * (raw[k] - raw[window - 1 - k])).collect();
        Ok(Self { window, degree, weights })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Derivative at the center sample of a window spaced `dt` apart.
    pub fn derivative(&self, samples: &[f64], dt: f64) -> Result<f64, IdentifierError> {
        if samples.len() != self.window {
            return Err(IdentifierError::Dimension(format!(
                "window of {} samples, filter expects {}",
                samples.len(),
                self.window
            )));
        }
        if !(dt > 0.0) {
            return Err(IdentifierError::NonUniform);
        }
        Ok(self.weights.iter().zip(samples).map(|(w, s)| w * s).sum::<f64>() / dt)
    }
}

/// Degree-5 derivative at the center of a uniform window of at least 7 samples.
pub fn sg_derivative(window: &[f64], dt: f64) -> Result<f64, IdentifierError> {
    if window.len() < SG_MIN_WINDOW {
        return Err(IdentifierError::WindowTooShort { len: window.len(), min: SG_MIN_WINDOW });
    }
    SavitzkyGolay::new(window.len(), SG_DEGREE)?.derivative(window, dt)
}

/// As [`sg_derivative`], checking that the sample times are uniformly spaced.
pub fn sg_derivative_timed(times: &[f64], samples: &[f64]) -> Result<f64, IdentifierError> {
    if times.len() != samples.len() || times.len() < 2 {
        return Err(IdentifierError::Dimension("times and samples differ in length".into()));
    }
    let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    let uniform = times
        .windows(2)
        .all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-9 * dt.abs().max(f64::MIN_POSITIVE));
    if !uniform || !(dt > 0.0) {
        return Err(IdentifierError::NonUniform);
    }
    sg_derivative(samples, dt)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_signal_has_zero_derivative() {
        assert_eq!(sg_derivative(&[3.0; 9], 0.01).unwrap().abs() < 1e-12, true);
    }

    #[test]
    fn short_or_even_windows_are_rejected() {
        assert!(matches!(sg_derivative(&[0.0; 5], 0.1), Err(IdentifierError::WindowTooShort { .. })));
        assert!(matches!(sg_derivative(&[0.0; 8], 0.1), Err(IdentifierError::EvenWindow(8))));
    }

    #[test]
    fn non_uniform_times_are_rejected() {
        let times = [0.0, 0.1, 0.2, 0.35, 0.4, 0.5, 0.6];
        assert_eq!(sg_derivative_timed(&times, &[0.0; 7]), Err(IdentifierError::NonUniform));
    }
}
