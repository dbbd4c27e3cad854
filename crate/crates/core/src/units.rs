//! Physical constants and unit conversions used throughout the crate.
//!
//! Angular frequencies are rad/s, times are seconds, lengths are meters
//! unless a name says otherwise. Entropies are bits relative to SI units.

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;

/// FWHM of a Gaussian divided by its standard deviation: `sqrt(8 ln 2)`.
pub const GAUSSIAN_FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

/// Normalization tolerance for discrete probability containers.
pub const PROB_TOL: f64 = 1e-12;

/// Normalization tolerance for gridded densities.
pub const GRID_TOL: f64 = 1e-9;

/// Slack allowed when comparing partial sums in majorization checks.
pub const MAJORIZATION_SLACK: f64 = 1e-12;

/// Convert an angular-frequency width (rad/s) at carrier wavelength
/// `lambda` (m) into the equivalent wavelength width (m).
///
/// `d_lambda = lambda^2 * d_omega / (2 pi c)`, the first-order dispersion of
/// `omega = 2 pi c / lambda`.
pub fn omega_width_to_wavelength_width(d_omega: f64, lambda: f64) -> f64 {
    lambda * lambda * d_omega / (2.0 * std::f64::consts::PI * SPEED_OF_LIGHT)
}

/// Convert a wavelength width (m) at carrier wavelength `lambda` (m) into an
/// angular-frequency width (rad/s).
pub fn wavelength_width_to_omega_width(d_lambda: f64, lambda: f64) -> f64 {
    2.0 * std::f64::consts::PI * SPEED_OF_LIGHT * d_lambda / (lambda * lambda)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fwhm_factor_matches_definition() {
        let exact = (8.0 * std::f64::consts::LN_2).sqrt();
        assert!((GAUSSIAN_FWHM_PER_SIGMA - exact).abs() < 1e-15);
    }

    #[test]
    fn wavelength_conversion_round_trips() {
        let lambda = 1.55e-6;
        let d_omega = 6.54e9;
        let d_lambda = omega_width_to_wavelength_width(d_omega, lambda);
        let back = wavelength_width_to_omega_width(d_lambda, lambda);
        assert!((back - d_omega).abs() / d_omega < 1e-14);
    }
}
