//! Model of a type-0/type-I SPDC biphoton source and its detection chain.
//!
//! The joint spectrum is Gaussian in the rotated coordinates
//! `s = omega_A + omega_B` and `d = omega_A - omega_B`: the pump linewidth
//! sets the spread of `s`, phase matching the spread of `d`. Only the two
//! second moments are pinned by the source physics, and the Gaussian is the
//! maximum-entropy density consistent with them, so using it never
//! understates the entropies we later try to bound.
//!
//! Timing: the intrinsic arrival-time difference spread follows from crystal
//! length and group-velocity dispersion; detector jitters add in quadrature.
//! All times are seconds, frequencies rad/s; crystal length and dispersion
//! keep their customary lab units (mm, fs^2/mm) and are converted here.

use crate::error::{Error, Result};
use crate::probcore::Grid2D;
use crate::units::GAUSSIAN_FWHM_PER_SIGMA;

/// Source and detector-chain parameters. Frequencies are rad/s, times
/// seconds; `pump_sigma` is the RMS width of `omega_A + omega_B` and
/// `phasematch_sigma` that of `omega_A - omega_B`.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SpdcParams {
    pub pump_center: f64,
    pub pump_sigma: f64,
    pub phasematch_sigma: f64,
    pub crystal_length_mm: f64,
    pub gvd_fs2_per_mm: f64,
    pub jitter_a: f64,
    pub jitter_b: f64,
    pub timebin: f64,
}

impl SpdcParams {
    /// Check positivity and return non-fatal advisories. An uncorrelated
    /// regime (pump band at least as wide as the phase-matching band) is
    /// legitimate for control runs, so it warns instead of failing.
    pub fn validate(&self) -> Result<Vec<String>> {
        let positives = [
            ("pump_center", self.pump_center),
            ("pump_sigma", self.pump_sigma),
            ("phasematch_sigma", self.phasematch_sigma),
            ("crystal_length_mm", self.crystal_length_mm),
            ("gvd_fs2_per_mm", self.gvd_fs2_per_mm),
            ("timebin", self.timebin),
        ];
        for (name, v) in positives {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        for (name, v) in [("jitter_a", self.jitter_a), ("jitter_b", self.jitter_b)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be non-negative and finite, got {v}"
                )));
            }
        }
        let mut warnings = Vec::new();
        if self.pump_sigma >= self.phasematch_sigma {
            warnings.push(format!(
                "pump_sigma {} >= phasematch_sigma {}: arms are uncorrelated or \
                 anti-correlated in time only; no frequency entanglement to certify",
                self.pump_sigma, self.phasematch_sigma
            ));
        }
        Ok(warnings)
    }

    /// RMS width of each arm's marginal spectrum, `sqrt(s^2 + d^2)/2`.
    pub fn arm_sigma(&self) -> f64 {
        (self.pump_sigma * self.pump_sigma + self.phasematch_sigma * self.phasematch_sigma).sqrt()
            / 2.0
    }

    /// Timing model implied by the crystal and the configured jitters.
    pub fn timing(&self) -> Result<TimingModel> {
        let intrinsic = intrinsic_timing_sigma(self.crystal_length_mm, self.gvd_fs2_per_mm)?;
        observed_timing_sigma(intrinsic, self.jitter_a, self.jitter_b)
    }
}

/// Widths of the arrival-time-difference distribution, all in seconds.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct TimingModel {
    pub sigma_intrinsic: f64,
    pub sigma_observed: f64,
    pub fwhm_observed: f64,
}

/// Intrinsic spread of `t_A - t_B` from phase matching:
/// `sqrt(0.9 * l_z * kappa)`, converted from fs to seconds.
pub fn intrinsic_timing_sigma(crystal_length_mm: f64, gvd_fs2_per_mm: f64) -> Result<f64> {
    if !(crystal_length_mm > 0.0) || !(gvd_fs2_per_mm > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "crystal length {crystal_length_mm} mm and dispersion {gvd_fs2_per_mm} fs^2/mm \
             must both be positive"
        )));
    }
    let fs = (0.9 * crystal_length_mm * gvd_fs2_per_mm).sqrt();
    Ok(fs * 1e-15)
}

/// Combine the intrinsic spread with two independent Gaussian detector
/// jitters in quadrature.
pub fn observed_timing_sigma(intrinsic: f64, jitter_a: f64, jitter_b: f64) -> Result<TimingModel> {
    for (name, v) in [
        ("intrinsic", intrinsic),
        ("jitter_a", jitter_a),
        ("jitter_b", jitter_b),
    ] {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "{name} must be non-negative and finite, got {v}"
            )));
        }
    }
    let sigma = (intrinsic * intrinsic + jitter_a * jitter_a + jitter_b * jitter_b).sqrt();
    Ok(TimingModel {
        sigma_intrinsic: intrinsic,
        sigma_observed: sigma,
        fwhm_observed: GAUSSIAN_FWHM_PER_SIGMA * sigma,
    })
}

/// Largest possible differential entropy of any density with RMS width
/// `sigma`: `log2(2 pi e sigma^2) / 2` bits.
pub fn gaussian_max_entropy(sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    Ok(0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * sigma * sigma).log2())
}

/// [`gaussian_max_entropy`] parameterized by the Gaussian FWHM instead:
/// `log2(pi e FWHM^2 / (4 ln 2)) / 2` bits.
pub fn gaussian_max_entropy_fwhm(fwhm: f64) -> Result<f64> {
    if !(fwhm > 0.0) || !fwhm.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "fwhm must be positive, got {fwhm}"
        )));
    }
    let arg = std::f64::consts::PI * std::f64::consts::E * fwhm * fwhm
        / (4.0 * std::f64::consts::LN_2);
    Ok(0.5 * arg.log2())
}

/// Differential entropy of a Lorentzian line with the given FWHM:
/// `log2(2 pi FWHM)` bits. A Lorentzian has no finite variance, so the
/// Gaussian max-entropy formulas never apply to it; this closed form is the
/// exact entropy of the shape itself.
pub fn lorentzian_entropy(fwhm: f64) -> Result<f64> {
    if !(fwhm > 0.0) || !fwhm.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "fwhm must be positive, got {fwhm}"
        )));
    }
    Ok((2.0 * std::f64::consts::PI * fwhm).log2())
}

/// Geometry for sampling the joint spectrum: each arm's axis covers
/// `pump_center/2 +- arm_halfspan` with `points` cells.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct GridSpec {
    pub arm_halfspan: f64,
    pub points: usize,
}

/// Joint spectral density on an (omega_A, omega_B) grid: Gaussian with RMS
/// `pump_sigma` along the sum coordinate and `phasematch_sigma` along the
/// difference. The grid must resolve the narrower of the two with at least
/// 20 points.
pub fn joint_spectral_density(p: &SpdcParams, spec: &GridSpec) -> Result<Grid2D> {
    p.validate()?;
    if spec.points == 0 || !(spec.arm_halfspan > 0.0) {
        return Err(Error::InvalidGrid(format!(
            "need a positive halfspan and point count, got {} and {}",
            spec.arm_halfspan, spec.points
        )));
    }
    let step = 2.0 * spec.arm_halfspan / spec.points as f64;
    let narrow = p.pump_sigma.min(p.phasematch_sigma);
    let points_per_feature = narrow / step;
    if points_per_feature < 20.0 {
        return Err(Error::UnderResolved {
            points: points_per_feature,
            required: 20.0,
        });
    }
    let start = p.pump_center / 2.0 - spec.arm_halfspan;
    let (wp, sp, sm) = (p.pump_center, p.pump_sigma, p.phasematch_sigma);
    Grid2D::from_fn(start, step, spec.points, start, step, spec.points, |wa, wb| {
        let s = (wa + wb - wp) / sp;
        let d = (wa - wb) / sm;
        (-0.5 * (s * s + d * d)).exp()
    })
}
