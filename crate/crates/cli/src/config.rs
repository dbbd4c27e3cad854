//! JSON run configurations.
//!
//! Every physical field name carries its unit as a suffix (`_ps`,
//! `_rad_per_s`, `_mm`, `_nm`); unknown fields are rejected so a value in
//! the wrong unit cannot slip through under a near-miss name. Counts,
//! seeds and fractions are the only bare numbers.

use entrocert_core::acquisition::{CampaignConfig, TimingSimConfig};
use entrocert_core::filters::{FilterBank, FilterProfile, FilterShape};
use entrocert_core::spdc::{GridSpec, SpdcParams};
use entrocert_core::units::GAUSSIAN_FWHM_PER_SIGMA;
use entrocert_core::witness::Inequality;
use serde::Deserialize;

use crate::CliError;

fn default_wing_fraction() -> f64 {
    0.1
}

fn default_resamples() -> usize {
    200
}

/// Top-level config for `certify` and `simulate`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub inequality: Option<Inequality>,
    #[serde(default = "default_resamples")]
    pub resamples: usize,
    #[serde(default)]
    pub seed: u64,
    /// Fraction of histogram bins per side treated as background wings.
    #[serde(default = "default_wing_fraction")]
    pub wing_fraction: f64,
    pub bank_a: BankSpec,
    pub bank_b: BankSpec,
    #[serde(default)]
    pub measured: Option<MeasuredSpec>,
    #[serde(default)]
    pub campaign: Option<CampaignSpec>,
}

/// Paths to already-acquired data. The banks in the parent config supply
/// the frequency lattice and the majorization evidence for these counts.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasuredSpec {
    pub timing_histogram_csv: String,
    pub joint_counts_csv: String,
}

/// Synthetic campaign parameters.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignSpec {
    pub pairs: u64,
    #[serde(default)]
    pub background_rate_per_cell: f64,
    /// Uniform per-filter center jitter, in units of each filter's FWHM.
    #[serde(default)]
    pub center_jitter_fwhm: f64,
    /// Uniform per-filter width scale jitter, drawn from [1-e, 1+e].
    #[serde(default)]
    pub width_jitter: f64,
    pub source: SourceSpec,
    /// Explicit quadrature grid. When present the campaign runs on the
    /// dense-grid sampler; when absent the analytic narrowband path is
    /// used, which requires jitter-free Lorentzian combs.
    #[serde(default)]
    pub grid: Option<GridSpecConfig>,
    #[serde(default)]
    pub timing: Option<TimingSpec>,
}

/// Two-photon Gaussian source model.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub pump_center_rad_per_s: f64,
    pub pump_sigma_rad_per_s: f64,
    pub phasematch_sigma_rad_per_s: f64,
    #[serde(default = "SourceSpec::default_crystal_length")]
    pub crystal_length_mm: f64,
    #[serde(default = "SourceSpec::default_gvd")]
    pub gvd_fs2_per_mm: f64,
    #[serde(default)]
    pub detector_jitter_a_ps: f64,
    #[serde(default)]
    pub detector_jitter_b_ps: f64,
}

impl SourceSpec {
    fn default_crystal_length() -> f64 {
        20.0
    }

    fn default_gvd() -> f64 {
        292.0
    }

    pub fn to_params(&self, timebin_s: f64) -> SpdcParams {
        SpdcParams {
            pump_center: self.pump_center_rad_per_s,
            pump_sigma: self.pump_sigma_rad_per_s,
            phasematch_sigma: self.phasematch_sigma_rad_per_s,
            crystal_length_mm: self.crystal_length_mm,
            gvd_fs2_per_mm: self.gvd_fs2_per_mm,
            jitter_a: self.detector_jitter_a_ps * 1e-12,
            jitter_b: self.detector_jitter_b_ps * 1e-12,
            timebin: timebin_s,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpecConfig {
    pub arm_halfspan_rad_per_s: f64,
    pub points: usize,
}

impl GridSpecConfig {
    pub fn to_spec(&self) -> GridSpec {
        GridSpec {
            arm_halfspan: self.arm_halfspan_rad_per_s,
            points: self.points,
        }
    }
}

/// Timing arm of a simulated campaign.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingSpec {
    /// Observed Gaussian FWHM of the arrival-time difference.
    pub observed_fwhm_ps: f64,
    pub bin_ps: f64,
    pub window_halfwidth_ps: f64,
    #[serde(default)]
    pub background_per_bin: f64,
}

impl TimingSpec {
    pub fn to_sim(&self) -> TimingSimConfig {
        TimingSimConfig {
            sigma_observed: self.observed_fwhm_ps * 1e-12 / GAUSSIAN_FWHM_PER_SIGMA,
            bin_width: self.bin_ps * 1e-12,
            window_halfwidth: self.window_halfwidth_ps * 1e-12,
            background_per_bin: self.background_per_bin,
        }
    }
}

/// One filter bank: a regular comb of identical filters, optionally
/// overridden by an explicit list of realized filters on the same nominal
/// lattice.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BankSpec {
    pub shape: ShapeName,
    #[serde(default)]
    pub fwhm_rad_per_s: Option<f64>,
    #[serde(default)]
    pub sigma_rad_per_s: Option<f64>,
    #[serde(default)]
    pub width_rad_per_s: Option<f64>,
    pub first_center_rad_per_s: f64,
    pub spacing_rad_per_s: f64,
    #[serde(default)]
    pub count: Option<usize>,
    /// Realized filters, e.g. a surveyed drifting bank. Centers are
    /// required; widths default to the bank-level values.
    #[serde(default)]
    pub filters: Option<Vec<FilterOverride>>,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ShapeName {
    Lorentzian,
    Gaussian,
    Tophat,
    Voigt,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterOverride {
    pub center_rad_per_s: f64,
    #[serde(default)]
    pub fwhm_rad_per_s: Option<f64>,
    #[serde(default)]
    pub sigma_rad_per_s: Option<f64>,
    #[serde(default)]
    pub width_rad_per_s: Option<f64>,
}

impl BankSpec {
    fn shape(
        &self,
        fwhm: Option<f64>,
        sigma: Option<f64>,
        width: Option<f64>,
    ) -> Result<FilterShape, CliError> {
        let need = |v: Option<f64>, field: &str| {
            v.ok_or_else(|| {
                CliError::input(format!("{:?} filters need `{field}`", self.shape))
            })
        };
        Ok(match self.shape {
            ShapeName::Lorentzian => FilterShape::Lorentzian {
                fwhm: need(fwhm, "fwhm_rad_per_s")?,
            },
            ShapeName::Gaussian => FilterShape::Gaussian {
                sigma: need(sigma, "sigma_rad_per_s")?,
            },
            ShapeName::Tophat => FilterShape::TopHat {
                width: need(width, "width_rad_per_s")?,
            },
            ShapeName::Voigt => FilterShape::Voigt {
                fwhm_lorentz: need(fwhm, "fwhm_rad_per_s")?,
                sigma_gauss: need(sigma, "sigma_rad_per_s")?,
            },
        })
    }

    /// True when the bank is an exact comb of identical filters, in which
    /// case every per-filter weight is 1 by symmetry.
    pub fn is_uniform(&self) -> bool {
        self.filters.is_none()
    }

    pub fn build(&self) -> Result<FilterBank, CliError> {
        let nominal_shape = self.shape(
            self.fwhm_rad_per_s,
            self.sigma_rad_per_s,
            self.width_rad_per_s,
        )?;
        match &self.filters {
            None => {
                let count = self
                    .count
                    .ok_or_else(|| CliError::input("bank needs `count` or `filters`"))?;
                FilterBank::regular(
                    nominal_shape,
                    self.first_center_rad_per_s,
                    self.spacing_rad_per_s,
                    count,
                )
                .map_err(CliError::from)
            }
            Some(overrides) => {
                if let Some(count) = self.count {
                    if count != overrides.len() {
                        return Err(CliError::input(format!(
                            "bank `count` {count} disagrees with {} realized filters",
                            overrides.len()
                        )));
                    }
                }
                let mut profiles = Vec::with_capacity(overrides.len());
                let mut nominal = Vec::with_capacity(overrides.len());
                for (i, f) in overrides.iter().enumerate() {
                    let shape = self.shape(
                        f.fwhm_rad_per_s.or(self.fwhm_rad_per_s),
                        f.sigma_rad_per_s.or(self.sigma_rad_per_s),
                        f.width_rad_per_s.or(self.width_rad_per_s),
                    )?;
                    profiles.push(FilterProfile::new(shape, f.center_rad_per_s)?);
                    nominal.push(
                        self.first_center_rad_per_s + i as f64 * self.spacing_rad_per_s,
                    );
                }
                FilterBank::new(profiles, self.spacing_rad_per_s, nominal)
                    .map_err(CliError::from)
            }
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        match (&self.measured, &self.campaign) {
            (Some(_), Some(_)) => Err(CliError::input(
                "config sets both `measured` and `campaign`; pick one",
            )),
            (None, None) => Err(CliError::input(
                "config needs either `measured` paths or a `campaign` section",
            )),
            _ => Ok(()),
        }
    }

    pub fn campaign_config(&self, seed: u64) -> Result<CampaignConfig, CliError> {
        let campaign = self
            .campaign
            .as_ref()
            .ok_or_else(|| CliError::input("config has no `campaign` section"))?;
        Ok(CampaignConfig {
            total_pairs: campaign.pairs,
            bank_a: self.bank_a.build()?,
            bank_b: self.bank_b.build()?,
            center_jitter_fwhm: campaign.center_jitter_fwhm,
            width_jitter: campaign.width_jitter,
            rng_seed: seed,
            background_rate: campaign.background_rate_per_cell,
            timing: campaign.timing.as_ref().map(TimingSpec::to_sim),
        })
    }
}

/// Bank manifest for `filters-check`: a bare [`BankSpec`].
pub fn load_bank_manifest(text: &str) -> Result<BankSpec, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::input(format!("bank manifest: {e}")))
}

pub fn load_run_config(text: &str) -> Result<RunConfig, CliError> {
    let cfg: RunConfig =
        serde_json::from_str(text).map_err(|e| CliError::input(format!("config: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}
