//! Spectral filter profiles, top-hat dominance checks, and filter weights.
//!
//! Every profile is a normalized density over angular frequency, so a filter
//! measurement is exactly a convex smearing of the underlying spectrum. The
//! certification logic needs two facts about a filter bank with nominal
//! spacing `spacing`:
//!
//! 1. Dominance: a profile whose peak does not exceed `1/spacing` is
//!    majorized by the top-hat of width `spacing`, so sampling through it is
//!    at least as mixing as ideal binning. `majorized_by_tophat` checks this
//!    (for tabulated profiles through the full dominance curve).
//! 2. Weights: when the filters of a bank are not identical, each profile
//!    `f_n` is split against the bank mean `f` as
//!    `f_n = w_n f + (1 - w_n) r_n` with `w_n = min_x f_n(x)/f(x)` and `r_n`
//!    a valid density. The worst weight `w0` rescales discrete conditional
//!    entropies computed from the bank. Weights are meaningful only for
//!    heavy-tailed profiles; Gaussian-tailed banks with center jitter
//!    degenerate and are rejected via the ratio floor.
//!
//! Closed forms used as anchors: a Lorentzian of FWHM `a` has peak
//! `2/(pi a)`, so the narrowest passing Lorentzian for spacing `d` has
//! `a = (2/pi) d ~= 0.6366 d`; a Gaussian needs `sigma >= d / sqrt(2 pi)
//! ~= 0.3989 d`. For two Lorentzians of equal width whose centers differ by
//! `delta` half-widths, the minimal ratio is
//! `1 + delta^2/2 - delta sqrt(1 + delta^2/4)`.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::probcore::Grid1D;
use crate::quad;
use crate::units::GAUSSIAN_FWHM_PER_SIGMA;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Functional form of a filter, as a density in detuning from the center.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterShape {
    /// Flat response of total width `width`.
    TopHat { width: f64 },
    /// Lorentzian with full width at half maximum `fwhm`.
    Lorentzian { fwhm: f64 },
    /// Gaussian with standard deviation `sigma`.
    Gaussian { sigma: f64 },
    /// Convolution of a Lorentzian (`fwhm_lorentz`) with a Gaussian
    /// (`sigma_gauss`), evaluated numerically.
    Voigt { fwhm_lorentz: f64, sigma_gauss: f64 },
    /// Measured profile on a uniform detuning grid relative to the center.
    Tabulated(Grid1D),
}

/// A normalized spectral filter placed at an absolute center frequency.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct FilterProfile {
    shape: FilterShape,
    center: f64,
}

impl FilterProfile {
    pub fn new(shape: FilterShape, center: f64) -> Result<Self> {
        if !center.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "filter center must be finite, got {center}"
            )));
        }
        let positive = |name: &str, v: f64| -> Result<()> {
            if !(v > 0.0) || !v.is_finite() {
                Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
            } else {
                Ok(())
            }
        };
        match &shape {
            FilterShape::TopHat { width } => positive("top-hat width", *width)?,
            FilterShape::Lorentzian { fwhm } => positive("Lorentzian fwhm", *fwhm)?,
            FilterShape::Gaussian { sigma } => positive("Gaussian sigma", *sigma)?,
            FilterShape::Voigt {
                fwhm_lorentz,
                sigma_gauss,
            } => {
                positive("Voigt Lorentzian fwhm", *fwhm_lorentz)?;
                positive("Voigt Gaussian sigma", *sigma_gauss)?;
                let ratio = fwhm_lorentz / sigma_gauss;
                if !(1e-4..=1e4).contains(&ratio) {
                    return Err(Error::InvalidParameter(format!(
                        "Voigt width ratio {ratio:.3e} outside supported range 1e-4..1e4; \
                         use the pure Lorentzian or Gaussian kind instead"
                    )));
                }
            }
            FilterShape::Tabulated(_) => {}
        }
        Ok(Self { shape, center })
    }

    pub fn tophat(width: f64, center: f64) -> Result<Self> {
        Self::new(FilterShape::TopHat { width }, center)
    }

    pub fn lorentzian(fwhm: f64, center: f64) -> Result<Self> {
        Self::new(FilterShape::Lorentzian { fwhm }, center)
    }

    pub fn gaussian(sigma: f64, center: f64) -> Result<Self> {
        Self::new(FilterShape::Gaussian { sigma }, center)
    }

    pub fn voigt(fwhm_lorentz: f64, sigma_gauss: f64, center: f64) -> Result<Self> {
        Self::new(
            FilterShape::Voigt {
                fwhm_lorentz,
                sigma_gauss,
            },
            center,
        )
    }

    pub fn tabulated(grid: Grid1D, center: f64) -> Result<Self> {
        Self::new(FilterShape::Tabulated(grid), center)
    }

    pub fn shape(&self) -> &FilterShape {
        &self.shape
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    /// Same shape, different center.
    pub fn recentered(&self, center: f64) -> Self {
        Self {
            shape: self.shape.clone(),
            center,
        }
    }

    /// Density value at absolute frequency `omega`.
    pub fn evaluate(&self, omega: f64) -> f64 {
        let x = omega - self.center;
        match &self.shape {
            FilterShape::TopHat { width } => {
                if x.abs() <= 0.5 * width {
                    1.0 / width
                } else {
                    0.0
                }
            }
            FilterShape::Lorentzian { fwhm } => lorentzian_density(x, *fwhm),
            FilterShape::Gaussian { sigma } => gaussian_density(x, *sigma),
            FilterShape::Voigt {
                fwhm_lorentz,
                sigma_gauss,
            } => voigt_table(*fwhm_lorentz, *sigma_gauss).eval(x),
            FilterShape::Tabulated(grid) => tabulated_value(grid, x),
        }
    }

    /// Maximum density value. Analytic where a closed form exists; for the
    /// Voigt kind a coarse scan refined by golden-section search, for
    /// tabulated data the largest sample.
    pub fn peak_height(&self) -> f64 {
        match &self.shape {
            FilterShape::TopHat { width } => 1.0 / width,
            FilterShape::Lorentzian { fwhm } => 2.0 / (std::f64::consts::PI * fwhm),
            FilterShape::Gaussian { sigma } => 1.0 / (sigma * TWO_PI.sqrt()),
            FilterShape::Voigt {
                fwhm_lorentz,
                sigma_gauss,
            } => {
                // Symmetric and unimodal, so the peak sits at the center;
                // the search guards against table interpolation wiggle.
                let half = 0.5 * (fwhm_lorentz + sigma_gauss);
                let scan: Vec<f64> = (-20..=20)
                    .map(|k| {
                        let x = k as f64 / 20.0 * half;
                        self.evaluate(self.center + x)
                    })
                    .collect();
                let best = scan
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite"))
                    .map(|(i, _)| i)
                    .unwrap_or(20);
                let x0 = (best as f64 - 21.0) / 20.0 * half;
                let x1 = (best as f64 - 19.0) / 20.0 * half;
                let xm = golden_max(|x| self.evaluate(self.center + x), x0, x1);
                self.evaluate(self.center + xm)
            }
            FilterShape::Tabulated(grid) => grid
                .values()
                .iter()
                .cloned()
                .fold(0.0f64, f64::max),
        }
    }

    /// Full width at half maximum, used for window sizing and grid
    /// resolution checks. The Voigt value is the Olivero-Longbothum
    /// approximation (better than 0.02% over all width ratios).
    pub fn characteristic_fwhm(&self) -> f64 {
        match &self.shape {
            FilterShape::TopHat { width } => *width,
            FilterShape::Lorentzian { fwhm } => *fwhm,
            FilterShape::Gaussian { sigma } => GAUSSIAN_FWHM_PER_SIGMA * sigma,
            FilterShape::Voigt {
                fwhm_lorentz,
                sigma_gauss,
            } => {
                let fl = *fwhm_lorentz;
                let fg = GAUSSIAN_FWHM_PER_SIGMA * sigma_gauss;
                0.5346 * fl + (0.2166 * fl * fl + fg * fg).sqrt()
            }
            FilterShape::Tabulated(grid) => tabulated_fwhm(grid),
        }
    }
}

fn lorentzian_density(x: f64, fwhm: f64) -> f64 {
    let gamma = 0.5 * fwhm;
    gamma / (std::f64::consts::PI * (x * x + gamma * gamma))
}

fn gaussian_density(x: f64, sigma: f64) -> f64 {
    (-0.5 * (x / sigma).powi(2)).exp() / (sigma * TWO_PI.sqrt())
}

/// One-sided Lorentzian tail mass beyond `x > 0`: `(1/pi) atan(fwhm/(2x))`.
pub fn lorentzian_tail_mass(x: f64, fwhm: f64) -> f64 {
    (0.5 * fwhm / x).atan() / std::f64::consts::PI
}

fn tabulated_value(grid: &Grid1D, x: f64) -> f64 {
    let start = grid.start();
    let step = grid.step();
    let n = grid.len();
    if x < start || x >= start + grid.span() {
        return 0.0;
    }
    // Linear interpolation between cell-center samples, clamped at the ends.
    let t = (x - (start + 0.5 * step)) / step;
    if t <= 0.0 {
        return grid.values()[0];
    }
    if t >= (n - 1) as f64 {
        return grid.values()[n - 1];
    }
    let i = t.floor() as usize;
    let frac = t - i as f64;
    grid.values()[i] * (1.0 - frac) + grid.values()[i + 1] * frac
}

fn tabulated_fwhm(grid: &Grid1D) -> f64 {
    let values = grid.values();
    let (imax, &vmax) = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite"))
        .expect("non-empty grid");
    if vmax <= 0.0 {
        return grid.span();
    }
    let half = 0.5 * vmax;
    let mut left = grid.center(0);
    for i in (0..imax).rev() {
        if values[i] < half {
            let f = (half - values[i]) / (values[i + 1] - values[i]);
            left = grid.center(i) + f * grid.step();
            break;
        }
    }
    let mut right = grid.center(values.len() - 1);
    for i in imax..values.len() - 1 {
        if values[i + 1] < half {
            let f = (values[i] - half) / (values[i] - values[i + 1]);
            right = grid.center(i) + f * grid.step();
            break;
        }
    }
    (right - left).max(grid.step())
}

// ---------------------------------------------------------------------------
// Voigt evaluation.
//
// The convolution Int L(u) G(x - u) du is integrated over the window where
// the Gaussian factor lives, `|u - x| <= 9.5 sigma`, split at the Lorentzian
// core `|u| <= 40 gamma` so each piece is resolved by its own scale. The
// Lorentzian tail outside the window is killed by the Gaussian factor, so
// nothing is lost to truncation. Values are cached per
// (fwhm_lorentz, sigma_gauss) pair in a symmetric table with a linear inner
// zone and a log-spaced outer zone; beyond the table the profile is the
// Lorentzian tail with the second-order Gaussian broadening correction
// V ~= L + sigma^2 L'' / 2.
// ---------------------------------------------------------------------------

fn voigt_direct(x: f64, gamma: f64, sigma: f64) -> f64 {
    let x = x.abs();
    let w_lo = x - 9.5 * sigma;
    let w_hi = x + 9.5 * sigma;
    let core = 40.0 * gamma;
    let step_core = gamma.min(sigma) / 25.0;
    let step_rest = sigma.min(core) / 25.0;
    let pieces = [
        (w_lo, w_hi.min(-core), step_rest),
        (w_lo.max(-core), w_hi.min(core), step_core),
        (w_lo.max(core), w_hi, step_rest),
    ];
    let mut acc = 0.0;
    for (lo, hi, step) in pieces {
        if hi <= lo {
            continue;
        }
        let n = ((hi - lo) / step).ceil() as usize + 1;
        acc += quad::integrate(
            |u| lorentzian_density(u, 2.0 * gamma) * gaussian_density(x - u, sigma),
            lo,
            hi,
            n.max(9),
        );
    }
    acc
}

#[derive(Debug)]
struct VoigtTable {
    gamma: f64,
    sigma: f64,
    fine_edge: f64,
    fine_step: f64,
    fine: Vec<f64>,
    outer_edge: f64,
    log_ratio: f64,
    outer: Vec<f64>,
}

impl VoigtTable {
    fn build(fwhm_lorentz: f64, sigma: f64) -> Self {
        let gamma = 0.5 * fwhm_lorentz;
        let fine_edge = 4.0 * gamma + 12.0 * sigma;
        let fine_step = gamma.min(sigma) / 50.0;
        let outer_edge = 50.0 * gamma + 30.0 * sigma;
        // Spacing proportional to x; the profile out here varies on the
        // scale of x itself. Kept tight because linear interpolation of a
        // convex tail biases integrals high.
        let log_ratio = 1.006f64;
        let n_fine = (fine_edge / fine_step).ceil() as usize + 1;
        let n_outer = ((outer_edge / fine_edge).ln() / log_ratio.ln()).ceil() as usize + 1;
        let fine: Vec<f64> = (0..n_fine)
            .map(|i| voigt_direct(i as f64 * fine_step, gamma, sigma))
            .collect();
        let outer: Vec<f64> = (0..n_outer)
            .map(|i| voigt_direct(fine_edge * log_ratio.powi(i as i32), gamma, sigma))
            .collect();
        Self {
            gamma,
            sigma,
            fine_edge,
            fine_step,
            fine,
            outer_edge: fine_edge * log_ratio.powi((n_outer - 1) as i32),
            log_ratio,
            outer,
        }
    }

    fn eval(&self, x: f64) -> f64 {
        let ax = x.abs();
        if ax <= self.fine_edge {
            interp(&self.fine, ax / self.fine_step)
        } else if ax <= self.outer_edge {
            interp(&self.outer, (ax / self.fine_edge).ln() / self.log_ratio.ln())
        } else {
            // Second-order broadened Lorentzian tail.
            let g = self.gamma;
            let c = g * g;
            let denom = ax * ax + c;
            let l = g / (std::f64::consts::PI * denom);
            let l2 = 2.0 * g * (3.0 * ax * ax - c) / (std::f64::consts::PI * denom.powi(3));
            (l + 0.5 * self.sigma * self.sigma * l2).max(0.0)
        }
    }
}

fn interp(table: &[f64], t: f64) -> f64 {
    if t <= 0.0 {
        return table[0];
    }
    let i = t.floor() as usize;
    if i + 1 >= table.len() {
        return *table.last().expect("non-empty table");
    }
    let frac = t - i as f64;
    table[i] * (1.0 - frac) + table[i + 1] * frac
}

fn voigt_table(fwhm_lorentz: f64, sigma_gauss: f64) -> Arc<VoigtTable> {
    type Key = (u64, u64);
    static CACHE: OnceLock<Mutex<HashMap<Key, Arc<VoigtTable>>>> = OnceLock::new();
    thread_local! {
        static LAST: RefCell<Option<(Key, Arc<VoigtTable>)>> = const { RefCell::new(None) };
    }
    let key = (fwhm_lorentz.to_bits(), sigma_gauss.to_bits());
    if let Some(hit) = LAST.with(|last| {
        last.borrow()
            .as_ref()
            .filter(|(k, _)| *k == key)
            .map(|(_, t)| t.clone())
    }) {
        return hit;
    }
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let table = {
        let map = cache.lock().expect("voigt cache poisoned");
        if let Some(t) = map.get(&key) {
            t.clone()
        } else {
            drop(map);
            let built = Arc::new(VoigtTable::build(fwhm_lorentz, sigma_gauss));
            let mut map = cache.lock().expect("voigt cache poisoned");
            // Racing builders may insert first; keep whichever won.
            if map.len() > 256 {
                map.clear();
            }
            map.entry(key).or_insert(built).clone()
        }
    };
    LAST.with(|last| *last.borrow_mut() = Some((key, table.clone())));
    table
}

/// Peak of a Voigt profile without building a table (used by the width
/// solver).
fn voigt_peak(fwhm_lorentz: f64, sigma: f64) -> f64 {
    let gamma = 0.5 * fwhm_lorentz;
    voigt_direct(0.0, gamma, sigma)
}

fn golden_max<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    let phi = 0.5 * (5.0f64.sqrt() - 1.0);
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..80 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = f(x1);
        }
    }
    0.5 * (lo + hi)
}

fn golden_min<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> f64 {
    golden_max(|x| -f(x), lo, hi)
}

// ---------------------------------------------------------------------------
// Top-hat dominance.
// ---------------------------------------------------------------------------

/// Outcome of the top-hat dominance check. `margin` is `1/spacing - peak`
/// in density units: non-negative means the top-hat of width `spacing`
/// majorizes the profile.
#[derive(Debug, Clone, serde::Serialize)]
pub struct TophatCheck {
    pub verdict: bool,
    pub margin: f64,
}

/// Is this profile majorized by a top-hat of width `spacing`?
///
/// A density is majorized by the top-hat exactly when its peak stays at or
/// below `1/spacing`: the partial integral of the `s` largest values is at
/// most `s * peak` and also at most 1, staying under the top-hat's curve
/// `min(s/spacing, 1)`. Tabulated profiles additionally get the full
/// dominance-curve comparison to catch sampling artifacts.
pub fn majorized_by_tophat(f: &FilterProfile, spacing: f64) -> Result<TophatCheck> {
    if !(spacing > 0.0) || !spacing.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "spacing must be positive, got {spacing}"
        )));
    }
    let cap = 1.0 / spacing;
    let slack = 1e-12 * cap;
    let peak = f.peak_height();
    let margin = cap - peak;
    let mut verdict = margin >= -slack;
    if verdict {
        if let FilterShape::Tabulated(grid) = f.shape() {
            for (s, integral) in grid.dominance_curve() {
                let envelope = (s * cap).min(1.0);
                if integral > envelope + 1e-9 {
                    verdict = false;
                    break;
                }
            }
        }
    }
    Ok(TophatCheck { verdict, margin })
}

/// Width parameter family for `min_width_for_spacing`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WidthKind {
    /// Solve for the Lorentzian FWHM.
    Lorentzian,
    /// Solve for the Gaussian sigma.
    Gaussian,
    /// Solve for the Lorentzian FWHM of a Voigt with fixed Gaussian part.
    Voigt { sigma_gauss: f64 },
}

/// Smallest width of the given kind whose peak drops to `1/spacing`, i.e.
/// the narrowest filter that a top-hat of width `spacing` still majorizes.
///
/// Closed forms: Lorentzian FWHM `= (2/pi) spacing`; Gaussian sigma
/// `= spacing / sqrt(2 pi)`. The Voigt case is solved by bisection on the
/// Lorentzian FWHM; if the Gaussian part alone already passes, the answer
/// is zero.
pub fn min_width_for_spacing(kind: WidthKind, spacing: f64) -> Result<f64> {
    if !(spacing > 0.0) || !spacing.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "spacing must be positive, got {spacing}"
        )));
    }
    let cap = 1.0 / spacing;
    Ok(match kind {
        WidthKind::Lorentzian => 2.0 * spacing / std::f64::consts::PI,
        WidthKind::Gaussian => spacing / TWO_PI.sqrt(),
        WidthKind::Voigt { sigma_gauss } => {
            if !(sigma_gauss > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "Voigt Gaussian sigma must be positive, got {sigma_gauss}"
                )));
            }
            if 1.0 / (sigma_gauss * TWO_PI.sqrt()) <= cap {
                return Ok(0.0);
            }
            // Peak decreases monotonically with the Lorentzian width; the
            // pure-Lorentzian threshold is always wide enough.
            let mut lo = 0.0;
            let mut hi = 2.0 * spacing / std::f64::consts::PI;
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if voigt_peak(mid, sigma_gauss) > cap {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        }
    })
}

// ---------------------------------------------------------------------------
// Filter banks.
// ---------------------------------------------------------------------------

/// An ordered set of filters on a nominally regular frequency comb.
/// `nominal_centers` are the design positions; the profiles' own centers may
/// carry jitter. Centers must be strictly increasing.
#[derive(Debug, Clone, serde::Serialize)]
pub struct FilterBank {
    profiles: Vec<FilterProfile>,
    nominal_spacing: f64,
    nominal_centers: Vec<f64>,
}

impl FilterBank {
    pub fn new(
        profiles: Vec<FilterProfile>,
        nominal_spacing: f64,
        nominal_centers: Vec<f64>,
    ) -> Result<Self> {
        if profiles.is_empty() {
            return Err(Error::EmptyBank);
        }
        if profiles.len() != nominal_centers.len() {
            return Err(Error::LengthMismatch {
                left: profiles.len(),
                right: nominal_centers.len(),
            });
        }
        if !(nominal_spacing > 0.0) || !nominal_spacing.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "nominal spacing must be positive, got {nominal_spacing}"
            )));
        }
        for (index, pair) in nominal_centers.windows(2).enumerate() {
            if !(pair[1] > pair[0]) {
                return Err(Error::UnorderedCenters { index: index + 1 });
            }
        }
        Ok(Self {
            profiles,
            nominal_spacing,
            nominal_centers,
        })
    }

    /// A bank of identical profiles on an exact comb.
    pub fn regular(shape: FilterShape, first_center: f64, spacing: f64, count: usize) -> Result<Self> {
        let centers: Vec<f64> = (0..count)
            .map(|k| first_center + k as f64 * spacing)
            .collect();
        let profiles = centers
            .iter()
            .map(|&c| FilterProfile::new(shape.clone(), c))
            .collect::<Result<Vec<_>>>()?;
        Self::new(profiles, spacing, centers)
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn profiles(&self) -> &[FilterProfile] {
        &self.profiles
    }

    pub fn nominal_spacing(&self) -> f64 {
        self.nominal_spacing
    }

    pub fn nominal_centers(&self) -> &[f64] {
        &self.nominal_centers
    }

    /// Residual center errors `center - nominal_center`.
    pub fn offsets(&self) -> Vec<f64> {
        self.profiles
            .iter()
            .zip(&self.nominal_centers)
            .map(|(p, &c)| p.center() - c)
            .collect()
    }

    /// Profiles re-expressed in a common frame: each center is replaced by
    /// its residual offset from the nominal comb, so shapes can be compared
    /// as densities of detuning.
    pub fn detuning_views(&self) -> Vec<FilterProfile> {
        self.profiles
            .iter()
            .zip(&self.nominal_centers)
            .map(|(p, &c)| p.recentered(p.center() - c))
            .collect()
    }

    /// Top-hat dominance of every profile against the nominal spacing.
    pub fn majorization_report(&self) -> Result<Vec<TophatCheck>> {
        self.profiles
            .iter()
            .map(|p| majorized_by_tophat(p, self.nominal_spacing))
            .collect()
    }

    /// Narrowest characteristic FWHM in the bank.
    pub fn min_fwhm(&self) -> f64 {
        self.profiles
            .iter()
            .map(|p| p.characteristic_fwhm())
            .fold(f64::INFINITY, f64::min)
    }
}

// ---------------------------------------------------------------------------
// Weights.
// ---------------------------------------------------------------------------

/// Search parameters for weight computations.
#[derive(Debug, Clone)]
pub struct WeightOptions {
    /// Half-width of the ratio search window, in multiples of the target
    /// FWHM.
    pub window_fwhm_multiples: f64,
    /// Number of scan points across the window.
    pub grid_points: usize,
    /// Weights at or below this floor are rejected as degenerate.
    pub degenerate_floor: f64,
}

impl Default for WeightOptions {
    fn default() -> Self {
        Self {
            window_fwhm_multiples: 50.0,
            grid_points: 100_001,
            degenerate_floor: 1e-3,
        }
    }
}

/// Per-bank weight summary. `w0 = min_n w_n` is the factor by which
/// discrete conditional entropies must be divided before they bound the
/// ideal-bank value.
#[derive(Debug, Clone, serde::Serialize)]
pub struct WeightReport {
    pub per_filter_w: Vec<f64>,
    pub w0: f64,
    pub target: FilterProfile,
    /// Half-width of the minimization window, in target-FWHM units. The
    /// reported weights are minima over this window, not over the whole
    /// line.
    pub window_fwhm_multiples: f64,
}

/// `min_x f_n(x) / target(x)` over a window of `opts.window_fwhm_multiples`
/// target FWHMs around the target center, refined by golden-section search
/// around the grid minimum. For a pair of Lorentzians the exact tail limit
/// `fwhm_n / fwhm_target` competes with the interior minimum. The result is
/// clamped to `(0, 1]`; values at or below `opts.degenerate_floor` are an
/// error because the convex split carries no certification power there.
pub fn filter_weight(f_n: &FilterProfile, target: &FilterProfile, opts: &WeightOptions) -> Result<f64> {
    if f_n == target {
        return Ok(1.0);
    }
    let fwhm = target.characteristic_fwhm();
    let half = opts.window_fwhm_multiples * fwhm;
    let lo = target.center() - half;
    let step = 2.0 * half / (opts.grid_points - 1) as f64;
    let mut min_ratio = f64::INFINITY;
    let mut argmin = lo;
    let floor_t = 1e-300;
    let tiny_f = 1e-15 * f_n.peak_height();
    for i in 0..opts.grid_points {
        let x = lo + i as f64 * step;
        let t = target.evaluate(x);
        let f = f_n.evaluate(x);
        let ratio = if t > floor_t {
            f / t
        } else if f > tiny_f {
            0.0
        } else {
            continue;
        };
        if ratio < min_ratio {
            min_ratio = ratio;
            argmin = x;
        }
    }
    if min_ratio > opts.degenerate_floor && min_ratio.is_finite() {
        let ratio_fn = |x: f64| {
            let t = target.evaluate(x);
            if t > floor_t {
                f_n.evaluate(x) / t
            } else {
                f64::INFINITY
            }
        };
        let x = golden_min(ratio_fn, argmin - step, argmin + step);
        let refined = ratio_fn(x);
        if refined.is_finite() {
            min_ratio = min_ratio.min(refined);
        }
    }
    if let (FilterShape::Lorentzian { fwhm: an }, FilterShape::Lorentzian { fwhm: at }) =
        (f_n.shape(), target.shape())
    {
        min_ratio = min_ratio.min(an / at);
    }
    let w = min_ratio.min(1.0);
    if w <= opts.degenerate_floor {
        return Err(Error::DegenerateRatio {
            index: 0,
            value: w,
            floor: opts.degenerate_floor,
        });
    }
    Ok(w)
}

/// Arithmetic mean of the bank's profiles after shifting each to its
/// nominal center, returned as a tabulated profile centered at zero
/// detuning. Residual center jitter stays inside the shape, which is what
/// the weight split must absorb.
pub fn mean_filter(bank: &FilterBank, opts: &WeightOptions) -> Result<FilterProfile> {
    let (grid, _) = mean_filter_samples(bank, opts)?;
    FilterProfile::tabulated(grid, 0.0)
}

fn mean_filter_samples(bank: &FilterBank, opts: &WeightOptions) -> Result<(Grid1D, MeanEval)> {
    let views = bank.detuning_views();
    let max_fwhm = views
        .iter()
        .map(|v| v.characteristic_fwhm())
        .fold(0.0f64, f64::max);
    let max_offset = views
        .iter()
        .map(|v| v.center().abs())
        .fold(0.0f64, f64::max);
    let half = opts.window_fwhm_multiples * max_fwhm + max_offset;
    let n = opts.grid_points;
    let step = 2.0 * half / (n - 1) as f64;
    let mean = MeanEval { views };
    let values: Vec<f64> = (0..n).map(|i| mean.eval(-half + i as f64 * step)).collect();
    let grid = Grid1D::from_unnormalized(-half - 0.5 * step, step, values)?;
    Ok((grid, mean))
}

struct MeanEval {
    views: Vec<FilterProfile>,
}

impl MeanEval {
    /// Exact nodal mean; in the continuum this is normalized by
    /// construction, so identical banks give a ratio of exactly one.
    fn eval(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for v in &self.views {
            acc += v.evaluate(x);
        }
        acc / self.views.len() as f64
    }
}

/// Weights of every filter against the bank mean, and their minimum `w0`.
///
/// The ratio is evaluated against the exact pointwise mean (not a truncated
/// tabulation), so a bank of identical filters reports `w_n = 1` exactly and
/// downstream `H / w0` stays bit-identical to the uncorrected pipeline.
/// Results within `1e-9` of one are snapped to one. When every profile is
/// Lorentzian the analytic tail-limit ratio `fwhm_n / mean fwhm` is included
/// in the minimization.
pub fn bank_weights(bank: &FilterBank, opts: &WeightOptions) -> Result<WeightReport> {
    let views = bank.detuning_views();
    let (grid, mean) = mean_filter_samples(bank, opts)?;
    let target = FilterProfile::tabulated(grid, 0.0)?;

    let identical = views.windows(2).all(|w| w[0] == w[1]);
    if identical {
        return Ok(WeightReport {
            per_filter_w: vec![1.0; views.len()],
            w0: 1.0,
            target,
            window_fwhm_multiples: opts.window_fwhm_multiples,
        });
    }

    let all_lorentzian: Option<Vec<f64>> = views
        .iter()
        .map(|v| match v.shape() {
            FilterShape::Lorentzian { fwhm } => Some(*fwhm),
            _ => None,
        })
        .collect();
    let mean_fwhm = all_lorentzian
        .as_ref()
        .map(|ws| ws.iter().sum::<f64>() / ws.len() as f64);

    let max_fwhm = views
        .iter()
        .map(|v| v.characteristic_fwhm())
        .fold(0.0f64, f64::max);
    let max_offset = views.iter().map(|v| v.center().abs()).fold(0.0f64, f64::max);
    let half = opts.window_fwhm_multiples * max_fwhm + max_offset;
    let n = opts.grid_points;
    let step = 2.0 * half / (n - 1) as f64;
    let xs: Vec<f64> = (0..n).map(|i| -half + i as f64 * step).collect();
    let mean_vals: Vec<f64> = xs.iter().map(|&x| mean.eval(x)).collect();

    let floor_t = 1e-300;
    let mut per_filter_w = Vec::with_capacity(views.len());
    for (index, view) in views.iter().enumerate() {
        let tiny_f = 1e-15 * view.peak_height();
        let mut min_ratio = f64::INFINITY;
        let mut argmin = xs[0];
        for (&x, &t) in xs.iter().zip(&mean_vals) {
            let f = view.evaluate(x);
            let ratio = if t > floor_t {
                f / t
            } else if f > tiny_f {
                0.0
            } else {
                continue;
            };
            if ratio < min_ratio {
                min_ratio = ratio;
                argmin = x;
            }
        }
        if min_ratio > opts.degenerate_floor && min_ratio.is_finite() {
            let ratio_fn = |x: f64| {
                let t = mean.eval(x);
                if t > floor_t {
                    view.evaluate(x) / t
                } else {
                    f64::INFINITY
                }
            };
            let x = golden_min(ratio_fn, argmin - step, argmin + step);
            let refined = ratio_fn(x);
            if refined.is_finite() {
                min_ratio = min_ratio.min(refined);
            }
        }
        if let (Some(ws), Some(mf)) = (all_lorentzian.as_ref(), mean_fwhm) {
            min_ratio = min_ratio.min(ws[index] / mf);
        }
        let mut w = min_ratio.min(1.0);
        if w >= 1.0 - 1e-9 {
            w = 1.0;
        }
        if w <= opts.degenerate_floor {
            return Err(Error::DegenerateRatio {
                index,
                value: w,
                floor: opts.degenerate_floor,
            });
        }
        per_filter_w.push(w);
    }
    let w0 = per_filter_w.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(WeightReport {
        per_filter_w,
        w0,
        target,
        window_fwhm_multiples: opts.window_fwhm_multiples,
    })
}

/// Closed-form weight for two equal-width Lorentzians whose centers differ
/// by `delta` half-widths: `1 + delta^2/2 - delta sqrt(1 + delta^2/4)`.
/// For small shifts this is `1 - delta` up to an error of at most
/// `delta^2 / 2`.
pub fn lorentzian_shift_weight(delta: f64) -> f64 {
    1.0 + 0.5 * delta * delta - delta * (1.0 + 0.25 * delta * delta).sqrt()
}

/// Closed-form weight for a Lorentzian widened by a factor `1 + eps`
/// against the unwidened target: `1 / (1 + eps)`.
pub fn lorentzian_width_weight(eps: f64) -> f64 {
    1.0 / (1.0 + eps)
}

// ---------------------------------------------------------------------------
// CSV loading.
// ---------------------------------------------------------------------------

/// Load a tabulated profile from a two-column CSV with header
/// `omega_rad_per_s,transmission`. Frequencies must increase on a uniform
/// grid (relative tolerance 1e-6). The curve is clipped at a small noise
/// floor, normalized, and stored as detuning relative to `center`.
pub fn load_profile_csv(path: &std::path::Path, center: f64) -> Result<FilterProfile> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Schema {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let names: Vec<&str> = headers.iter().collect();
    if names != ["omega_rad_per_s", "transmission"] {
        return Err(Error::Schema {
            line: 1,
            message: format!(
                "expected header 'omega_rad_per_s,transmission', got '{}'",
                names.join(",")
            ),
        });
    }
    let mut omegas = Vec::new();
    let mut values = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::Schema {
            line,
            message: e.to_string(),
        })?;
        if record.len() != 2 {
            return Err(Error::Schema {
                line,
                message: format!("expected 2 columns, got {}", record.len()),
            });
        }
        let parse = |field: &str, name: &str| -> Result<f64> {
            field.parse::<f64>().map_err(|_| Error::Schema {
                line,
                message: format!("cannot parse {name} '{field}' as a number"),
            })
        };
        omegas.push(parse(&record[0], "omega_rad_per_s")?);
        values.push(parse(&record[1], "transmission")?);
    }
    if omegas.len() < 3 {
        return Err(Error::Schema {
            line: omegas.len() + 1,
            message: "need at least 3 samples".into(),
        });
    }
    let step = omegas[1] - omegas[0];
    if !(step > 0.0) {
        return Err(Error::Schema {
            line: 3,
            message: "omega_rad_per_s must be strictly increasing".into(),
        });
    }
    for (i, pair) in omegas.windows(2).enumerate() {
        let d = pair[1] - pair[0];
        if (d - step).abs() > 1e-6 * step.abs() {
            return Err(Error::Schema {
                line: i + 3,
                message: format!("non-uniform frequency spacing: {d} vs {step}"),
            });
        }
    }
    let max = values.iter().cloned().fold(0.0f64, f64::max);
    if !(max > 0.0) {
        return Err(Error::Schema {
            line: 2,
            message: "profile has no positive transmission".into(),
        });
    }
    for (i, v) in values.iter_mut().enumerate() {
        if *v < -1e-3 * max {
            return Err(Error::Schema {
                line: i + 2,
                message: format!("transmission {v} is significantly negative"),
            });
        }
        // Noise floor clip.
        if *v < 1e-9 * max {
            *v = 0.0;
        }
    }
    let start = omegas[0] - center - 0.5 * step;
    let grid = Grid1D::from_unnormalized(start, step, values)?;
    FilterProfile::tabulated(grid, center)
}
