//! Data ingestion and synthetic measurement campaigns.
//!
//! Measured inputs are a coincidence-timing histogram and a table of
//! filter-pair counts; both arrive as CSV and stay integer-valued until
//! normalization. On the synthesis side, two simulators generate such data
//! with Poisson shot noise: a dense-grid path that pushes an explicit
//! spectral density through `coarsegrain::filter_sample_joint`, and an
//! analytic path for narrowband Lorentzian banks on a downconversion
//! source, where the expected count in a filter pair factorizes into a
//! Gaussian in the center detuning difference times a Voigt profile in the
//! center sum. The analytic path is what makes 10^4:1 bandwidth ratios with
//! tens of thousands of filters per arm tractable.
//!
//! Determinism contract: every random draw uses a stream derived from
//! (seed, domain, m, n), so outputs are bit-identical for a given seed no
//! matter how work is split across threads. The derivation is recorded in
//! [`RNG_ALGORITHM`] and surfaced in outputs.
//!
//! Shot noise biases plug-in entropies downward, which is the
//! anti-conservative direction; rather than applying an analytic
//! correction, [`bootstrap_margin`] resamples the counts and reports a
//! percentile confidence interval on the witness margin so the user can see
//! when the noise matters.

use std::io::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_distr::{Distribution, Poisson};
use rand_xoshiro::SplitMix64;
use rayon::prelude::*;

use crate::coarsegrain::{
    coverage_gate, entropy_bound_1d, filter_sample_joint, BoundKind, CoarseGrained1D,
    CoarseGrained2D, EntropyBound, SampledJoint,
};
use crate::error::{Error, Result};
use crate::filters::{FilterBank, FilterProfile, FilterShape};
use crate::probcore::{Grid2D, ProbMatrix, ProbVector};
use crate::spdc::SpdcParams;
use crate::units::{GAUSSIAN_FWHM_PER_SIGMA, GRID_TOL};
use crate::witness::{evaluate_witness, Inequality};

/// Stream derivation recorded in every simulation output.
pub const RNG_ALGORITHM: &str =
    "splitmix64 per-cell streams; key = mix(mix(mix(seed ^ domain) ^ m) ^ n)";

const DOMAIN_JOINT: u64 = 0x4a4f_494e_545f_4331;
const DOMAIN_TIMING: u64 = 0x5449_4d45_5f43_4f49;
const DOMAIN_JITTER_A: u64 = 0x4a49_545f_4152_4d41;
const DOMAIN_JITTER_B: u64 = 0x4a49_545f_4152_4d42;
const DOMAIN_BOOTSTRAP: u64 = 0x424f_4f54_5f4d_4152;

/// Fewest bootstrap resamples that still give a usable 95% interval.
pub const MIN_RESAMPLES: usize = 100;

/// Narrowband requirement for the analytic campaign path: filter FWHM at
/// most this fraction of the phasematch bandwidth.
const NARROWBAND_RATIO: f64 = 1.0 / 50.0;

/// Per-side Lorentzian tail mass allowed outside the simulated band of
/// center-sum diagonals.
const SUM_TAIL_TARGET: f64 = 1e-4;

/// Background level above this fraction of the histogram peak means the
/// wings are not background at all.
const WING_PEAK_RATIO: f64 = 0.1;

fn splitmix_step(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// The documented per-cell stream: three chained splitmix64 finalizers fold
/// the seed, a domain tag and the cell coordinates into one generator key.
fn derive_stream(seed: u64, domain: u64, m: u64, n: u64) -> SplitMix64 {
    let key = splitmix_step(splitmix_step(splitmix_step(seed ^ domain) ^ m) ^ n);
    SplitMix64::seed_from_u64(key)
}

fn poisson_draw(rng: &mut SplitMix64, lambda: f64) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    let dist = Poisson::new(lambda).expect("lambda is positive and finite");
    dist.sample(rng) as u64
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}

// ---------------------------------------------------------------------------
// Coincidence histograms.
// ---------------------------------------------------------------------------

/// Histogram of arrival-time differences `t_A - t_B`.
///
/// Counts are integers as measured; background subtraction is the one
/// operation that introduces fractional values, and the amount removed is
/// carried in `background_per_bin`.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct CoincidenceHistogram {
    bin_width: f64,
    t0: f64,
    counts: Vec<f64>,
    background_per_bin: f64,
}

impl CoincidenceHistogram {
    /// `bin_width` and `t0` (left edge of the first bin) in seconds.
    pub fn new(bin_width: f64, t0: f64, counts: Vec<f64>) -> Result<Self> {
        if !(bin_width > 0.0) || !bin_width.is_finite() || !t0.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "histogram needs finite t0 and positive bin width, got {t0} and {bin_width}"
            )));
        }
        if counts.is_empty() {
            return Err(Error::InvalidParameter("histogram has no bins".into()));
        }
        for (index, &c) in counts.iter().enumerate() {
            if !c.is_finite() || c < 0.0 {
                return Err(Error::NegativeProbability { index, value: c });
            }
        }
        Ok(Self {
            bin_width,
            t0,
            counts,
            background_per_bin: 0.0,
        })
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    /// Left edge of the first bin, seconds.
    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    /// Background already removed from each bin.
    pub fn background_per_bin(&self) -> f64 {
        self.background_per_bin
    }
}

/// Read a histogram CSV with header `bin_start_ps,counts`. Bin starts must
/// be strictly increasing with uniform spacing; counts must be finite and
/// non-negative. Lines starting with `#` are ignored, so reports that
/// embed a manifest digest as a leading comment still load. Errors carry
/// the offending line number.
pub fn load_histogram(path: &Path) -> Result<CoincidenceHistogram> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    let expected = ["bin_start_ps", "counts"];
    if headers.iter().map(str::trim).ne(expected) {
        return Err(Error::Schema {
            line: 1,
            message: format!("expected header `bin_start_ps,counts`, got `{}`", headers.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut starts_ps = Vec::new();
    let mut counts = Vec::new();
    let mut lines = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != 2 {
            return Err(Error::Schema {
                line,
                message: format!("expected 2 fields, got {}", record.len()),
            });
        }
        let start: f64 = record[0].trim().parse().map_err(|_| Error::Schema {
            line,
            message: format!("bin_start_ps `{}` is not a number", &record[0]),
        })?;
        let count: f64 = record[1].trim().parse().map_err(|_| Error::Schema {
            line,
            message: format!("counts `{}` is not a number", &record[1]),
        })?;
        if !count.is_finite() || count < 0.0 {
            return Err(Error::Schema {
                line,
                message: format!("counts must be non-negative, got {count}"),
            });
        }
        starts_ps.push(start);
        counts.push(count);
        lines.push(line);
    }
    if starts_ps.len() < 2 {
        return Err(Error::Schema {
            line: lines.last().map_or(1, |l| l + 1),
            message: "need at least two bins to establish the bin width".into(),
        });
    }
    let spacing = starts_ps[1] - starts_ps[0];
    if !(spacing > 0.0) {
        return Err(Error::Schema {
            line: lines[1],
            message: format!("bin starts must increase, first spacing {spacing} ps"),
        });
    }
    for (i, pair) in starts_ps.windows(2).enumerate() {
        let d = pair[1] - pair[0];
        if ((d - spacing) / spacing).abs() > 1e-6 {
            return Err(Error::Schema {
                line: lines[i + 1],
                message: format!("non-uniform bin spacing: {d} ps after {spacing} ps"),
            });
        }
    }
    CoincidenceHistogram::new(spacing * 1e-12, starts_ps[0] * 1e-12, counts)
}

/// Write a histogram in the same CSV schema [`load_histogram`] reads.
pub fn write_histogram(h: &CoincidenceHistogram, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "bin_start_ps,counts")?;
    for (i, &c) in h.counts.iter().enumerate() {
        let start_ps = (h.t0 + i as f64 * h.bin_width) * 1e12;
        writeln!(out, "{start_ps},{c}")?;
    }
    Ok(())
}

/// Estimate a flat accidental floor from the outer `wing_fraction` of bins
/// on each side and remove it, clamping at zero. The removed level is
/// accumulated in `background_per_bin`. Wings that hold more than 10% of
/// the peak are rejected: that is signal, not background.
pub fn subtract_background(
    h: &CoincidenceHistogram,
    wing_fraction: f64,
) -> Result<CoincidenceHistogram> {
    if !(wing_fraction > 0.0 && wing_fraction <= 0.4) {
        return Err(Error::InvalidParameter(format!(
            "wing fraction must lie in (0, 0.4], got {wing_fraction}"
        )));
    }
    let wing = ((h.counts.len() as f64 * wing_fraction).floor() as usize).max(1);
    if h.counts.len() < 2 * wing + 1 {
        return Err(Error::InvalidParameter(format!(
            "histogram with {} bins is too short for {wing}-bin wings",
            h.counts.len()
        )));
    }
    let wings: Vec<f64> = h.counts[..wing]
        .iter()
        .chain(&h.counts[h.counts.len() - wing..])
        .copied()
        .collect();
    let background = wings.iter().sum::<f64>() / wings.len() as f64;
    let max = h.counts.iter().cloned().fold(0.0_f64, f64::max);
    // A histogram that is flat to the top has no peak to protect; anything
    // with structure must keep its wings below a tenth of the peak.
    if background > WING_PEAK_RATIO * max && max > background * (1.0 + 1e-9) {
        return Err(Error::PeakInWings {
            wing_mean: background,
            max,
        });
    }
    Ok(CoincidenceHistogram {
        bin_width: h.bin_width,
        t0: h.t0,
        counts: h.counts.iter().map(|&c| (c - background).max(0.0)).collect(),
        background_per_bin: h.background_per_bin + background,
    })
}

/// Conservative bound on `h(t_A - t_B)`: normalize the histogram and add
/// `log2` of the bin width in seconds. A histogram is a direct top-hat
/// binning of the difference variable, so the bound needs no filter
/// dominance evidence and is always attested.
pub fn timing_entropy_bound(h: &CoincidenceHistogram) -> Result<EntropyBound> {
    let total = h.total();
    if !(total > 0.0) {
        return Err(Error::InvalidParameter(
            "histogram is empty after background subtraction".into(),
        ));
    }
    let probs = ProbVector::normalized(h.counts.clone())?;
    let grained = CoarseGrained1D::new(probs, h.bin_width, h.t0)?;
    let mut bound = entropy_bound_1d(&grained, BoundKind::DiffVariable, true)?;
    bound.provenance = format!(
        "{}; from {total} counts, background removed {:.6} per bin",
        bound.provenance, h.background_per_bin
    );
    Ok(bound)
}

/// Noiseless histogram of a centered Gaussian difference density: exact
/// Gaussian bin masses over uniform bins spanning `span_sigmas` standard
/// deviations each side, scaled to `total_counts`. Turns a quoted timing
/// FWHM into the bound a perfect measurement at that resolution would
/// report.
pub fn gaussian_difference_histogram(
    fwhm: f64,
    bin_width: f64,
    span_sigmas: f64,
    total_counts: f64,
) -> Result<CoincidenceHistogram> {
    for (name, v) in [
        ("fwhm", fwhm),
        ("bin_width", bin_width),
        ("span_sigmas", span_sigmas),
        ("total_counts", total_counts),
    ] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "{name} must be positive, got {v}"
            )));
        }
    }
    let sigma = fwhm / GAUSSIAN_FWHM_PER_SIGMA;
    let halfwidth = span_sigmas * sigma;
    let bins = ((2.0 * halfwidth / bin_width).round() as usize).max(3);
    if bins > 5_000_000 {
        return Err(Error::InvalidParameter(format!(
            "histogram would span {bins} bins; need at most 5e6"
        )));
    }
    let t0 = -0.5 * bins as f64 * bin_width;
    let counts = (0..bins)
        .map(|i| {
            let l = t0 + i as f64 * bin_width;
            total_counts * (normal_cdf((l + bin_width) / sigma) - normal_cdf(l / sigma))
        })
        .collect();
    CoincidenceHistogram::new(bin_width, t0, counts)
}

// ---------------------------------------------------------------------------
// Joint filter-pair count tables.
// ---------------------------------------------------------------------------

/// Sparse table of coincidence counts per filter pair (m, n).
///
/// Entries hold only nonzero cells, sorted by (m, n). The lattice fields
/// place bin m at center `origin_a + (m + 0.5) * bin_a` so entropy bounds
/// built from the table agree with the dense `CoarseGrained2D` convention.
/// Tables loaded from CSV start on the index lattice (unit bins) until the
/// caller stamps physical geometry with [`JointCountTable::with_lattice`].
#[derive(Debug, Clone, PartialEq)]
pub struct JointCountTable {
    rows: usize,
    cols: usize,
    entries: Vec<(u32, u32, u64)>,
    total: u64,
    bin_a: f64,
    bin_b: f64,
    origin_a: f64,
    origin_b: f64,
}

impl JointCountTable {
    pub fn new(
        entries: Vec<(u32, u32, u64)>,
        rows: usize,
        cols: usize,
        bin_a: f64,
        bin_b: f64,
        origin_a: f64,
        origin_b: f64,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 || rows > u32::MAX as usize || cols > u32::MAX as usize {
            return Err(Error::InvalidParameter(format!(
                "table dimensions {rows} x {cols} out of range"
            )));
        }
        for (w, o) in [(bin_a, origin_a), (bin_b, origin_b)] {
            if !(w > 0.0) || !w.is_finite() || !o.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "bin width {w} and origin {o} must be finite, width > 0"
                )));
            }
        }
        let mut entries: Vec<(u32, u32, u64)> =
            entries.into_iter().filter(|&(_, _, c)| c > 0).collect();
        entries.sort_unstable_by_key(|&(m, n, _)| (m, n));
        let mut total: u64 = 0;
        for pair in entries.windows(2) {
            if pair[0].0 == pair[1].0 && pair[0].1 == pair[1].1 {
                return Err(Error::Schema {
                    line: 0,
                    message: format!("duplicate cell ({}, {})", pair[0].0, pair[0].1),
                });
            }
        }
        for &(m, n, c) in &entries {
            if m as usize >= rows || n as usize >= cols {
                return Err(Error::InvalidParameter(format!(
                    "entry ({m}, {n}) outside {rows} x {cols} table"
                )));
            }
            total = total.checked_add(c).ok_or_else(|| {
                Error::InvalidParameter("total count overflows u64".into())
            })?;
        }
        Ok(Self {
            rows,
            cols,
            entries,
            total,
            bin_a,
            bin_b,
            origin_a,
            origin_b,
        })
    }

    /// Table on the index lattice: unit bins, centers at integer indices.
    pub fn indexed(entries: Vec<(u32, u32, u64)>, rows: usize, cols: usize) -> Result<Self> {
        Self::new(entries, rows, cols, 1.0, 1.0, -0.5, -0.5)
    }

    /// Replace the lattice geometry (bin widths and slot-edge origins).
    pub fn with_lattice(
        mut self,
        bin_a: f64,
        bin_b: f64,
        origin_a: f64,
        origin_b: f64,
    ) -> Result<Self> {
        for (w, o) in [(bin_a, origin_a), (bin_b, origin_b)] {
            if !(w > 0.0) || !w.is_finite() || !o.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "bin width {w} and origin {o} must be finite, width > 0"
                )));
            }
        }
        self.bin_a = bin_a;
        self.bin_b = bin_b;
        self.origin_a = origin_a;
        self.origin_b = origin_b;
        Ok(self)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[(u32, u32, u64)] {
        &self.entries
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn bin_a(&self) -> f64 {
        self.bin_a
    }

    pub fn bin_b(&self) -> f64 {
        self.bin_b
    }

    pub fn origin_a(&self) -> f64 {
        self.origin_a
    }

    pub fn origin_b(&self) -> f64 {
        self.origin_b
    }

    /// Densify into a normalized `CoarseGrained2D`. Refused above 2^26
    /// cells; the sparse entropy methods below cover that regime.
    pub fn to_coarse2d(&self) -> Result<CoarseGrained2D> {
        if self.rows * self.cols > 1 << 26 {
            return Err(Error::InvalidParameter(format!(
                "{} x {} table is too large to densify; use the sparse entropy methods",
                self.rows, self.cols
            )));
        }
        if self.total == 0 {
            return Err(Error::InvalidParameter("table holds no counts".into()));
        }
        let mut dense = vec![0.0; self.rows * self.cols];
        for &(m, n, c) in &self.entries {
            dense[m as usize * self.cols + n as usize] = c as f64;
        }
        let probs = ProbMatrix::normalized(dense, self.rows, self.cols)?;
        CoarseGrained2D::new(probs, self.bin_a, self.bin_b, self.origin_a, self.origin_b)
    }

    /// Counts on the sum lattice `k = m + n`.
    pub fn sum_counts(&self) -> Vec<u64> {
        let mut k = vec![0u64; self.rows + self.cols - 1];
        for &(m, n, c) in &self.entries {
            k[(m + n) as usize] += c;
        }
        k
    }

    /// Normalized sum-variable distribution; needs equal bin widths so the
    /// sum lattice has a well-defined spacing.
    pub fn k_marginal(&self) -> Result<CoarseGrained1D> {
        if (self.bin_a - self.bin_b).abs() > GRID_TOL * self.bin_a.max(self.bin_b) {
            return Err(Error::InvalidParameter(format!(
                "sum variable needs equal bin widths, got {} and {}",
                self.bin_a, self.bin_b
            )));
        }
        let counts: Vec<f64> = self.sum_counts().into_iter().map(|c| c as f64).collect();
        let probs = ProbVector::normalized(counts)?;
        CoarseGrained1D::new(
            probs,
            self.bin_a,
            self.origin_a + self.origin_b + 0.5 * self.bin_a,
        )
    }

    /// Per-column (arm B) count totals.
    pub fn column_counts(&self) -> Vec<f64> {
        let mut col = vec![0.0; self.cols];
        for &(_, n, c) in &self.entries {
            col[n as usize] += c as f64;
        }
        col
    }

    /// Plug-in joint entropy `H(M, N)` in bits.
    pub fn joint_entropy_bits(&self) -> f64 {
        let total = self.total as f64;
        let s: f64 = self
            .entries
            .iter()
            .map(|&(_, _, c)| {
                let c = c as f64;
                c * c.log2()
            })
            .sum();
        total.log2() - s / total
    }

    /// Plug-in conditional entropy `H(M | N)` in bits, computed as a single
    /// stable ratio instead of a difference of large entropies.
    pub fn conditional_entropy_bits(&self) -> f64 {
        let total = self.total as f64;
        let joint: f64 = self
            .entries
            .iter()
            .map(|&(_, _, c)| {
                let c = c as f64;
                c * c.log2()
            })
            .sum();
        let cols: f64 = self
            .column_counts()
            .into_iter()
            .filter(|&c| c > 0.0)
            .map(|c| c * c.log2())
            .sum();
        (cols - joint) / total
    }

    /// Conditional entropy bound `H(M|N)/w0 + log2(bin_a)`, mirroring the
    /// dense `coarsegrain::conditional_entropy_bound` without densifying.
    pub fn conditional_bound(&self, w0: f64, majorization_attested: bool) -> Result<EntropyBound> {
        if !(w0 > 0.0 && w0 <= 1.0) || !w0.is_finite() {
            return Err(Error::W0OutOfRange(w0));
        }
        if self.total == 0 {
            return Err(Error::InvalidParameter("table holds no counts".into()));
        }
        let conditional = self.conditional_entropy_bits();
        Ok(EntropyBound {
            value_bits: conditional / w0 + self.bin_a.log2(),
            kind: BoundKind::Conditional,
            correction_w0: w0,
            valid: majorization_attested,
            provenance: format!(
                "H(A|B) = {conditional:.12} bits / w0 = {w0} + log2(bin {:.6e}) from {} counts",
                self.bin_a, self.total
            ),
        })
    }

    /// Sum-variable entropy bound `H(M+N) + log2(bin)`.
    pub fn sum_bound(&self, majorization_attested: bool) -> Result<EntropyBound> {
        if self.total == 0 {
            return Err(Error::InvalidParameter("table holds no counts".into()));
        }
        let grained = self.k_marginal()?;
        let mut bound = entropy_bound_1d(&grained, BoundKind::SumVariable, majorization_attested)?;
        bound.provenance = format!("{}; from {} counts", bound.provenance, self.total);
        Ok(bound)
    }
}

/// Read a joint count CSV with header `m_index,n_index,counts`. Dimensions
/// are inferred from the largest indices; geometry starts on the index
/// lattice. Lines starting with `#` are ignored.
pub fn load_joint_counts(path: &Path) -> Result<JointCountTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    let expected = ["m_index", "n_index", "counts"];
    if headers.iter().map(str::trim).ne(expected) {
        return Err(Error::Schema {
            line: 1,
            message: format!(
                "expected header `m_index,n_index,counts`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut entries = Vec::new();
    let mut rows = 0usize;
    let mut cols = 0usize;
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != 3 {
            return Err(Error::Schema {
                line,
                message: format!("expected 3 fields, got {}", record.len()),
            });
        }
        let parse_index = |field: &str, name: &str| -> Result<u32> {
            field.trim().parse().map_err(|_| Error::Schema {
                line,
                message: format!("{name} `{field}` is not a non-negative integer"),
            })
        };
        let m = parse_index(&record[0], "m_index")?;
        let n = parse_index(&record[1], "n_index")?;
        let c: u64 = record[2].trim().parse().map_err(|_| Error::Schema {
            line,
            message: format!("counts `{}` is not a non-negative integer", &record[2]),
        })?;
        rows = rows.max(m as usize + 1);
        cols = cols.max(n as usize + 1);
        entries.push((m, n, c));
    }
    if entries.is_empty() {
        return Err(Error::Schema {
            line: 2,
            message: "joint count table has no rows".into(),
        });
    }
    JointCountTable::indexed(entries, rows, cols)
}

/// Write a joint count table in the schema [`load_joint_counts`] reads.
pub fn write_joint_counts(table: &JointCountTable, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "m_index,n_index,counts")?;
    for &(m, n, c) in table.entries() {
        writeln!(out, "{m},{n},{c}")?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Campaign simulation.
// ---------------------------------------------------------------------------

/// Timing side of a simulated campaign.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct TimingSimConfig {
    /// Observed Gaussian width of `t_A - t_B`, seconds.
    pub sigma_observed: f64,
    /// Histogram bin width, seconds.
    pub bin_width: f64,
    /// Half-width of the recorded window around zero delay, seconds.
    pub window_halfwidth: f64,
    /// Expected accidental counts per bin.
    pub background_per_bin: f64,
}

impl TimingSimConfig {
    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sigma_observed", self.sigma_observed),
            ("bin_width", self.bin_width),
            ("window_halfwidth", self.window_halfwidth),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(self.background_per_bin >= 0.0) || !self.background_per_bin.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "background_per_bin must be non-negative, got {}",
                self.background_per_bin
            )));
        }
        let bins = 2.0 * self.window_halfwidth / self.bin_width;
        if bins < 3.0 || bins > 5e6 {
            return Err(Error::InvalidParameter(format!(
                "timing window spans {bins:.0} bins; need between 3 and 5e6"
            )));
        }
        Ok(())
    }
}

/// Inputs for one synthetic coincidence campaign.
#[derive(Debug, Clone)]
pub struct CampaignConfig {
    pub total_pairs: u64,
    pub bank_a: FilterBank,
    pub bank_b: FilterBank,
    /// Uniform per-filter center jitter, in units of each filter's FWHM.
    pub center_jitter_fwhm: f64,
    /// Uniform per-filter width scale jitter; scales drawn from [1-e, 1+e].
    pub width_jitter: f64,
    pub rng_seed: u64,
    /// Expected accidental counts per filter-pair cell.
    pub background_rate: f64,
    pub timing: Option<TimingSimConfig>,
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<()> {
        if self.total_pairs == 0 {
            return Err(Error::InvalidParameter("total_pairs must be positive".into()));
        }
        if !(self.center_jitter_fwhm >= 0.0) || !self.center_jitter_fwhm.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "center jitter must be non-negative, got {}",
                self.center_jitter_fwhm
            )));
        }
        if !(self.width_jitter >= 0.0 && self.width_jitter <= 0.5) {
            return Err(Error::InvalidParameter(format!(
                "width jitter must lie in [0, 0.5], got {}",
                self.width_jitter
            )));
        }
        if !(self.background_rate >= 0.0) || !self.background_rate.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "background rate must be non-negative, got {}",
                self.background_rate
            )));
        }
        if let Some(t) = &self.timing {
            t.validate()?;
        }
        Ok(())
    }
}

/// One simulated campaign: counts, the banks as realized under jitter, and
/// optionally a timing histogram.
#[derive(Debug, Clone)]
pub struct CampaignOutput {
    pub table: JointCountTable,
    pub realized_bank_a: FilterBank,
    pub realized_bank_b: FilterBank,
    pub histogram: Option<CoincidenceHistogram>,
    pub coverage: f64,
    pub warnings: Vec<String>,
    pub rng_algorithm: &'static str,
}

fn scaled_shape(shape: &FilterShape, scale: f64) -> Result<FilterShape> {
    Ok(match shape {
        FilterShape::TopHat { width } => FilterShape::TopHat { width: width * scale },
        FilterShape::Lorentzian { fwhm } => FilterShape::Lorentzian { fwhm: fwhm * scale },
        FilterShape::Gaussian { sigma } => FilterShape::Gaussian { sigma: sigma * scale },
        FilterShape::Voigt {
            fwhm_lorentz,
            sigma_gauss,
        } => FilterShape::Voigt {
            fwhm_lorentz: fwhm_lorentz * scale,
            sigma_gauss: sigma_gauss * scale,
        },
        FilterShape::Tabulated(_) => {
            return Err(Error::InvalidParameter(
                "width jitter on tabulated profiles is not supported".into(),
            ))
        }
    })
}

/// Draw a jittered realization of a bank: each filter's center moves
/// uniformly within +/- delta FWHM and its width scales uniformly within
/// [1 - eps, 1 + eps]. Nominal centers and spacing are kept so detunings
/// are measured against the design comb.
fn jittered_bank(bank: &FilterBank, delta: f64, eps: f64, seed: u64, domain: u64) -> Result<FilterBank> {
    if delta == 0.0 && eps == 0.0 {
        return Ok(bank.clone());
    }
    let profiles = bank
        .profiles()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut rng = derive_stream(seed, domain, i as u64, 0);
            let shift = if delta == 0.0 {
                0.0
            } else {
                rand::Rng::random_range(&mut rng, -delta..=delta) * p.characteristic_fwhm()
            };
            let scale = if eps == 0.0 {
                1.0
            } else {
                rand::Rng::random_range(&mut rng, 1.0 - eps..=1.0 + eps)
            };
            FilterProfile::new(scaled_shape(p.shape(), scale)?, p.center() + shift)
        })
        .collect::<Result<Vec<_>>>()?;
    FilterBank::new(
        profiles,
        bank.nominal_spacing(),
        bank.nominal_centers().to_vec(),
    )
}

/// Expected (pre-noise) outcome of a campaign on a gridded density.
#[derive(Debug, Clone)]
pub struct ExpectedJoint {
    pub sampled: SampledJoint,
    /// Dense row-major expected counts `N * P(m, n) + background`.
    pub mean_counts: Vec<f64>,
    pub bank_a: FilterBank,
    pub bank_b: FilterBank,
}

/// Realize the jittered banks and push the density through them, returning
/// expected counts per cell without shot noise.
pub fn expected_joint(rho: &Grid2D, cfg: &CampaignConfig) -> Result<ExpectedJoint> {
    cfg.validate()?;
    let bank_a = jittered_bank(
        &cfg.bank_a,
        cfg.center_jitter_fwhm,
        cfg.width_jitter,
        cfg.rng_seed,
        DOMAIN_JITTER_A,
    )?;
    let bank_b = jittered_bank(
        &cfg.bank_b,
        cfg.center_jitter_fwhm,
        cfg.width_jitter,
        cfg.rng_seed,
        DOMAIN_JITTER_B,
    )?;
    let sampled = filter_sample_joint(rho, &bank_a, &bank_b)?;
    let n = cfg.total_pairs as f64;
    let mean_counts = sampled
        .grained
        .probs()
        .as_slice()
        .iter()
        .map(|&p| n * p + cfg.background_rate)
        .collect();
    Ok(ExpectedJoint {
        sampled,
        mean_counts,
        bank_a,
        bank_b,
    })
}

fn simulate_timing_histogram(
    t: &TimingSimConfig,
    pairs: u64,
    seed: u64,
) -> Result<CoincidenceHistogram> {
    t.validate()?;
    let bins = (2.0 * t.window_halfwidth / t.bin_width).round().max(3.0) as usize;
    let t0 = -0.5 * bins as f64 * t.bin_width;
    let sigma = t.sigma_observed;
    let counts: Vec<f64> = (0..bins)
        .map(|i| {
            let left = t0 + i as f64 * t.bin_width;
            let mass = normal_cdf((left + t.bin_width) / sigma) - normal_cdf(left / sigma);
            let lambda = pairs as f64 * mass + t.background_per_bin;
            let mut rng = derive_stream(seed, DOMAIN_TIMING, i as u64, 0);
            poisson_draw(&mut rng, lambda) as f64
        })
        .collect();
    CoincidenceHistogram::new(t.bin_width, t0, counts)
}

/// Simulate a campaign on an explicit spectral density grid: expected
/// counts from filter sampling, then an independent Poisson draw per cell
/// from its derived stream. Coverage failures propagate from the sampler.
pub fn simulate_campaign(rho: &Grid2D, cfg: &CampaignConfig) -> Result<CampaignOutput> {
    let expected = expected_joint(rho, cfg)?;
    let rows = expected.sampled.grained.probs().rows();
    let cols = expected.sampled.grained.probs().cols();
    let mean = &expected.mean_counts;
    let per_row: Vec<Vec<(u32, u32, u64)>> = (0..rows)
        .into_par_iter()
        .map(|m| {
            let mut row = Vec::new();
            for n in 0..cols {
                let lambda = mean[m * cols + n];
                if lambda <= 0.0 {
                    continue;
                }
                let mut rng = derive_stream(cfg.rng_seed, DOMAIN_JOINT, m as u64, n as u64);
                let c = poisson_draw(&mut rng, lambda);
                if c > 0 {
                    row.push((m as u32, n as u32, c));
                }
            }
            row
        })
        .collect();
    let entries: Vec<(u32, u32, u64)> = per_row.into_iter().flatten().collect();
    let grained = &expected.sampled.grained;
    let table = JointCountTable::new(
        entries,
        rows,
        cols,
        grained.bin_a(),
        grained.bin_b(),
        grained.origin_a(),
        grained.origin_b(),
    )?;
    let histogram = cfg
        .timing
        .as_ref()
        .map(|t| simulate_timing_histogram(t, cfg.total_pairs, cfg.rng_seed))
        .transpose()?;
    Ok(CampaignOutput {
        table,
        realized_bank_a: expected.bank_a,
        realized_bank_b: expected.bank_b,
        histogram,
        coverage: expected.sampled.coverage,
        warnings: expected.sampled.warnings,
        rng_algorithm: RNG_ALGORITHM,
    })
}

/// Uniform-Lorentzian-comb description extracted from a bank, for the
/// analytic campaign path.
struct LorentzianComb {
    first_center: f64,
    spacing: f64,
    count: usize,
    fwhm: f64,
}

fn lorentzian_comb(bank: &FilterBank) -> Result<LorentzianComb> {
    let spacing = bank.nominal_spacing();
    let mut fwhm = None;
    for (profile, &nominal) in bank.profiles().iter().zip(bank.nominal_centers()) {
        let f = match profile.shape() {
            FilterShape::Lorentzian { fwhm } => *fwhm,
            other => {
                return Err(Error::InvalidParameter(format!(
                    "analytic campaign path needs Lorentzian filters, found {other:?}"
                )))
            }
        };
        match fwhm {
            None => fwhm = Some(f),
            Some(prev) if ((f - prev) / prev).abs() > 1e-9 => {
                return Err(Error::InvalidParameter(
                    "analytic campaign path needs identical filter widths".into(),
                ))
            }
            _ => {}
        }
        if (profile.center() - nominal).abs() > 1e-9 * spacing {
            return Err(Error::InvalidParameter(
                "analytic campaign path needs filters on their nominal comb".into(),
            ));
        }
    }
    Ok(LorentzianComb {
        first_center: bank.nominal_centers()[0],
        spacing,
        count: bank.len(),
        fwhm: fwhm.expect("bank is never empty"),
    })
}

/// Simulate a campaign for a downconversion source viewed through uniform
/// narrowband Lorentzian combs, without ever building a spectral grid.
///
/// When the filter FWHM `a` is far below the phasematch bandwidth, the
/// phasematch Gaussian is flat across a filter pair and the expected count
/// factorizes into `exp(-(c_m - c_n)^2 / 2 sigma_minus^2)` times a Voigt
/// profile (Lorentzian FWHM `2a` from the pair sum response, Gaussian
/// `sigma_plus` from the pump) evaluated at `c_m + c_n - pump_center`.
/// Cells are sampled over the band of sum diagonals that keeps the
/// truncated Lorentzian tail below 1e-4 per side; probabilities are
/// normalized over that band. Requires jitter-free banks with equal
/// spacing; coverage is the analytic marginal mass over each comb's span,
/// combined with the two-sided union bound.
pub fn simulate_spdc_campaign(
    params: &SpdcParams,
    cfg: &CampaignConfig,
) -> Result<CampaignOutput> {
    cfg.validate()?;
    let mut warnings = params.validate()?;
    if cfg.center_jitter_fwhm != 0.0 || cfg.width_jitter != 0.0 {
        return Err(Error::InvalidParameter(
            "analytic campaign path requires jitter-free banks; use simulate_campaign".into(),
        ));
    }
    let comb_a = lorentzian_comb(&cfg.bank_a)?;
    let comb_b = lorentzian_comb(&cfg.bank_b)?;
    if ((comb_a.spacing - comb_b.spacing) / comb_a.spacing).abs() > 1e-9
        || ((comb_a.fwhm - comb_b.fwhm) / comb_a.fwhm).abs() > 1e-9
    {
        return Err(Error::InvalidParameter(
            "analytic campaign path needs matching spacing and width across arms".into(),
        ));
    }
    let spacing = comb_a.spacing;
    let fwhm = comb_a.fwhm;
    let sigma_plus = params.pump_sigma;
    let sigma_minus = params.phasematch_sigma;
    if fwhm > NARROWBAND_RATIO * sigma_minus * (1.0 + 1e-9) {
        return Err(Error::InvalidParameter(format!(
            "filter FWHM {fwhm:.3e} exceeds {NARROWBAND_RATIO} of the phasematch bandwidth \
             {sigma_minus:.3e}; the factorized expected counts would not be trustworthy"
        )));
    }

    let rows = comb_a.count;
    let cols = comb_b.count;
    // Sum lattice: k = m + n has center sum first_a + first_b + k * spacing.
    let sum_origin = comb_a.first_center + comb_b.first_center;
    let k_center = ((params.pump_center - sum_origin) / spacing).round();
    let k_half = (fwhm / (std::f64::consts::PI * SUM_TAIL_TARGET * spacing)
        + 10.0 * (sigma_plus + fwhm) / spacing)
        .ceil() as i64;
    let k_lo = ((k_center as i64) - k_half).max(0) as usize;
    let k_hi = (((k_center as i64) + k_half).max(0) as usize).min(rows + cols - 2);
    if k_lo > k_hi {
        return Err(Error::InvalidParameter(
            "filter combs do not reach the pump line; no cell has appreciable signal".into(),
        ));
    }
    warnings.push(format!(
        "sum diagonals truncated to k in [{k_lo}, {k_hi}]; per-side Lorentzian tail <= {SUM_TAIL_TARGET}"
    ));

    // Voigt table over the band: pair sum response (Lorentzian FWHM 2a)
    // convolved numerically with the pump Gaussian.
    let gamma = fwhm; // HWHM of the pair sum response
    let step = (fwhm.min(sigma_plus)) / 12.0;
    let half_nodes = (9.0 * sigma_plus / step).ceil() as usize;
    let nodes = 2 * half_nodes + 1;
    let weights = crate::quad::simpson_weights(nodes, step);
    let gauss: Vec<f64> = (0..nodes)
        .map(|i| {
            let u = (i as f64 - half_nodes as f64) * step;
            weights[i] * (-0.5 * (u / sigma_plus) * (u / sigma_plus)).exp()
        })
        .collect();
    let voigt: Vec<f64> = (k_lo..=k_hi)
        .into_par_iter()
        .map(|k| {
            let s = sum_origin + k as f64 * spacing - params.pump_center;
            gauss
                .iter()
                .enumerate()
                .map(|(i, &g)| {
                    let x = s - (i as f64 - half_nodes as f64) * step;
                    g * (gamma / std::f64::consts::PI) / (x * x + gamma * gamma)
                })
                .sum()
        })
        .collect();

    // Detuning-difference Gaussian over jj = m - n + (cols - 1), with
    // parity-split prefix sums so each diagonal's normalization is O(1).
    let diff_offset = comb_a.first_center - comb_b.first_center;
    let jj_len = rows + cols - 1;
    let gdiff: Vec<f64> = (0..jj_len)
        .map(|jj| {
            let d = diff_offset + (jj as f64 - (cols - 1) as f64) * spacing;
            (-0.5 * (d / sigma_minus) * (d / sigma_minus)).exp()
        })
        .collect();
    let mut prefix = vec![0.0; jj_len + 2];
    for jj in 0..jj_len {
        prefix[jj + 2] = prefix[jj] + gdiff[jj];
    }
    let parity_sum = |lo: usize, hi: usize| -> f64 {
        // Sum of gdiff over jj = lo, lo+2, ..., hi.
        prefix[hi + 2] - prefix[lo]
    };

    let diag_range = |k: usize| {
        let m_lo = k.saturating_sub(cols - 1);
        let m_hi = k.min(rows - 1);
        (m_lo, m_hi)
    };
    let mut z = 0.0;
    for k in k_lo..=k_hi {
        let (m_lo, m_hi) = diag_range(k);
        let jj_lo = 2 * m_lo + (cols - 1) - k;
        let jj_hi = 2 * m_hi + (cols - 1) - k;
        z += voigt[k - k_lo] * parity_sum(jj_lo, jj_hi);
    }
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::QuadratureFailure(format!(
            "analytic campaign normalization came out as {z}"
        )));
    }

    let n_pairs = cfg.total_pairs as f64;
    let per_diag: Vec<Vec<(u32, u32, u64)>> = (k_lo..=k_hi)
        .into_par_iter()
        .map(|k| {
            let (m_lo, m_hi) = diag_range(k);
            let vk = voigt[k - k_lo];
            let mut out = Vec::new();
            for m in m_lo..=m_hi {
                let n = k - m;
                let jj = 2 * m + (cols - 1) - k;
                let lambda = n_pairs * vk * gdiff[jj] / z + cfg.background_rate;
                if lambda <= 0.0 {
                    continue;
                }
                let mut rng = derive_stream(cfg.rng_seed, DOMAIN_JOINT, m as u64, n as u64);
                let c = poisson_draw(&mut rng, lambda);
                if c > 0 {
                    out.push((m as u32, n as u32, c));
                }
            }
            out
        })
        .collect();
    let entries: Vec<(u32, u32, u64)> = per_diag.into_iter().flatten().collect();

    // Coverage: each arm marginal is Gaussian around half the pump line;
    // the rectangle mass is bounded below by the union bound over arms.
    let arm_sigma = params.arm_sigma();
    let arm_mean = 0.5 * params.pump_center;
    let span_mass = |comb: &LorentzianComb| {
        let lo = comb.first_center - 0.5 * comb.spacing;
        let hi = comb.first_center + (comb.count as f64 - 0.5) * comb.spacing;
        normal_cdf((hi - arm_mean) / arm_sigma) - normal_cdf((lo - arm_mean) / arm_sigma)
    };
    let coverage = (span_mass(&comb_a) + span_mass(&comb_b) - 1.0).max(0.0);
    coverage_gate(coverage, &mut warnings)?;

    let table = JointCountTable::new(
        entries,
        rows,
        cols,
        spacing,
        spacing,
        comb_a.first_center - 0.5 * spacing,
        comb_b.first_center - 0.5 * spacing,
    )?;
    let histogram = cfg
        .timing
        .as_ref()
        .map(|t| simulate_timing_histogram(t, cfg.total_pairs, cfg.rng_seed))
        .transpose()?;
    Ok(CampaignOutput {
        table,
        realized_bank_a: cfg.bank_a.clone(),
        realized_bank_b: cfg.bank_b.clone(),
        histogram,
        coverage,
        warnings,
        rng_algorithm: RNG_ALGORITHM,
    })
}

// ---------------------------------------------------------------------------
// Bootstrap uncertainty on the witness margin.
// ---------------------------------------------------------------------------

/// Evidence that the frequency bounds' majorization preconditions were
/// checked, carried alongside the counts into the bootstrap.
#[derive(Debug, Clone, Copy)]
pub struct BankEvidence {
    pub w0: f64,
    pub majorization_attested: bool,
}

/// Shot-noise uncertainty on the witness margin.
#[derive(Debug, Clone, serde::Serialize)]
pub struct BootstrapReport {
    pub resamples: usize,
    /// Margin of the input counts themselves, no resampling.
    pub margin_plugin: f64,
    pub margin_mean: f64,
    /// 2.5th percentile of resampled margins.
    pub ci_low: f64,
    /// 97.5th percentile of resampled margins.
    pub ci_high: f64,
    pub rng_algorithm: &'static str,
}

fn plugin_entropy_bits(counts: &[f64]) -> f64 {
    let total: f64 = counts.iter().sum();
    let s: f64 = counts
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| c * c.log2())
        .sum();
    total.log2() - s / total
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let idx = q * (sorted.len() - 1) as f64;
    let lo = idx.floor() as usize;
    let hi = idx.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (idx - lo as f64)
}

/// Parametric bootstrap of the witness margin: each resample redraws every
/// count as Poisson with the observed count as intensity (bin-wise for the
/// histogram, cell-wise for the conditional table, diagonal-wise for the
/// sum variable, which is equivalent by Poisson additivity) and recomputes
/// the margin through the same bound arithmetic as the plug-in path.
pub fn bootstrap_margin(
    table: &JointCountTable,
    histogram: &CoincidenceHistogram,
    evidence: &BankEvidence,
    inequality: Inequality,
    n_resamples: usize,
    seed: u64,
) -> Result<BootstrapReport> {
    if n_resamples < MIN_RESAMPLES {
        return Err(Error::InsufficientResamples { got: n_resamples });
    }
    if table.total() == 0 || !(histogram.total() > 0.0) {
        return Err(Error::InvalidParameter(
            "cannot bootstrap an empty campaign".into(),
        ));
    }
    let time_bound = timing_entropy_bound(histogram)?;
    let freq_bound = match inequality {
        Inequality::Conditional => table.conditional_bound(evidence.w0, evidence.majorization_attested)?,
        Inequality::SumDiff => table.sum_bound(evidence.majorization_attested)?,
    };
    let plugin = evaluate_witness(&time_bound, &freq_bound, inequality)?;

    let threshold = inequality.threshold_bits();
    let log_bin = table.bin_a().log2();
    let log_dt = histogram.bin_width().log2();
    let sum_counts: Vec<f64> = table.sum_counts().into_iter().map(|c| c as f64).collect();

    let mut margins: Vec<f64> = (0..n_resamples)
        .into_par_iter()
        .map(|b| {
            let mut rng = derive_stream(seed, DOMAIN_BOOTSTRAP, b as u64, 0);
            let h_freq = match inequality {
                Inequality::Conditional => {
                    let mut col = vec![0.0_f64; table.cols()];
                    let mut total = 0.0;
                    let mut joint = 0.0;
                    for &(_, n, c) in table.entries() {
                        let c = poisson_draw(&mut rng, c as f64) as f64;
                        if c > 0.0 {
                            total += c;
                            joint += c * c.log2();
                            col[n as usize] += c;
                        }
                    }
                    if total == 0.0 {
                        return f64::NEG_INFINITY;
                    }
                    let cols: f64 = col
                        .into_iter()
                        .filter(|&c| c > 0.0)
                        .map(|c| c * c.log2())
                        .sum();
                    (cols - joint) / total / evidence.w0 + log_bin
                }
                Inequality::SumDiff => {
                    let resampled: Vec<f64> = sum_counts
                        .iter()
                        .map(|&c| poisson_draw(&mut rng, c) as f64)
                        .collect();
                    if resampled.iter().sum::<f64>() == 0.0 {
                        return f64::NEG_INFINITY;
                    }
                    plugin_entropy_bits(&resampled) + log_bin
                }
            };
            let resampled_t: Vec<f64> = histogram
                .counts()
                .iter()
                .map(|&c| poisson_draw(&mut rng, c) as f64)
                .collect();
            if resampled_t.iter().sum::<f64>() == 0.0 {
                return f64::NEG_INFINITY;
            }
            let h_time = plugin_entropy_bits(&resampled_t) + log_dt;
            threshold - (h_time + h_freq)
        })
        .collect();
    margins.sort_unstable_by(|a, b| a.partial_cmp(b).expect("margins are never NaN"));
    let mean = margins.iter().sum::<f64>() / margins.len() as f64;
    Ok(BootstrapReport {
        resamples: n_resamples,
        margin_plugin: plugin.margin,
        margin_mean: mean,
        ci_low: percentile(&margins, 0.025),
        ci_high: percentile(&margins, 0.975),
        rng_algorithm: RNG_ALGORITHM,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coarsegrain::conditional_entropy_bound;

    fn write_file(dir: &tempfile::TempDir, name: &str, content: &str) -> std::path::PathBuf {
        let path = dir.path().join(name);
        std::fs::write(&path, content).unwrap();
        path
    }

    fn gaussian_histogram(
        fwhm: f64,
        bin: f64,
        scale: f64,
        span_sigmas: f64,
    ) -> CoincidenceHistogram {
        let ideal = gaussian_difference_histogram(fwhm, bin, span_sigmas, scale).unwrap();
        let counts = ideal.counts().iter().map(|c| c.round()).collect();
        CoincidenceHistogram::new(ideal.bin_width(), ideal.t0(), counts).unwrap()
    }

    #[test]
    fn histogram_csv_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let original = "bin_start_ps,counts\n-1,3\n0,10\n1,2\n";
        let path = write_file(&dir, "hist.csv", original);
        let h = load_histogram(&path).unwrap();
        assert_eq!(h.counts(), &[3.0, 10.0, 2.0]);
        assert!((h.bin_width() - 1e-12).abs() < 1e-21);
        assert!((h.t0() + 1e-12).abs() < 1e-21);
        let out = dir.path().join("hist_out.csv");
        write_histogram(&h, &out).unwrap();
        assert_eq!(std::fs::read_to_string(&out).unwrap(), original);
    }

    #[test]
    fn leading_comment_lines_are_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let hist = write_file(
            &dir,
            "hist.csv",
            "# manifest_digest=abc123\nbin_start_ps,counts\n-1,3\n0,10\n1,2\n",
        );
        let h = load_histogram(&hist).unwrap();
        assert_eq!(h.counts(), &[3.0, 10.0, 2.0]);

        let joint = write_file(
            &dir,
            "joint.csv",
            "# manifest_digest=abc123\nm_index,n_index,counts\n0,0,4\n1,1,6\n",
        );
        let t = load_joint_counts(&joint).unwrap();
        assert_eq!(t.total(), 10);

        // Error lines still point at the true file line past a comment.
        let bad = write_file(
            &dir,
            "bad.csv",
            "# comment\nbin_start_ps,counts\n0,1\n1,2\n5,3\n",
        );
        match load_histogram(&bad) {
            Err(Error::Schema { line, .. }) => assert_eq!(line, 5),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn histogram_schema_errors_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let bad_header = write_file(&dir, "a.csv", "start,counts\n0,1\n1,2\n");
        match load_histogram(&bad_header) {
            Err(Error::Schema { line: 1, message }) => {
                assert!(message.contains("bin_start_ps"), "{message}")
            }
            other => panic!("expected header schema error, got {other:?}"),
        }
        let negative = write_file(&dir, "b.csv", "bin_start_ps,counts\n0,1\n1,-4\n");
        match load_histogram(&negative) {
            Err(Error::Schema { line: 3, .. }) => {}
            other => panic!("expected line-3 schema error, got {other:?}"),
        }
        let jagged = write_file(&dir, "c.csv", "bin_start_ps,counts\n0,1\n1,2\n2.5,3\n");
        match load_histogram(&jagged) {
            Err(Error::Schema { line, message }) => {
                assert_eq!(line, 4);
                assert!(message.contains("non-uniform"), "{message}");
            }
            other => panic!("expected spacing schema error, got {other:?}"),
        }
        let single = write_file(&dir, "d.csv", "bin_start_ps,counts\n0,1\n");
        assert!(matches!(load_histogram(&single), Err(Error::Schema { .. })));
    }

    #[test]
    fn joint_counts_round_trip_and_schema() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(&dir, "joint.csv", "m_index,n_index,counts\n0,1,5\n2,0,7\n");
        let table = load_joint_counts(&path).unwrap();
        assert_eq!(table.rows(), 3);
        assert_eq!(table.cols(), 2);
        assert_eq!(table.entries(), &[(0, 1, 5), (2, 0, 7)]);
        assert_eq!(table.total(), 12);
        let out = dir.path().join("joint_out.csv");
        write_joint_counts(&table, &out).unwrap();
        let again = load_joint_counts(&out).unwrap();
        assert_eq!(again, table);

        let fractional = write_file(&dir, "f.csv", "m_index,n_index,counts\n0,0,1.5\n0,1,2\n");
        match load_joint_counts(&fractional) {
            Err(Error::Schema { line: 2, message }) => {
                assert!(message.contains("integer"), "{message}")
            }
            other => panic!("expected integer schema error, got {other:?}"),
        }
        let duplicate = write_file(&dir, "g.csv", "m_index,n_index,counts\n0,0,1\n0,0,2\n");
        assert!(matches!(load_joint_counts(&duplicate), Err(Error::Schema { .. })));
    }

    #[test]
    fn flat_histogram_subtracts_to_zero() {
        let h = CoincidenceHistogram::new(1e-12, 0.0, vec![7.0; 50]).unwrap();
        let sub = subtract_background(&h, 0.25).unwrap();
        assert!(sub.counts().iter().all(|&c| c == 0.0));
        assert_eq!(sub.background_per_bin(), 7.0);
        assert!(sub.total() <= h.total());
    }

    #[test]
    fn peak_on_zero_floor_is_unchanged() {
        let h = gaussian_histogram(50e-12, 2e-12, 1e6, 12.0);
        let sub = subtract_background(&h, 0.2).unwrap();
        assert_eq!(sub.counts(), h.counts());
        assert_eq!(sub.background_per_bin(), 0.0);
    }

    #[test]
    fn uniform_floor_is_recovered_within_entropy_tolerance() {
        let clean = gaussian_histogram(80e-12, 2e-12, 2e6, 6.0);
        let floored = CoincidenceHistogram::new(
            clean.bin_width(),
            clean.t0(),
            clean.counts().iter().map(|&c| c + 100.0).collect(),
        )
        .unwrap();
        let sub = subtract_background(&floored, 0.15).unwrap();
        assert!((sub.background_per_bin() - 100.0).abs() < 1.0);
        assert!(sub.total() <= floored.total());
        let h_clean = timing_entropy_bound(&clean).unwrap().value_bits;
        let h_sub = timing_entropy_bound(&sub).unwrap().value_bits;
        assert!(
            (h_clean - h_sub).abs() < 0.05,
            "entropy after subtraction {h_sub} vs clean {h_clean}"
        );
    }

    #[test]
    fn peak_in_wings_is_rejected() {
        // Peak parked at the edge of the window.
        let mut counts = vec![2.0; 40];
        counts[1] = 1000.0;
        let h = CoincidenceHistogram::new(1e-12, 0.0, counts).unwrap();
        match subtract_background(&h, 0.05) {
            Err(Error::PeakInWings { wing_mean, max }) => {
                assert!(wing_mean > 0.1 * max);
            }
            other => panic!("expected peak-in-wings error, got {other:?}"),
        }
        assert!(subtract_background(&h, 0.0).is_err());
        assert!(subtract_background(&h, 0.5).is_err());
    }

    #[test]
    fn single_bin_timing_bound_is_log_bin_width() {
        let h = CoincidenceHistogram::new(1e-12, 0.0, vec![0.0, 40.0, 0.0]).unwrap();
        let bound = timing_entropy_bound(&h).unwrap();
        assert!((bound.value_bits - (1e-12_f64).log2()).abs() < 1e-12);
        assert_eq!(bound.kind, BoundKind::DiffVariable);
        assert!(bound.valid);
    }

    #[test]
    fn worked_gaussian_timing_bound() {
        let h = gaussian_histogram(424e-12, 1e-12, 1e9, 6.0);
        let bound = timing_entropy_bound(&h).unwrap();
        assert!(
            (bound.value_bits + 30.34).abs() < 0.05,
            "bound {}",
            bound.value_bits
        );
        // Finer bins on the same density can only tighten the bound.
        let fine = gaussian_histogram(424e-12, 0.5e-12, 1e9, 6.0);
        let fine_bound = timing_entropy_bound(&fine).unwrap();
        assert!(fine_bound.value_bits <= bound.value_bits + 1e-6);
    }

    fn desk_density() -> Grid2D {
        Grid2D::from_fn(-4.0, 0.02, 400, -4.0, 0.02, 400, |a, b| {
            let s = a + b;
            let d = a - b;
            (-0.5 * (s / 0.25) * (s / 0.25) - 0.5 * (d / 1.4) * (d / 1.4)).exp()
        })
        .unwrap()
    }

    fn desk_bank() -> FilterBank {
        // 14 Lorentzians spanning [-3.5, 3.5]; width passes dominance at
        // spacing 0.5 and stays resolvable on the 0.02 grid.
        FilterBank::regular(
            FilterShape::Lorentzian { fwhm: 0.45 },
            -3.25,
            0.5,
            14,
        )
        .unwrap()
    }

    fn desk_config(seed: u64) -> CampaignConfig {
        CampaignConfig {
            total_pairs: 200_000,
            bank_a: desk_bank(),
            bank_b: desk_bank(),
            center_jitter_fwhm: 0.0,
            width_jitter: 0.0,
            rng_seed: seed,
            background_rate: 0.0,
            timing: Some(TimingSimConfig {
                sigma_observed: 28e-12,
                bin_width: 1e-12,
                window_halfwidth: 200e-12,
                background_per_bin: 0.5,
            }),
        }
    }

    #[test]
    fn expected_counts_match_filter_probabilities_exactly() {
        let rho = desk_density();
        let cfg = desk_config(7);
        let expected = expected_joint(&rho, &cfg).unwrap();
        let direct = filter_sample_joint(&rho, &cfg.bank_a, &cfg.bank_b).unwrap();
        assert_eq!(
            expected.sampled.grained.probs().as_slice(),
            direct.grained.probs().as_slice()
        );
        let n = cfg.total_pairs as f64;
        for (lambda, p) in expected
            .mean_counts
            .iter()
            .zip(direct.grained.probs().as_slice())
        {
            assert_eq!(*lambda, n * p);
        }
    }

    #[test]
    fn zero_jitter_banks_are_nominal() {
        let rho = desk_density();
        let cfg = desk_config(3);
        let out = simulate_campaign(&rho, &cfg).unwrap();
        for bank in [&out.realized_bank_a, &out.realized_bank_b] {
            assert!(bank.offsets().iter().all(|&o| o == 0.0));
            for (p, q) in bank.profiles().iter().zip(cfg.bank_a.profiles()) {
                assert_eq!(p.characteristic_fwhm(), q.characteristic_fwhm());
            }
        }
        assert_eq!(out.rng_algorithm, RNG_ALGORITHM);
    }

    #[test]
    fn jittered_banks_stay_within_their_draw_bounds() {
        let mut cfg = desk_config(11);
        cfg.center_jitter_fwhm = 0.15;
        cfg.width_jitter = 0.1;
        let rho = desk_density();
        let expected = expected_joint(&rho, &cfg).unwrap();
        let mut moved = 0;
        for bank in [&expected.bank_a, &expected.bank_b] {
            for (offset, profile) in bank.offsets().iter().zip(bank.profiles()) {
                assert!(offset.abs() <= 0.15 * profile.characteristic_fwhm() * (1.0 + 1e-12));
                let scale = profile.characteristic_fwhm() / 0.45;
                assert!(
                    (0.9 - 1e-9..=1.1 + 1e-9).contains(&scale),
                    "width scale {scale}"
                );
                if offset.abs() > 0.0 {
                    moved += 1;
                }
            }
        }
        assert!(moved > 20, "jitter left {moved} filters moved");
        // Arms draw from distinct streams.
        assert_ne!(expected.bank_a.offsets(), expected.bank_b.offsets());
    }

    #[test]
    fn same_seed_is_bit_identical_across_thread_counts() {
        let rho = desk_density();
        let cfg = desk_config(99);
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| simulate_campaign(&rho, &cfg).unwrap())
        };
        let one = run(1);
        let four = run(4);
        assert_eq!(one.table.entries(), four.table.entries());
        assert_eq!(
            one.histogram.as_ref().unwrap().counts(),
            four.histogram.as_ref().unwrap().counts()
        );
        // And a different seed actually changes the draw.
        let mut other_cfg = desk_config(100);
        other_cfg.rng_seed = 100;
        let other = simulate_campaign(&rho, &other_cfg).unwrap();
        assert_ne!(one.table.entries(), other.table.entries());
    }

    #[test]
    fn simulated_counts_converge_to_expected_probabilities() {
        let rho = desk_density();
        let mut cfg = desk_config(5);
        cfg.total_pairs = 5_000_000;
        cfg.timing = None;
        let expected = expected_joint(&rho, &cfg).unwrap();
        let out = simulate_campaign(&rho, &cfg).unwrap();
        let probs = expected.sampled.grained.probs();
        let h_expected = crate::probcore::joint_entropy(probs);
        let dense = out.table.to_coarse2d().unwrap();
        let h_observed = crate::probcore::joint_entropy(dense.probs());
        assert!(
            (h_expected - h_observed).abs() < 0.02,
            "entropy drift {h_expected} vs {h_observed}"
        );
    }

    #[test]
    fn sparse_entropy_helpers_match_dense_pipeline() {
        let rho = desk_density();
        let out = simulate_campaign(&rho, &desk_config(21)).unwrap();
        let table = &out.table;
        let dense = table.to_coarse2d().unwrap();
        let sparse_bound = table.conditional_bound(0.9, true).unwrap();
        let dense_bound = conditional_entropy_bound(&dense, 0.9, true).unwrap();
        assert!((sparse_bound.value_bits - dense_bound.value_bits).abs() < 1e-10);
        assert_eq!(sparse_bound.kind, dense_bound.kind);

        let sum_sparse = table.sum_bound(true).unwrap();
        let sum_dense = entropy_bound_1d(
            &crate::coarsegrain::sum_variable_distribution(&dense).unwrap(),
            BoundKind::SumVariable,
            true,
        )
        .unwrap();
        assert!((sum_sparse.value_bits - sum_dense.value_bits).abs() < 1e-10);
        // Sum lattice centers line up with the dense convention.
        let k = table.k_marginal().unwrap();
        let sum_cg = crate::coarsegrain::sum_variable_distribution(&dense).unwrap();
        assert!((k.bin_center(0) - sum_cg.bin_center(0)).abs() < 1e-9);
    }

    // Compact enough that 10^6 pairs well-sample every mass-carrying cell:
    // plug-in entropy bias then sits far below the bootstrap interval width,
    // which is what lets the interval-containment tests below mean anything.
    fn spdc_desk() -> (SpdcParams, CampaignConfig) {
        let params = SpdcParams {
            pump_center: 4.0e5,
            pump_sigma: 1.0,
            phasematch_sigma: 35.0,
            crystal_length_mm: 20.0,
            gvd_fs2_per_mm: 292.0,
            jitter_a: 0.0,
            jitter_b: 0.0,
            timebin: 1e-12,
        };
        let spacing = 1.0;
        let fwhm = 0.7;
        let arm_sigma = params.arm_sigma();
        let halfspan = 3.7 * arm_sigma;
        let count = (2.0 * halfspan / spacing).round() as usize;
        let first = 0.5 * params.pump_center - halfspan + 0.5 * spacing;
        let bank =
            FilterBank::regular(FilterShape::Lorentzian { fwhm }, first, spacing, count).unwrap();
        let cfg = CampaignConfig {
            total_pairs: 1_000_000,
            bank_a: bank.clone(),
            bank_b: bank,
            center_jitter_fwhm: 0.0,
            width_jitter: 0.0,
            rng_seed: 17,
            background_rate: 0.0,
            timing: Some(TimingSimConfig {
                sigma_observed: 1e-4,
                bin_width: 2e-6,
                window_halfwidth: 8e-4,
                background_per_bin: 0.0,
            }),
        };
        (params, cfg)
    }

    #[test]
    fn analytic_campaign_certifies_an_entangled_desk_source() {
        let (params, cfg) = spdc_desk();
        let out = simulate_spdc_campaign(&params, &cfg).unwrap();
        assert!(out.coverage > 0.99, "coverage {}", out.coverage);
        assert!(out.table.total() > 900_000);
        let checks = cfg.bank_a.majorization_report().unwrap();
        assert!(checks.iter().all(|c| c.verdict));
        let evidence = BankEvidence {
            w0: 1.0,
            majorization_attested: true,
        };
        let report = bootstrap_margin(
            &out.table,
            out.histogram.as_ref().unwrap(),
            &evidence,
            Inequality::Conditional,
            150,
            5,
        )
        .unwrap();
        assert!(report.margin_plugin > 0.5, "margin {}", report.margin_plugin);
        assert!(report.ci_low > 0.0, "CI low {}", report.ci_low);
        assert!(report.ci_high > report.ci_low);
    }

    #[test]
    fn analytic_campaign_matches_dense_quadrature() {
        // Moderate bandwidth ratio so the dense grid stays tractable: the
        // factorized path must agree with full quadrature at the narrowband
        // boundary it advertises.
        let params = SpdcParams {
            pump_center: 20.0,
            pump_sigma: 0.04,
            phasematch_sigma: 1.6,
            crystal_length_mm: 20.0,
            gvd_fs2_per_mm: 292.0,
            jitter_a: 0.0,
            jitter_b: 0.0,
            timebin: 1e-12,
        };
        let fwhm = 0.03;
        let spacing = 0.046_875;
        let arm_sigma = params.arm_sigma();
        let halfspan = 3.7 * arm_sigma;
        let count = (2.0 * halfspan / spacing).round() as usize;
        let first = 10.0 - halfspan + 0.5 * spacing;
        let bank =
            FilterBank::regular(FilterShape::Lorentzian { fwhm }, first, spacing, count).unwrap();
        let cfg = CampaignConfig {
            total_pairs: 1,
            bank_a: bank.clone(),
            bank_b: bank,
            center_jitter_fwhm: 0.0,
            width_jitter: 0.0,
            rng_seed: 1,
            background_rate: 0.0,
            timing: None,
        };

        let step = 0.0015;
        let grid_half = halfspan + 0.35;
        let points = (2.0 * grid_half / step).round() as usize;
        let rho = Grid2D::from_fn(
            10.0 - grid_half,
            step,
            points,
            10.0 - grid_half,
            step,
            points,
            |a, b| {
                let s = a + b - params.pump_center;
                let d = a - b;
                (-0.5 * (s / params.pump_sigma) * (s / params.pump_sigma)
                    - 0.5 * (d / params.phasematch_sigma) * (d / params.phasematch_sigma))
                    .exp()
            },
        )
        .unwrap();
        let dense = filter_sample_joint(&rho, &cfg.bank_a, &cfg.bank_b).unwrap();

        // Pull the analytic expected probabilities through a huge-N run.
        let mut big = cfg.clone();
        big.total_pairs = 2_000_000_000;
        let out = simulate_spdc_campaign(&params, &big).unwrap();
        let n = big.total_pairs as f64;
        let dense_probs = dense.grained.probs();
        let mut checked = 0;
        let mut sparse_probs = vec![0.0; out.table.rows() * out.table.cols()];
        for &(m, n_idx, c) in out.table.entries() {
            sparse_probs[m as usize * out.table.cols() + n_idx as usize] = c as f64 / n;
        }
        let peak = dense_probs
            .as_slice()
            .iter()
            .cloned()
            .fold(0.0_f64, f64::max);
        // Cells on the joint far corner (difference tail times Lorentzian
        // sum tail) are the weakest point of the factorization: filter
        // tails skew the effective detuning toward zero, an error of order
        // (a |d| / sigma_minus^2) that reaches several percent out at 3
        // sigma for the boundary ratio used here. The per-cell guard is
        // therefore loose (it exists to catch lattice, parity and
        // normalization mistakes); the aggregate checks below carry the
        // real accuracy requirement.
        let mut tv = 0.0;
        for m in 0..out.table.rows() {
            for j in 0..out.table.cols() {
                let p_dense = dense_probs.get(m, j);
                let p_sparse = sparse_probs[m * out.table.cols() + j];
                tv += 0.5 * (p_sparse - p_dense).abs();
                if p_dense < 1e-2 * peak {
                    continue;
                }
                let rel = (p_sparse - p_dense).abs() / p_dense;
                assert!(
                    rel < 0.05,
                    "cell ({m}, {j}): analytic {p_sparse:.6e} vs dense {p_dense:.6e}"
                );
                checked += 1;
            }
        }
        assert!(checked > 50, "only {checked} cells carried mass");
        assert!(tv < 0.01, "total variation distance {tv}");

        // This test sits right at the admission boundary (filter width is
        // sigma_minus / 53 against the 1/50 gate), so the corner error
        // shows up as a few hundredths of a bit here. Certification
        // margins fed by this sampler are half a bit and up.
        let dense_cond = conditional_entropy_bound(&dense.grained, 1.0, true).unwrap();
        let sparse_cond = out.table.conditional_bound(1.0, true).unwrap();
        assert!(
            (dense_cond.value_bits - sparse_cond.value_bits).abs() < 0.04,
            "conditional bounds {} vs {}",
            dense_cond.value_bits,
            sparse_cond.value_bits
        );
    }

    #[test]
    fn analytic_campaign_rejects_unsuitable_banks() {
        let (params, mut cfg) = spdc_desk();
        cfg.center_jitter_fwhm = 0.1;
        assert!(matches!(
            simulate_spdc_campaign(&params, &cfg),
            Err(Error::InvalidParameter(_))
        ));

        let (params, mut cfg) = spdc_desk();
        cfg.bank_a = FilterBank::regular(
            FilterShape::Gaussian { sigma: 1.0 },
            cfg.bank_a.nominal_centers()[0],
            cfg.bank_a.nominal_spacing(),
            cfg.bank_a.len(),
        )
        .unwrap();
        assert!(simulate_spdc_campaign(&params, &cfg).is_err());

        let (mut params, cfg) = spdc_desk();
        params.phasematch_sigma = 10.0; // fwhm 0.7 > 10/50
        assert!(simulate_spdc_campaign(&params, &cfg).is_err());
    }

    #[test]
    fn huge_counts_shrink_the_bootstrap_interval() {
        let (params, mut cfg) = spdc_desk();
        cfg.total_pairs = 400_000_000;
        let out = simulate_spdc_campaign(&params, &cfg).unwrap();
        let evidence = BankEvidence {
            w0: 1.0,
            majorization_attested: true,
        };
        let report = bootstrap_margin(
            &out.table,
            out.histogram.as_ref().unwrap(),
            &evidence,
            Inequality::Conditional,
            120,
            9,
        )
        .unwrap();
        assert!(
            report.ci_high - report.ci_low < 0.005,
            "CI width {}",
            report.ci_high - report.ci_low
        );
        assert!(
            (report.margin_mean - report.margin_plugin).abs() < 0.005,
            "resample mean {} vs plug-in {}",
            report.margin_mean,
            report.margin_plugin
        );
    }

    #[test]
    fn bootstrap_interval_contains_the_noiseless_margin() {
        let (params, mut cfg) = spdc_desk();
        cfg.total_pairs = 40_000_000;
        let out = simulate_spdc_campaign(&params, &cfg).unwrap();
        let evidence = BankEvidence {
            w0: 1.0,
            majorization_attested: true,
        };
        // Noiseless oracle: margin of a near-infinite campaign plus the
        // exact Gaussian timing entropy.
        let mut big = cfg.clone();
        big.total_pairs = 2_000_000_000;
        let noiseless = simulate_spdc_campaign(&params, &big).unwrap();
        let freq = noiseless.table.conditional_bound(1.0, true).unwrap();
        let sigma = cfg.timing.as_ref().unwrap().sigma_observed;
        let h_time_true = crate::spdc::gaussian_max_entropy(sigma).unwrap();
        let truth = Inequality::Conditional.threshold_bits() - (h_time_true + freq.value_bits);

        let report = bootstrap_margin(
            &out.table,
            out.histogram.as_ref().unwrap(),
            &evidence,
            Inequality::Conditional,
            200,
            13,
        )
        .unwrap();
        assert!(
            report.ci_low <= truth && truth <= report.ci_high,
            "CI [{}, {}] misses noiseless margin {truth}",
            report.ci_low,
            report.ci_high
        );
    }

    #[test]
    fn bootstrap_is_deterministic_and_stable_in_resample_count() {
        let (params, cfg) = spdc_desk();
        let out = simulate_spdc_campaign(&params, &cfg).unwrap();
        let evidence = BankEvidence {
            w0: 1.0,
            majorization_attested: true,
        };
        let hist = out.histogram.as_ref().unwrap();
        let run = |n: usize, threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| {
                bootstrap_margin(&out.table, hist, &evidence, Inequality::SumDiff, n, 23).unwrap()
            })
        };
        let a = run(100, 1);
        let b = run(100, 4);
        assert_eq!(a.ci_low, b.ci_low);
        assert_eq!(a.ci_high, b.ci_high);
        assert_eq!(a.margin_mean, b.margin_mean);
        let wide = run(400, 4);
        // Same seed family at different depth: intervals overlap.
        assert!(a.ci_low < wide.ci_high && wide.ci_low < a.ci_high);
        assert!(matches!(
            bootstrap_margin(&out.table, hist, &evidence, Inequality::SumDiff, 99, 1),
            Err(Error::InsufficientResamples { got: 99 })
        ));
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(48))]
        #[test]
        fn background_subtraction_never_increases_counts(
            counts in proptest::collection::vec(0u32..2000, 8..60),
            wing in 0.05f64..0.4,
        ) {
            let h = CoincidenceHistogram::new(
                1e-12,
                0.0,
                counts.iter().map(|&c| c as f64).collect(),
            ).unwrap();
            match subtract_background(&h, wing) {
                Ok(sub) => {
                    proptest::prop_assert!(sub.total() <= h.total() + 1e-9);
                    proptest::prop_assert!(sub.counts().iter().all(|&c| c >= 0.0));
                    proptest::prop_assert!(sub.background_per_bin() >= 0.0);
                }
                Err(Error::PeakInWings { .. }) | Err(Error::InvalidParameter(_)) => {}
                Err(other) => return Err(proptest::test_runner::TestCaseError::fail(
                    format!("unexpected error {other:?}"),
                )),
            }
        }
    }
}
