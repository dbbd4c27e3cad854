//! Coarse-graining of continuous densities into discrete probabilities whose
//! Shannon entropy, plus a bin-width term, conservatively bounds the
//! continuous entropy of the underlying variable.
//!
//! Three acquisition regimes share this module. Top-hat binning integrates a
//! gridded density over aligned cells. Filter sampling pushes the density
//! through a bank of physical line shapes; the resulting bound is only valid
//! when every profile is majorized by the top-hat of the bank spacing, and
//! that evidence lives with the filter calibration, so the caller attests it
//! through an explicit flag rather than having it inferred here. Drifting
//! banks reuse the same sampling but divide the discrete conditional entropy
//! by the bank weight floor `w0` before the bin-width term is added. The
//! division applies only to the conditional entropy, which is non-negative;
//! applying it to a continuous entropy, which may be negative, would flip
//! the direction of the bound.
//!
//! Conventions: bin `k` of a [`CoarseGrained1D`] covers
//! `[axis_origin + k*w, axis_origin + (k+1)*w)` where `w` is the bin width.
//! Entropies are in bits, widths in the axis unit, so `H + log2(w)` bounds
//! the continuous entropy relative to that unit.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::filters::FilterBank;
use crate::probcore::{
    conditional_entropy, shannon_entropy, Grid1D, Grid2D, ProbMatrix, ProbVector, Subsystem,
};
use crate::quad::simpson_weights;
use crate::units::GRID_TOL;

/// Points per narrowest filter FWHM required of the quadrature grid.
/// Under-resolved filters silently destroy conservativeness, so this is a
/// hard precondition, not a warning.
pub const MIN_POINTS_PER_FWHM: f64 = 20.0;

/// Coverage below this fraction is a hard error.
pub const COVERAGE_FLOOR: f64 = 0.99;

/// Coverage below this fraction is reported as a warning.
pub const COVERAGE_WARN: f64 = 0.999;

/// Which continuous entropy a discrete bound stands in for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Joint,
    Conditional,
    Marginal,
    SumVariable,
    DiffVariable,
}

impl std::fmt::Display for BoundKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            BoundKind::Joint => "joint",
            BoundKind::Conditional => "conditional",
            BoundKind::Marginal => "marginal",
            BoundKind::SumVariable => "sum_variable",
            BoundKind::DiffVariable => "diff_variable",
        };
        f.write_str(name)
    }
}

/// A conservative upper bound on a continuous entropy, in bits.
///
/// `valid` is false whenever any majorization precondition failed or was
/// never attested; downstream certification treats such bounds as unusable
/// but still reports them. `correction_w0` is 1 when no drifting-bank
/// correction was applied.
#[derive(Debug, Clone, serde::Serialize)]
pub struct EntropyBound {
    pub value_bits: f64,
    pub kind: BoundKind,
    pub correction_w0: f64,
    pub valid: bool,
    pub provenance: String,
}

/// Discrete probabilities over uniform bins on one axis.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CoarseGrained1D {
    probs: ProbVector,
    bin_width: f64,
    axis_origin: f64,
}

impl CoarseGrained1D {
    pub fn new(probs: ProbVector, bin_width: f64, axis_origin: f64) -> Result<Self> {
        if !(bin_width > 0.0) || !bin_width.is_finite() || !axis_origin.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "bin width {bin_width} and origin {axis_origin} must be finite, width > 0"
            )));
        }
        Ok(Self {
            probs,
            bin_width,
            axis_origin,
        })
    }

    pub fn probs(&self) -> &ProbVector {
        &self.probs
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    pub fn axis_origin(&self) -> f64 {
        self.axis_origin
    }

    pub fn bin_center(&self, k: usize) -> f64 {
        self.axis_origin + (k as f64 + 0.5) * self.bin_width
    }

    pub fn entropy_bits(&self) -> f64 {
        shannon_entropy(&self.probs)
    }

    /// The piecewise-constant density carrying `probs[k] / bin_width` on bin
    /// `k`, sampled on `cells_per_bin` cells per bin. This is the coarse
    /// density whose dominance curve must sit below the source density's.
    pub fn piecewise_density(&self, cells_per_bin: usize) -> Result<Grid1D> {
        if cells_per_bin == 0 {
            return Err(Error::InvalidParameter(
                "cells_per_bin must be positive".into(),
            ));
        }
        let step = self.bin_width / cells_per_bin as f64;
        let mut values = Vec::with_capacity(self.probs.len() * cells_per_bin);
        for &p in self.probs.as_slice() {
            let v = p / self.bin_width;
            values.extend(std::iter::repeat(v).take(cells_per_bin));
        }
        Grid1D::new(self.axis_origin, step, values)
    }
}

/// Discrete joint probabilities over a rectangular grid of bins; row index
/// is axis A, column index axis B.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CoarseGrained2D {
    probs: ProbMatrix,
    bin_a: f64,
    bin_b: f64,
    origin_a: f64,
    origin_b: f64,
}

impl CoarseGrained2D {
    pub fn new(
        probs: ProbMatrix,
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
        Ok(Self {
            probs,
            bin_a,
            bin_b,
            origin_a,
            origin_b,
        })
    }

    pub fn probs(&self) -> &ProbMatrix {
        &self.probs
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

    pub fn bin_center_a(&self, m: usize) -> f64 {
        self.origin_a + (m as f64 + 0.5) * self.bin_a
    }

    pub fn bin_center_b(&self, n: usize) -> f64 {
        self.origin_b + (n as f64 + 0.5) * self.bin_b
    }
}

// ---------------------------------------------------------------------------
// Top-hat binning.
// ---------------------------------------------------------------------------

/// Assignment of grid cells to bins along one axis. When the bin width is an
/// integer multiple of the step (within 1e-9 relative) each cell lands in a
/// single bin; otherwise cell mass is split by geometric overlap, which is
/// the exact integral of the piecewise-constant density over each bin.
struct BinPlan {
    bins: usize,
    step: f64,
    width: f64,
    cells_per_bin: Option<usize>,
}

impl BinPlan {
    fn new(len: usize, step: f64, width: f64) -> Result<Self> {
        if !(width > 0.0) || !width.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "bin width must be positive, got {width}"
            )));
        }
        if width < step * (1.0 - 1e-9) {
            return Err(Error::Incommensurate {
                bin: width,
                step,
                detail: "bin narrower than the grid step; binning cannot refine the grid".into(),
            });
        }
        let ratio = width / step;
        let rounded = ratio.round();
        let commensurate = (ratio - rounded).abs() <= 1e-9 * ratio && rounded >= 1.0;
        let (bins, cells_per_bin) = if commensurate {
            let r = rounded as usize;
            (len.div_ceil(r), Some(r))
        } else {
            let bins = (len as f64 * step / width - 1e-9).ceil().max(1.0) as usize;
            (bins, None)
        };
        Ok(Self {
            bins,
            step,
            width,
            cells_per_bin,
        })
    }

    /// Bin receiving the left edge of cell `i` and the fraction of the cell
    /// inside it; the remainder, if any, belongs to the next bin.
    fn split(&self, i: usize) -> (usize, f64) {
        if let Some(r) = self.cells_per_bin {
            return (i / r, 1.0);
        }
        let x0 = i as f64 * self.step;
        let x1 = x0 + self.step;
        let b = ((x0 / self.width).floor() as usize).min(self.bins - 1);
        let boundary = (b as f64 + 1.0) * self.width;
        if x1 <= boundary || b + 1 >= self.bins {
            (b, 1.0)
        } else {
            (b, (boundary - x0) / self.step)
        }
    }
}

/// Integrate a gridded density over aligned uniform bins of the given width.
/// Bins are anchored at the grid start. The result is majorized by the input
/// density, so `H + log2(width)` bounds the continuous entropy from above.
pub fn tophat_bin_1d(g: &Grid1D, width: f64) -> Result<CoarseGrained1D> {
    let plan = BinPlan::new(g.len(), g.step(), width)?;
    let mut mass = vec![0.0; plan.bins];
    for (i, &v) in g.values().iter().enumerate() {
        let cell = v * g.step();
        let (b, frac) = plan.split(i);
        mass[b] += cell * frac;
        if frac < 1.0 {
            mass[b + 1] += cell * (1.0 - frac);
        }
    }
    CoarseGrained1D::new(ProbVector::normalized(mass)?, width, g.start())
}

/// Two-dimensional counterpart of [`tophat_bin_1d`]; widths may differ per
/// axis.
pub fn tophat_bin_2d(g: &Grid2D, width_a: f64, width_b: f64) -> Result<CoarseGrained2D> {
    let plan_a = BinPlan::new(g.rows(), g.step_a(), width_a)?;
    let plan_b = BinPlan::new(g.cols(), g.step_b(), width_b)?;
    let cell_area = g.step_a() * g.step_b();
    let cols = g.cols();
    let out_cols = plan_b.bins;
    let mut mass = vec![0.0; plan_a.bins * out_cols];
    let splits_b: Vec<(usize, f64)> = (0..cols).map(|j| plan_b.split(j)).collect();
    for i in 0..g.rows() {
        let (ba, fa) = plan_a.split(i);
        let row = &g.values()[i * cols..(i + 1) * cols];
        for (j, &v) in row.iter().enumerate() {
            let cell = v * cell_area;
            let (bb, fb) = splits_b[j];
            for (da, wa) in [(0usize, fa), (1, 1.0 - fa)] {
                if wa == 0.0 {
                    continue;
                }
                let r = (ba + da) * out_cols;
                mass[r + bb] += cell * wa * fb;
                if fb < 1.0 {
                    mass[r + bb + 1] += cell * wa * (1.0 - fb);
                }
            }
        }
    }
    let probs = ProbMatrix::normalized(mass, plan_a.bins, out_cols)?;
    CoarseGrained2D::new(probs, width_a, width_b, g.start_a(), g.start_b())
}

// ---------------------------------------------------------------------------
// Filter-bank sampling.
// ---------------------------------------------------------------------------

/// Filter-sampled joint distribution plus the coverage diagnostics that the
/// sampling produced alongside it.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SampledJoint {
    pub grained: CoarseGrained2D,
    pub coverage: f64,
    pub warnings: Vec<String>,
}

/// One-dimensional counterpart of [`SampledJoint`].
#[derive(Debug, Clone, serde::Serialize)]
pub struct Sampled1D {
    pub grained: CoarseGrained1D,
    pub coverage: f64,
    pub warnings: Vec<String>,
}

/// Filter transmissions at the grid nodes of one axis, plus the indicator of
/// the bank's nominal slot range used for coverage accounting.
struct AxisTables {
    /// `weighted[m][i]` = Simpson weight at node i times filter m there.
    weighted: Vec<Vec<f64>>,
    /// 1 where the node falls inside the bank's nominal slots, else 0.
    /// Inter-peak transmission ripple is absorbed by normalization and is
    /// irrelevant here; coverage only tracks mass the bank never samples.
    capture: Vec<f64>,
}

fn axis_tables(bank: &FilterBank, start: f64, step: f64, len: usize) -> Result<AxisTables> {
    let narrowest = bank.min_fwhm();
    let points = narrowest / step;
    if points < MIN_POINTS_PER_FWHM {
        return Err(Error::UnderResolved {
            points,
            required: MIN_POINTS_PER_FWHM,
        });
    }
    let nodes: Vec<f64> = (0..len).map(|i| start + (i as f64 + 0.5) * step).collect();
    let spacing = bank.nominal_spacing();
    let centers = bank.nominal_centers();
    let lo = centers[0] - spacing / 2.0;
    let hi = centers[centers.len() - 1] + spacing / 2.0;
    let capture = nodes
        .iter()
        .map(|&x| if x >= lo && x <= hi { 1.0 } else { 0.0 })
        .collect();
    let weights = simpson_weights(len, step);
    let weighted = bank
        .profiles()
        .par_iter()
        .map(|p| {
            nodes
                .iter()
                .zip(&weights)
                .map(|(&x, &w)| w * p.evaluate(x))
                .collect()
        })
        .collect();
    Ok(AxisTables { weighted, capture })
}

pub(crate) fn coverage_gate(coverage: f64, warnings: &mut Vec<String>) -> Result<()> {
    if coverage < COVERAGE_FLOOR {
        return Err(Error::Coverage { coverage });
    }
    if coverage < COVERAGE_WARN {
        warnings.push(format!(
            "banks capture only {coverage:.6} of the density mass; bound is degraded but valid"
        ));
    }
    Ok(())
}

/// Push a joint density through two filter banks: `P(m, n)` is proportional
/// to the double integral of `rho * f_m(axis A) * f_n(axis B)`, normalized
/// over all pairs. Composite Simpson on the density grid; the grid must
/// resolve the narrowest filter FWHM with at least [`MIN_POINTS_PER_FWHM`]
/// points. Bin widths are the nominal bank spacings and the origins sit half
/// a spacing below the first nominal center, so bin centers coincide with
/// the nominal filter centers.
pub fn filter_sample_joint(
    rho: &Grid2D,
    bank_a: &FilterBank,
    bank_b: &FilterBank,
) -> Result<SampledJoint> {
    let ta = axis_tables(bank_a, rho.start_a(), rho.step_a(), rho.rows())?;
    let tb = axis_tables(bank_b, rho.start_b(), rho.step_b(), rho.cols())?;
    let rows = rho.rows();
    let cols = rho.cols();
    let values = rho.values();
    let wa = simpson_weights(rows, rho.step_a());
    let wb = simpson_weights(cols, rho.step_b());

    let mut coverage = 0.0;
    for i in 0..rows {
        let row = &values[i * cols..(i + 1) * cols];
        let inner: f64 = row
            .iter()
            .zip(&wb)
            .zip(&tb.capture)
            .map(|((&v, &w), &c)| v * w * c)
            .sum();
        coverage += wa[i] * ta.capture[i] * inner;
    }
    let mut warnings = Vec::new();
    coverage_gate(coverage, &mut warnings)?;

    // Row m of the raw output needs t[j] = sum_i A[m][i] rho[i][j]; rows are
    // independent, so the parallel map is bit-stable for any worker count.
    let n_filters = tb.weighted.len();
    let raw: Vec<Vec<f64>> = ta
        .weighted
        .par_iter()
        .map(|fa| {
            let mut t = vec![0.0; cols];
            for (i, &w) in fa.iter().enumerate() {
                if w != 0.0 {
                    let row = &values[i * cols..(i + 1) * cols];
                    for (acc, &v) in t.iter_mut().zip(row) {
                        *acc += w * v;
                    }
                }
            }
            tb.weighted
                .iter()
                .map(|fb| fb.iter().zip(&t).map(|(&b, &v)| b * v).sum())
                .collect()
        })
        .collect();
    let flat: Vec<f64> = raw.into_iter().flatten().collect();
    let total: f64 = flat.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::QuadratureFailure(format!(
            "filter-sampled mass {total} is not positive and finite"
        )));
    }
    let probs = ProbMatrix::normalized(flat, ta.weighted.len(), n_filters)?;
    let grained = CoarseGrained2D::new(
        probs,
        bank_a.nominal_spacing(),
        bank_b.nominal_spacing(),
        bank_a.nominal_centers()[0] - bank_a.nominal_spacing() / 2.0,
        bank_b.nominal_centers()[0] - bank_b.nominal_spacing() / 2.0,
    )?;
    Ok(SampledJoint {
        grained,
        coverage,
        warnings,
    })
}

/// One-dimensional filter sampling: `P(n)` proportional to the integral of
/// `rho * f_n`. Same preconditions and coverage gates as the joint version.
pub fn filter_sample_1d(rho: &Grid1D, bank: &FilterBank) -> Result<Sampled1D> {
    let t = axis_tables(bank, rho.start(), rho.step(), rho.len())?;
    let weights = simpson_weights(rho.len(), rho.step());
    let coverage: f64 = rho
        .values()
        .iter()
        .zip(&weights)
        .zip(&t.capture)
        .map(|((&v, &w), &c)| v * w * c)
        .sum();
    let mut warnings = Vec::new();
    coverage_gate(coverage, &mut warnings)?;
    let raw: Vec<f64> = t
        .weighted
        .iter()
        .map(|f| f.iter().zip(rho.values()).map(|(&a, &v)| a * v).sum())
        .collect();
    let total: f64 = raw.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::QuadratureFailure(format!(
            "filter-sampled mass {total} is not positive and finite"
        )));
    }
    let grained = CoarseGrained1D::new(
        ProbVector::normalized(raw)?,
        bank.nominal_spacing(),
        bank.nominal_centers()[0] - bank.nominal_spacing() / 2.0,
    )?;
    Ok(Sampled1D {
        grained,
        coverage,
        warnings,
    })
}

// ---------------------------------------------------------------------------
// Entropy bounds.
// ---------------------------------------------------------------------------

/// Conservative bound on the continuous conditional entropy:
/// `H(A|B)/w0 + log2(bin_a)` bits.
///
/// `majorization_attested` must be true only when the caller holds evidence
/// that every filter (or, for a drifting bank, the mean filter) is majorized
/// by the top-hat of the bank spacing; the flag is threaded into `valid`
/// untouched. `w0` is the drifting-bank weight floor, 1 for a fixed bank.
pub fn conditional_entropy_bound(
    cg: &CoarseGrained2D,
    w0: f64,
    majorization_attested: bool,
) -> Result<EntropyBound> {
    if !(w0 > 0.0 && w0 <= 1.0) {
        return Err(Error::W0OutOfRange(w0));
    }
    let h = conditional_entropy(cg.probs(), Subsystem::B);
    Ok(EntropyBound {
        value_bits: h / w0 + cg.bin_a().log2(),
        kind: BoundKind::Conditional,
        correction_w0: w0,
        valid: majorization_attested,
        provenance: format!(
            "H(A|B) = {h:.12} bits / w0 = {w0} + log2(bin {:.6e})",
            cg.bin_a()
        ),
    })
}

/// Conservative bound `H + log2(bin_width)` on the continuous entropy of a
/// one-dimensional variable. `kind` must name a one-dimensional variable:
/// marginal, sum or difference.
pub fn entropy_bound_1d(
    cg: &CoarseGrained1D,
    kind: BoundKind,
    majorization_attested: bool,
) -> Result<EntropyBound> {
    if matches!(kind, BoundKind::Joint | BoundKind::Conditional) {
        return Err(Error::KindMismatch {
            expected: "marginal, sum_variable or diff_variable",
            got: kind.to_string(),
        });
    }
    let h = cg.entropy_bits();
    Ok(EntropyBound {
        value_bits: h + cg.bin_width().log2(),
        kind,
        correction_w0: 1.0,
        valid: majorization_attested,
        provenance: format!(
            "H = {h:.12} bits + log2(bin {:.6e})",
            cg.bin_width()
        ),
    })
}

// ---------------------------------------------------------------------------
// Sum and difference variables.
// ---------------------------------------------------------------------------

fn equal_bins(cg: &CoarseGrained2D) -> Result<f64> {
    let (da, db) = (cg.bin_a(), cg.bin_b());
    if (da - db).abs() > GRID_TOL * da.max(db) {
        return Err(Error::InvalidParameter(format!(
            "sum/diff variables need equal bin widths, got {da} and {db}"
        )));
    }
    Ok(da)
}

/// Distribution of the bin-index sum `k = m + n`. The sum variable keeps the
/// common bin width, and its origin is chosen so that bin `k`'s center is
/// the sum of the contributing bin centers.
pub fn sum_variable_distribution(cg: &CoarseGrained2D) -> Result<CoarseGrained1D> {
    let width = equal_bins(cg)?;
    let (rows, cols) = (cg.probs().rows(), cg.probs().cols());
    let mut out = vec![0.0; rows + cols - 1];
    for m in 0..rows {
        for n in 0..cols {
            out[m + n] += cg.probs().get(m, n);
        }
    }
    CoarseGrained1D::new(
        ProbVector::new(out)?,
        width,
        cg.origin_a() + cg.origin_b() + width / 2.0,
    )
}

/// Distribution of the bin-index difference `k = m - n`, stored at the
/// shifted index `m - n + cols - 1`. Origin is chosen so that bin centers
/// are differences of the contributing bin centers.
pub fn diff_variable_distribution(cg: &CoarseGrained2D) -> Result<CoarseGrained1D> {
    let width = equal_bins(cg)?;
    let (rows, cols) = (cg.probs().rows(), cg.probs().cols());
    let mut out = vec![0.0; rows + cols - 1];
    for m in 0..rows {
        for n in 0..cols {
            out[m + (cols - 1) - n] += cg.probs().get(m, n);
        }
    }
    CoarseGrained1D::new(
        ProbVector::new(out)?,
        width,
        cg.origin_a() - cg.origin_b() - (cols as f64 - 0.5) * width,
    )
}

// ---------------------------------------------------------------------------
// Dominance-curve comparison.
// ---------------------------------------------------------------------------

/// Value of a dominance curve at `x`, by linear interpolation between its
/// vertices; the curve saturates at its final mass beyond the last vertex.
fn curve_at(curve: &[(f64, f64)], x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let last = curve[curve.len() - 1];
    if x >= last.0 {
        return last.1;
    }
    let idx = curve.partition_point(|&(cx, _)| cx <= x);
    let (x0, y0) = curve[idx - 1];
    let (x1, y1) = curve[idx];
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

/// Does the density `p` majorize `q` in the continuous sense? True when
/// q's dominance curve never exceeds p's by more than `tol`. Both curves
/// are piecewise linear, so checking at the union of their vertices is
/// exact.
pub fn density_majorizes(p: &Grid1D, q: &Grid1D, tol: f64) -> bool {
    let cp = p.dominance_curve();
    let cq = q.dominance_curve();
    let xs = cp.iter().chain(cq.iter()).map(|&(x, _)| x);
    for x in xs {
        if curve_at(&cq, x) > curve_at(&cp, x) + tol {
            return false;
        }
    }
    true
}

// ---------------------------------------------------------------------------
// Refinement convergence.
// ---------------------------------------------------------------------------

/// One resolution of a refinement ladder.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RefinementStep {
    /// Nominal spacing of the A-side bank at this step.
    pub spacing: f64,
    /// Conditional entropy bound, w0 = 1, at this spacing.
    pub bound_bits: f64,
    /// Did every filter in both banks pass the top-hat dominance check?
    pub majorization_ok: bool,
    /// Worst dimensionless dominance margin `1 - peak * spacing` over both
    /// banks; negative means some filter fails.
    pub worst_filter_margin: f64,
    /// `bound - analytic` when an analytic entropy was supplied.
    pub margin_to_analytic: Option<f64>,
    /// Density mass captured by the banks at this step.
    pub coverage: f64,
}

/// Refinement ladder of conditional entropy bounds over shrinking spacings.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ConvergenceReport {
    /// Steps sorted by spacing, coarsest first.
    pub steps: Vec<RefinementStep>,
    /// Bounds non-increasing down the ladder (1e-9 slack).
    pub monotone: bool,
}

/// Sample the density through each bank pair and report the conditional
/// entropy bound per spacing, coarsest first. Resolutions whose banks fail
/// the dominance check are flagged, never dropped. At least three
/// resolutions are required for a meaningful convergence statement.
pub fn refine_convergence_report(
    rho: &Grid2D,
    banks: &[(FilterBank, FilterBank)],
    analytic_bits: Option<f64>,
) -> Result<ConvergenceReport> {
    if banks.len() < 3 {
        return Err(Error::InsufficientResolutions { got: banks.len() });
    }
    let mut steps = Vec::with_capacity(banks.len());
    for (bank_a, bank_b) in banks {
        let spacing = bank_a.nominal_spacing();
        let mut ok = true;
        let mut worst = f64::INFINITY;
        for bank in [bank_a, bank_b] {
            for check in bank.majorization_report()? {
                ok &= check.verdict;
                worst = worst.min(check.margin * bank.nominal_spacing());
            }
        }
        let sampled = filter_sample_joint(rho, bank_a, bank_b)?;
        let bound = conditional_entropy_bound(&sampled.grained, 1.0, ok)?;
        steps.push(RefinementStep {
            spacing,
            bound_bits: bound.value_bits,
            majorization_ok: ok,
            worst_filter_margin: worst,
            margin_to_analytic: analytic_bits.map(|h| bound.value_bits - h),
            coverage: sampled.coverage,
        });
    }
    steps.sort_by(|a, b| b.spacing.partial_cmp(&a.spacing).expect("finite spacing"));
    let monotone = steps
        .windows(2)
        .all(|w| w[1].bound_bits <= w[0].bound_bits + 1e-9);
    Ok(ConvergenceReport { steps, monotone })
}
