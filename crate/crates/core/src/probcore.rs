//! Validated probability containers and the entropy/majorization toolkit.
//!
//! Discrete distributions must be normalized within `1e-12` and non-negative;
//! gridded densities must satisfy `step * sum(values) = 1` within `1e-9`.
//! Constructors reject out-of-tolerance input instead of repairing it; the
//! `normalized` constructors are the only entry points that rescale.
//!
//! Majorization is the ordering behind every bound in this crate: `p`
//! majorizes `q` when every partial sum of the `k` largest entries of `p`
//! is at least the corresponding sum for `q`. Doubly stochastic maps can only
//! move distributions down this order, which is why they never decrease
//! entropy and never increase relative entropy or mutual information.
//!
//! `0 * log 0` is defined as `0` everywhere, via an explicit branch.

use crate::error::{Error, Result};
use crate::units::{GRID_TOL, MAJORIZATION_SLACK, PROB_TOL};

/// Which marginal of a joint distribution a conditional refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    A,
    B,
}

fn check_nonnegative(values: &[f64], tol: f64) -> Result<()> {
    for (index, &value) in values.iter().enumerate() {
        if !value.is_finite() || value < -tol {
            return Err(Error::NegativeProbability { index, value });
        }
    }
    Ok(())
}

/// Clamp values in `[-tol, 0)` to zero; anything more negative was rejected.
fn clamp_tiny_negatives(values: &mut [f64]) {
    for v in values.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// A discrete probability distribution: non-negative, sums to one within
/// `1e-12`.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ProbVector {
    p: Vec<f64>,
}

impl ProbVector {
    pub fn new(mut p: Vec<f64>) -> Result<Self> {
        check_nonnegative(&p, PROB_TOL)?;
        clamp_tiny_negatives(&mut p);
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > PROB_TOL {
            return Err(Error::NotNormalized { sum, tol: PROB_TOL });
        }
        Ok(Self { p })
    }

    /// Explicit normalization entry point: rescales non-negative weights.
    pub fn normalized(mut p: Vec<f64>) -> Result<Self> {
        check_nonnegative(&p, PROB_TOL)?;
        clamp_tiny_negatives(&mut p);
        let sum: f64 = p.iter().sum();
        if !(sum > 0.0) {
            return Err(Error::NotNormalized { sum, tol: PROB_TOL });
        }
        for v in &mut p {
            *v /= sum;
        }
        Ok(Self { p })
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            p: vec![1.0 / n as f64; n.max(1)],
        }
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.p
    }
}

/// A joint distribution over two finite alphabets; the row index is
/// subsystem A, the column index subsystem B. Total mass is one within
/// `1e-12`.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ProbMatrix {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl ProbMatrix {
    pub fn new(mut data: Vec<f64>, rows: usize, cols: usize) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch {
                left: data.len(),
                right: rows * cols,
            });
        }
        check_nonnegative(&data, PROB_TOL)?;
        clamp_tiny_negatives(&mut data);
        let sum: f64 = data.iter().sum();
        if (sum - 1.0).abs() > PROB_TOL {
            return Err(Error::NotNormalized { sum, tol: PROB_TOL });
        }
        Ok(Self { data, rows, cols })
    }

    /// Explicit normalization entry point for non-negative weights.
    pub fn normalized(mut data: Vec<f64>, rows: usize, cols: usize) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch {
                left: data.len(),
                right: rows * cols,
            });
        }
        check_nonnegative(&data, PROB_TOL)?;
        clamp_tiny_negatives(&mut data);
        let sum: f64 = data.iter().sum();
        if !(sum > 0.0) {
            return Err(Error::NotNormalized { sum, tol: PROB_TOL });
        }
        for v in &mut data {
            *v /= sum;
        }
        Ok(Self { data, rows, cols })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        for row in &rows {
            if row.len() != c {
                return Err(Error::LengthMismatch {
                    left: row.len(),
                    right: c,
                });
            }
        }
        Self::new(rows.into_iter().flatten().collect(), r, c)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Marginal over B: distribution of the row index A.
    pub fn marginal_a(&self) -> ProbVector {
        let mut m = vec![0.0; self.rows];
        for i in 0..self.rows {
            m[i] = self.data[i * self.cols..(i + 1) * self.cols].iter().sum();
        }
        ProbVector { p: m }
    }

    /// Marginal over A: distribution of the column index B.
    pub fn marginal_b(&self) -> ProbVector {
        let mut m = vec![0.0; self.cols];
        for i in 0..self.rows {
            for j in 0..self.cols {
                m[j] += self.data[i * self.cols + j];
            }
        }
        ProbVector { p: m }
    }

    /// View the joint distribution as a flat vector over (A, B) pairs.
    pub fn flatten(&self) -> ProbVector {
        ProbVector {
            p: self.data.clone(),
        }
    }
}

/// A square doubly stochastic operator: non-negative entries, every row and
/// every column sums to one within `1e-12`. Acting on a distribution it can
/// only mix, never sharpen.
#[derive(Debug, Clone)]
pub struct DoublyStochasticOp {
    t: Vec<f64>,
    n: usize,
}

impl DoublyStochasticOp {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        for (index, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::LengthMismatch {
                    left: row.len(),
                    right: n,
                });
            }
            check_nonnegative(row, PROB_TOL)?;
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > PROB_TOL {
                return Err(Error::NotDoublyStochastic {
                    axis: "row",
                    index,
                    sum,
                });
            }
        }
        for j in 0..n {
            let sum: f64 = rows.iter().map(|row| row[j]).sum();
            if (sum - 1.0).abs() > PROB_TOL {
                return Err(Error::NotDoublyStochastic {
                    axis: "column",
                    index: j,
                    sum,
                });
            }
        }
        Ok(Self {
            t: rows.into_iter().flatten().collect(),
            n,
        })
    }

    /// Birkhoff construction: a convex mixture of permutation matrices is
    /// doubly stochastic. `perms[k][i]` is the target index of source `i`
    /// under the k-th permutation.
    pub fn mix_of_permutations(n: usize, perms: &[Vec<usize>], weights: &ProbVector) -> Result<Self> {
        if perms.len() != weights.len() {
            return Err(Error::LengthMismatch {
                left: perms.len(),
                right: weights.len(),
            });
        }
        let mut t = vec![0.0; n * n];
        for (perm, &w) in perms.iter().zip(weights.as_slice()) {
            if perm.len() != n {
                return Err(Error::LengthMismatch {
                    left: perm.len(),
                    right: n,
                });
            }
            let mut seen = vec![false; n];
            for (src, &dst) in perm.iter().enumerate() {
                if dst >= n || seen[dst] {
                    return Err(Error::InvalidParameter(format!(
                        "not a permutation: duplicate or out-of-range target {dst} from source {src}"
                    )));
                }
                seen[dst] = true;
                t[dst * n + src] += w;
            }
        }
        Ok(Self { t, n })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.n + j]
    }
}

/// Shannon entropy in bits.
pub fn shannon_entropy(p: &ProbVector) -> f64 {
    entropy_of(p.as_slice())
}

/// Joint Shannon entropy of a two-party distribution, in bits.
pub fn joint_entropy(p: &ProbMatrix) -> f64 {
    entropy_of(p.as_slice())
}

fn entropy_of(values: &[f64]) -> f64 {
    let mut h = 0.0;
    for &v in values {
        if v > 0.0 {
            h -= v * v.log2();
        }
    }
    h
}

/// Relative entropy `D(p || q)` in bits. When `p` has mass where `q` has
/// none the divergence is infinite; that case returns `f64::INFINITY`
/// rather than an error.
pub fn relative_entropy(p: &ProbVector, q: &ProbVector) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    let mut d = 0.0;
    for (&pi, &qi) in p.as_slice().iter().zip(q.as_slice()) {
        if pi > 0.0 {
            if qi <= 0.0 {
                return Ok(f64::INFINITY);
            }
            d += pi * (pi / qi).log2();
        }
    }
    Ok(d)
}

/// Conditional entropy in bits: `H(A|B)` when `given` is `Subsystem::B`,
/// `H(B|A)` when `given` is `Subsystem::A`.
pub fn conditional_entropy(joint: &ProbMatrix, given: Subsystem) -> f64 {
    let marginal = match given {
        Subsystem::A => joint.marginal_a(),
        Subsystem::B => joint.marginal_b(),
    };
    joint_entropy(joint) - shannon_entropy(&marginal)
}

/// Mutual information `I(A:B)` in bits.
pub fn mutual_information(joint: &ProbMatrix) -> f64 {
    shannon_entropy(&joint.marginal_a()) + shannon_entropy(&joint.marginal_b())
        - joint_entropy(joint)
}

/// Smallest slack over all partial sums of sorted entries: positive when `p`
/// majorizes `q` with room to spare, negative when some partial sum fails.
/// Vectors of different length are compared after zero-padding the shorter.
pub fn majorization_margin(p: &ProbVector, q: &ProbVector) -> f64 {
    let n = p.len().max(q.len());
    let sorted_desc = |v: &ProbVector| {
        let mut s = v.as_slice().to_vec();
        s.resize(n, 0.0);
        s.sort_by(|a, b| b.partial_cmp(a).expect("finite probabilities"));
        s
    };
    let ps = sorted_desc(p);
    let qs = sorted_desc(q);
    let mut margin = f64::INFINITY;
    let (mut cp, mut cq) = (0.0, 0.0);
    for k in 0..n {
        cp += ps[k];
        cq += qs[k];
        margin = margin.min(cp - cq);
    }
    margin
}

/// Does `p` majorize `q`? Partial sums may fall short by at most `1e-12`.
pub fn majorizes(p: &ProbVector, q: &ProbVector) -> bool {
    majorization_margin(p, q) >= -MAJORIZATION_SLACK
}

/// Apply a doubly stochastic operator: `out_i = sum_j T[i][j] p_j`. The
/// output is majorized by the input.
pub fn apply_doubly_stochastic(op: &DoublyStochasticOp, p: &ProbVector) -> Result<ProbVector> {
    if op.dim() != p.len() {
        return Err(Error::LengthMismatch {
            left: op.dim(),
            right: p.len(),
        });
    }
    let n = op.dim();
    let mut out = vec![0.0; n];
    for i in 0..n {
        let mut acc = 0.0;
        for (j, &pj) in p.as_slice().iter().enumerate() {
            acc += op.t[i * n + j] * pj;
        }
        out[i] = acc.max(0.0);
    }
    // Mixing preserves total mass up to rounding; snap within tolerance.
    ProbVector::normalized(out)
}

/// A one-dimensional density sampled on a uniform grid of cells. `values[i]`
/// is the density on the cell `[start + i*step, start + (i+1)*step)`;
/// `step * sum(values) = 1` within `1e-9`.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Grid1D {
    start: f64,
    step: f64,
    values: Vec<f64>,
}

impl Grid1D {
    pub fn new(start: f64, step: f64, values: Vec<f64>) -> Result<Self> {
        validate_grid_geometry(start, step, values.len())?;
        check_nonnegative(&values, GRID_TOL)?;
        let mut values = values;
        clamp_tiny_negatives(&mut values);
        let mass = step * values.iter().sum::<f64>();
        if (mass - 1.0).abs() > GRID_TOL {
            return Err(Error::NotNormalized {
                sum: mass,
                tol: GRID_TOL,
            });
        }
        Ok(Self { start, step, values })
    }

    /// Rescale non-negative samples so the Riemann sum is exactly one.
    pub fn from_unnormalized(start: f64, step: f64, values: Vec<f64>) -> Result<Self> {
        validate_grid_geometry(start, step, values.len())?;
        check_nonnegative(&values, GRID_TOL)?;
        let mut values = values;
        clamp_tiny_negatives(&mut values);
        let mass = step * values.iter().sum::<f64>();
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::NotNormalized {
                sum: mass,
                tol: GRID_TOL,
            });
        }
        for v in &mut values {
            *v /= mass;
        }
        Ok(Self { start, step, values })
    }

    /// Sample a density function at cell midpoints and normalize.
    pub fn from_fn<F: Fn(f64) -> f64>(start: f64, step: f64, n: usize, f: F) -> Result<Self> {
        let values = (0..n)
            .map(|i| f(start + (i as f64 + 0.5) * step))
            .collect();
        Self::from_unnormalized(start, step, values)
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn center(&self, i: usize) -> f64 {
        self.start + (i as f64 + 0.5) * self.step
    }

    pub fn span(&self) -> f64 {
        self.step * self.values.len() as f64
    }

    /// Differential entropy of the piecewise-constant density, in bits:
    /// `-sum rho_i log2(rho_i) * step`.
    pub fn continuous_entropy(&self) -> f64 {
        let mut h = 0.0;
        for &v in &self.values {
            if v > 0.0 {
                h -= v * v.log2() * self.step;
            }
        }
        h
    }

    /// Decreasing rearrangement integrals: point `k` is
    /// `(k * step, integral of the k largest cells)`, starting at `(0, 0)`.
    /// The curve is non-decreasing, concave, and ends at the total mass.
    pub fn dominance_curve(&self) -> Vec<(f64, f64)> {
        let mut sorted = self.values.clone();
        sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite density"));
        let mut curve = Vec::with_capacity(sorted.len() + 1);
        curve.push((0.0, 0.0));
        let mut acc = 0.0;
        for (k, v) in sorted.iter().enumerate() {
            acc += v * self.step;
            curve.push(((k + 1) as f64 * self.step, acc));
        }
        curve
    }
}

fn validate_grid_geometry(start: f64, step: f64, len: usize) -> Result<()> {
    if !start.is_finite() || !step.is_finite() || step <= 0.0 {
        return Err(Error::InvalidGrid(format!(
            "start {start}, step {step} must be finite with step > 0"
        )));
    }
    if len == 0 {
        return Err(Error::InvalidGrid("empty grid".into()));
    }
    Ok(())
}

/// A two-dimensional density on a uniform cell grid; the row index is axis A
/// and the column index axis B. `step_a * step_b * sum(values) = 1` within
/// `1e-9`.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Grid2D {
    start_a: f64,
    step_a: f64,
    start_b: f64,
    step_b: f64,
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl Grid2D {
    pub fn from_unnormalized(
        start_a: f64,
        step_a: f64,
        start_b: f64,
        step_b: f64,
        rows: usize,
        cols: usize,
        values: Vec<f64>,
    ) -> Result<Self> {
        validate_grid_geometry(start_a, step_a, rows)?;
        validate_grid_geometry(start_b, step_b, cols)?;
        if values.len() != rows * cols {
            return Err(Error::LengthMismatch {
                left: values.len(),
                right: rows * cols,
            });
        }
        check_nonnegative(&values, GRID_TOL)?;
        let mut values = values;
        clamp_tiny_negatives(&mut values);
        let mass = step_a * step_b * values.iter().sum::<f64>();
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::NotNormalized {
                sum: mass,
                tol: GRID_TOL,
            });
        }
        for v in &mut values {
            *v /= mass;
        }
        Ok(Self {
            start_a,
            step_a,
            start_b,
            step_b,
            rows,
            cols,
            values,
        })
    }

    /// Sample a joint density at cell midpoints and normalize.
    pub fn from_fn<F: Fn(f64, f64) -> f64 + Sync>(
        start_a: f64,
        step_a: f64,
        rows: usize,
        start_b: f64,
        step_b: f64,
        cols: usize,
        f: F,
    ) -> Result<Self> {
        use rayon::prelude::*;
        let values: Vec<f64> = (0..rows)
            .into_par_iter()
            .flat_map_iter(|i| {
                let wa = start_a + (i as f64 + 0.5) * step_a;
                (0..cols)
                    .map(move |j| (wa, start_b + (j as f64 + 0.5) * step_b))
                    .collect::<Vec<_>>()
            })
            .map(|(wa, wb)| f(wa, wb))
            .collect();
        Self::from_unnormalized(start_a, step_a, start_b, step_b, rows, cols, values)
    }

    pub fn start_a(&self) -> f64 {
        self.start_a
    }

    pub fn step_a(&self) -> f64 {
        self.step_a
    }

    pub fn start_b(&self) -> f64 {
        self.start_b
    }

    pub fn step_b(&self) -> f64 {
        self.step_b
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn center_a(&self, i: usize) -> f64 {
        self.start_a + (i as f64 + 0.5) * self.step_a
    }

    pub fn center_b(&self, j: usize) -> f64 {
        self.start_b + (j as f64 + 0.5) * self.step_b
    }

    pub fn continuous_entropy(&self) -> f64 {
        let cell = self.step_a * self.step_b;
        let mut h = 0.0;
        for &v in &self.values {
            if v > 0.0 {
                h -= v * v.log2() * cell;
            }
        }
        h
    }

    /// Integrate over axis B, leaving the density of A.
    pub fn marginal_a(&self) -> Result<Grid1D> {
        let values: Vec<f64> = (0..self.rows)
            .map(|i| {
                self.values[i * self.cols..(i + 1) * self.cols]
                    .iter()
                    .sum::<f64>()
                    * self.step_b
            })
            .collect();
        Grid1D::from_unnormalized(self.start_a, self.step_a, values)
    }

    /// Integrate over axis A, leaving the density of B.
    pub fn marginal_b(&self) -> Result<Grid1D> {
        let mut values = vec![0.0; self.cols];
        for i in 0..self.rows {
            for j in 0..self.cols {
                values[j] += self.values[i * self.cols + j];
            }
        }
        for v in &mut values {
            *v *= self.step_a;
        }
        Grid1D::from_unnormalized(self.start_b, self.step_b, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn uniform_entropy_is_log_n() {
        for n in [2usize, 3, 8, 1000] {
            let h = shannon_entropy(&ProbVector::uniform(n));
            assert!(close(h, (n as f64).log2(), 1e-12), "n={n}: {h}");
        }
    }

    #[test]
    fn zero_entries_contribute_nothing() {
        let p = ProbVector::new(vec![0.5, 0.0, 0.5, 0.0]).unwrap();
        assert!(close(shannon_entropy(&p), 1.0, 1e-15));
    }

    #[test]
    fn point_mass_has_zero_entropy() {
        let p = ProbVector::new(vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(shannon_entropy(&p), 0.0);
    }

    #[test]
    fn rejects_unnormalized_and_negative() {
        assert!(matches!(
            ProbVector::new(vec![0.5, 0.4]),
            Err(Error::NotNormalized { .. })
        ));
        assert!(matches!(
            ProbVector::new(vec![1.1, -0.1]),
            Err(Error::NegativeProbability { .. })
        ));
    }

    #[test]
    fn support_mismatch_gives_infinity() {
        let p = ProbVector::new(vec![0.5, 0.5, 0.0]).unwrap();
        let q = ProbVector::new(vec![1.0, 0.0, 0.0]).unwrap();
        assert_eq!(relative_entropy(&p, &q).unwrap(), f64::INFINITY);
        // Zero mass in p where q has support is fine.
        assert!(relative_entropy(&q, &p).unwrap().is_finite());
    }

    #[test]
    fn conditional_entropy_of_product_is_marginal_entropy() {
        let pa = [0.25, 0.75];
        let pb = [0.1, 0.2, 0.7];
        let joint = ProbMatrix::from_rows(
            pa.iter()
                .map(|&a| pb.iter().map(|&b| a * b).collect())
                .collect(),
        )
        .unwrap();
        let ha = shannon_entropy(&joint.marginal_a());
        assert!(close(conditional_entropy(&joint, Subsystem::B), ha, 1e-12));
        assert!(close(mutual_information(&joint), 0.0, 1e-12));
    }

    #[test]
    fn perfect_correlation_has_zero_conditional_entropy() {
        let joint = ProbMatrix::from_rows(vec![
            vec![0.5, 0.0],
            vec![0.0, 0.5],
        ])
        .unwrap();
        assert!(close(conditional_entropy(&joint, Subsystem::B), 0.0, 1e-12));
        assert!(close(mutual_information(&joint), 1.0, 1e-12));
    }

    #[test]
    fn appendix_identities_hold_for_a_fixed_joint() {
        // Uniform-reference identities relating divergences to entropies.
        let joint = ProbMatrix::from_rows(vec![
            vec![0.20, 0.05, 0.05],
            vec![0.10, 0.25, 0.35],
        ])
        .unwrap();
        let (na, nb) = (joint.rows() as f64, joint.cols() as f64);
        let pa = joint.marginal_a();
        let pb = joint.marginal_b();
        let ua = ProbVector::uniform(joint.rows());

        let d = relative_entropy(&pa, &ua).unwrap();
        assert!(close(d, na.log2() - shannon_entropy(&pa), 1e-12));

        let uniform_joint = ProbVector::uniform(joint.rows() * joint.cols());
        let d = relative_entropy(&joint.flatten(), &uniform_joint).unwrap();
        assert!(close(d, (na * nb).log2() - joint_entropy(&joint), 1e-12));

        // Reference: uniform on A times the true marginal of B.
        let mut ref_ab = Vec::new();
        for _ in 0..joint.rows() {
            for &b in pb.as_slice() {
                ref_ab.push(b / na);
            }
        }
        let d = relative_entropy(&joint.flatten(), &ProbVector::new(ref_ab).unwrap()).unwrap();
        assert!(close(
            d,
            na.log2() - conditional_entropy(&joint, Subsystem::B),
            1e-12
        ));

        // Product of both marginals gives the mutual information.
        let mut prod = Vec::new();
        for &a in pa.as_slice() {
            for &b in pb.as_slice() {
                prod.push(a * b);
            }
        }
        let d = relative_entropy(&joint.flatten(), &ProbVector::new(prod).unwrap()).unwrap();
        assert!(close(d, mutual_information(&joint), 1e-12));
    }

    #[test]
    fn uniform_is_bottom_of_majorization_order() {
        let p = ProbVector::new(vec![0.7, 0.2, 0.1]).unwrap();
        let u = ProbVector::uniform(3);
        assert!(majorizes(&p, &u));
        assert!(!majorizes(&u, &p));
        assert!(majorizes(&u, &u));
    }

    #[test]
    fn padding_compares_different_lengths() {
        let p = ProbVector::new(vec![1.0]).unwrap();
        let q = ProbVector::uniform(4);
        assert!(majorizes(&p, &q));
        assert!(!majorizes(&q, &p));
    }

    fn permutation_mix(n: usize, seeds: &[u64]) -> DoublyStochasticOp {
        // Deterministic little Fisher-Yates driven by a splitmix-style hash.
        let mut perms = Vec::new();
        for &s in seeds {
            let mut perm: Vec<usize> = (0..n).collect();
            let mut state = s;
            for i in (1..n).rev() {
                state = state
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                let j = (state >> 33) as usize % (i + 1);
                perm.swap(i, j);
            }
            perms.push(perm);
        }
        let w = ProbVector::uniform(seeds.len());
        DoublyStochasticOp::mix_of_permutations(n, &perms, &w).unwrap()
    }

    proptest! {
        #[test]
        fn relative_entropy_nonnegative(raw in proptest::collection::vec(1e-6..1.0f64, 2..12)) {
            let n = raw.len();
            let p = ProbVector::normalized(raw).unwrap();
            let q = ProbVector::uniform(n);
            let d = relative_entropy(&p, &q).unwrap();
            prop_assert!(d >= -1e-12);
        }

        #[test]
        fn mixing_raises_entropy_and_is_majorized(
            raw in proptest::collection::vec(1e-9..1.0f64, 2..10),
            seeds in proptest::collection::vec(any::<u64>(), 2..5),
        ) {
            let n = raw.len();
            let p = ProbVector::normalized(raw).unwrap();
            let t = permutation_mix(n, &seeds);
            let tp = apply_doubly_stochastic(&t, &p).unwrap();
            prop_assert!(shannon_entropy(&tp) + 1e-9 >= shannon_entropy(&p));
            prop_assert!(majorizes(&p, &tp));
        }

        #[test]
        fn mixing_contracts_relative_entropy(
            raw_p in proptest::collection::vec(1e-6..1.0f64, 4..10),
            raw_q in proptest::collection::vec(1e-6..1.0f64, 4..10),
            seeds in proptest::collection::vec(any::<u64>(), 2..5),
        ) {
            let n = raw_p.len().min(raw_q.len());
            let p = ProbVector::normalized(raw_p[..n].to_vec()).unwrap();
            let q = ProbVector::normalized(raw_q[..n].to_vec()).unwrap();
            let t = permutation_mix(n, &seeds);
            let tp = apply_doubly_stochastic(&t, &p).unwrap();
            let tq = apply_doubly_stochastic(&t, &q).unwrap();
            let before = relative_entropy(&p, &q).unwrap();
            let after = relative_entropy(&tp, &tq).unwrap();
            prop_assert!(after <= before + 1e-9, "after {after} > before {before}");
        }

        #[test]
        fn dominance_curve_is_concave_and_ends_at_one(
            raw in proptest::collection::vec(0.0..1.0f64, 3..40),
        ) {
            prop_assume!(raw.iter().sum::<f64>() > 1e-6);
            let step = 0.37;
            let g = Grid1D::from_unnormalized(-1.0, step, raw).unwrap();
            let curve = g.dominance_curve();
            let last = curve.last().unwrap();
            prop_assert!((last.1 - 1.0).abs() < 1e-9);
            for w in curve.windows(2) {
                prop_assert!(w[1].1 + 1e-12 >= w[0].1);
            }
            for w in curve.windows(3) {
                let s1 = w[1].1 - w[0].1;
                let s2 = w[2].1 - w[1].1;
                prop_assert!(s2 <= s1 + 1e-12);
            }
        }
    }

    #[test]
    fn gaussian_grid_entropy_matches_closed_form() {
        // Unit-variance Gaussian: h = 0.5 log2(2 pi e) = 2.047095585 bits.
        let step = 1e-3;
        let n = (16.0 / step) as usize;
        let g = Grid1D::from_fn(-8.0, step, n, |x| {
            (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
        })
        .unwrap();
        let expect = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).log2();
        assert!(close(g.continuous_entropy(), expect, 1e-4));
    }

    #[test]
    fn unit_rescaling_shifts_entropy_by_log_scale() {
        let step = 1e-3;
        let n = (16.0 / step) as usize;
        let g = Grid1D::from_fn(-8.0, step, n, |x| {
            (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
        })
        .unwrap();
        // Express the same density in units c times smaller.
        let c = 250.0;
        let scaled = Grid1D::from_unnormalized(
            -8.0 * c,
            step * c,
            g.values().iter().map(|v| v / c).collect(),
        )
        .unwrap();
        let shift = scaled.continuous_entropy() - g.continuous_entropy();
        assert!(close(shift, c.log2(), 1e-9), "shift {shift}");
    }

    #[test]
    fn dominance_curve_initial_slope_is_peak_density() {
        let step = 1e-3;
        let n = 16000;
        let g = Grid1D::from_fn(-8.0, step, n, |x| {
            (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
        })
        .unwrap();
        let curve = g.dominance_curve();
        let slope = curve[1].1 / curve[1].0;
        let peak = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        assert!(close(slope, peak, 1e-4));
    }

    #[test]
    fn grid2d_product_entropy_is_sum_of_marginals() {
        let n = 400;
        let step = 0.04;
        let g = Grid2D::from_fn(-8.0, step, n, -8.0, step, n, |x, y| {
            (-0.5 * (x * x + y * y / 2.25)).exp()
        })
        .unwrap();
        let ha = g.marginal_a().unwrap().continuous_entropy();
        let hb = g.marginal_b().unwrap().continuous_entropy();
        assert!(close(g.continuous_entropy(), ha + hb, 1e-6));
    }

    #[test]
    fn doubly_stochastic_rejects_bad_columns() {
        let rows = vec![vec![1.0, 0.0], vec![1.0, 0.0]];
        assert!(matches!(
            DoublyStochasticOp::new(rows),
            Err(Error::NotDoublyStochastic { axis: "column", .. })
        ));
    }
}
