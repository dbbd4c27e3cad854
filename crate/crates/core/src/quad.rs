//! Composite Simpson quadrature on uniformly spaced samples.
//!
//! All gridded integrals in this crate go through these helpers so that
//! density normalization, filter sampling and coverage estimates share one
//! quadrature rule. For an even sample count the last three intervals are
//! handled with Simpson 3/8, keeping the composite rule fourth order.

/// Per-node quadrature weights for `len` uniformly spaced samples with
/// spacing `step`. `sum(w_i * f_i)` approximates the integral.
pub fn simpson_weights(len: usize, step: f64) -> Vec<f64> {
    match len {
        0 => Vec::new(),
        1 => vec![step],
        2 => vec![0.5 * step, 0.5 * step],
        3 => vec![step / 3.0, 4.0 * step / 3.0, step / 3.0],
        _ => {
            let mut w = vec![0.0; len];
            // Simpson needs an even interval count; split off a 3/8 block
            // at the tail when len is even. len == 4 is a pure 3/8 block.
            let simpson_end = if len % 2 == 1 { len } else { len - 3 };
            if simpson_end >= 3 {
                w[0] += step / 3.0;
                w[simpson_end - 1] += step / 3.0;
                for (i, wi) in w.iter_mut().enumerate().take(simpson_end - 1).skip(1) {
                    *wi += if i % 2 == 1 { 4.0 } else { 2.0 } * step / 3.0;
                }
            }
            if len % 2 == 0 {
                let c = 3.0 * step / 8.0;
                w[len - 4] += c;
                w[len - 3] += 3.0 * c;
                w[len - 2] += 3.0 * c;
                w[len - 1] += c;
            }
            w
        }
    }
}

/// Integrate uniformly spaced samples with composite Simpson.
pub fn simpson_sum(values: &[f64], step: f64) -> f64 {
    simpson_weights(values.len(), step)
        .iter()
        .zip(values)
        .map(|(w, v)| w * v)
        .sum()
}

/// Integrate `f` over `[a, b]` with `n` nodes (forced odd, at least 3).
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = if n < 3 { 3 } else { n | 1 };
    let step = (b - a) / (n - 1) as f64;
    let values: Vec<f64> = (0..n).map(|i| f(a + i as f64 * step)).collect();
    simpson_sum(&values, step)
}
