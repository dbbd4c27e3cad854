//! Majorization evidence assembled per bank arm.
//!
//! The frequency-side entropy bounds are only conservative when the
//! filters are majorized by the lattice top-hat. For an exact comb of
//! identical filters every weight is 1 and the per-filter verdicts are
//! the whole story. For a drifting bank the chain changes: the counts are
//! a mixture over realizations, each realized filter splits into
//! `w_n * reference + rest`, and the discrete conditional entropy divided
//! by `w0 = min_n w_n` bounds the reference-bank value, so it is the
//! reference filter that must pass the top-hat check. The sum-variable
//! route never divides by `w0`; it instead needs every realized filter to
//! pass, because a convex mixture of peak-capped densities stays
//! peak-capped.

use entrocert_core::acquisition::BankEvidence;
use entrocert_core::filters::{
    bank_weights, majorized_by_tophat, FilterBank, FilterProfile, WeightOptions,
};
use entrocert_core::witness::Inequality;
use serde::Serialize;

use crate::CliError;

/// Evidence for one arm, in report-ready form.
#[derive(Debug, Serialize)]
pub struct ArmEvidence {
    /// True when the bank is an exact comb of identical filters.
    pub uniform: bool,
    pub filters: usize,
    /// Every realized filter passes the top-hat check at the lattice
    /// spacing.
    pub all_filters_pass: bool,
    /// Worst peak margin `1/spacing - peak` over the bank.
    pub worst_margin: f64,
    pub worst_margin_index: usize,
    /// The reference filter of the weight decomposition passes the
    /// top-hat check.
    pub reference_passes: bool,
    pub w0: f64,
    pub min_weight_index: usize,
    #[serde(skip)]
    pub per_filter_w: Vec<f64>,
    #[serde(skip)]
    pub reference: FilterProfile,
}

pub fn attest_arm(bank: &FilterBank, uniform: bool) -> Result<ArmEvidence, CliError> {
    let checks = bank.majorization_report().map_err(CliError::from)?;
    let all_filters_pass = checks.iter().all(|c| c.verdict);
    let (worst_margin_index, worst) = checks
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.margin.total_cmp(&b.1.margin))
        .expect("bank is never empty");

    let (per_filter_w, w0, min_weight_index, reference) = if uniform {
        let reference = bank.profiles()[0].recentered(0.0);
        (vec![1.0; bank.len()], 1.0, 0, reference)
    } else {
        let report = bank_weights(bank, &WeightOptions::default()).map_err(CliError::from)?;
        let min_weight_index = report
            .per_filter_w
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .expect("bank is never empty");
        (
            report.per_filter_w,
            report.w0,
            min_weight_index,
            report.target,
        )
    };
    let reference_passes =
        majorized_by_tophat(&reference, bank.nominal_spacing()).map_err(CliError::from)?;

    Ok(ArmEvidence {
        uniform,
        filters: bank.len(),
        all_filters_pass,
        worst_margin: worst.margin,
        worst_margin_index,
        reference_passes: reference_passes.verdict,
        w0,
        min_weight_index,
        per_filter_w,
        reference,
    })
}

/// Collapse two arms into the evidence a bound consumes. The conditional
/// route is corrected by the worst weight over filter pairs and rests on
/// the reference filters; the sum route takes no correction and rests on
/// every realized filter.
///
/// The pair weight for filters (m, n) factorizes over arms, so the floor
/// over all pairs is the product of the per-arm floors. Taking the min
/// instead would under-correct whenever both arms drift.
pub fn combined_evidence(
    a: &ArmEvidence,
    b: &ArmEvidence,
    inequality: Inequality,
) -> BankEvidence {
    match inequality {
        Inequality::Conditional => BankEvidence {
            w0: a.w0 * b.w0,
            majorization_attested: a.reference_passes && b.reference_passes,
        },
        Inequality::SumDiff => BankEvidence {
            w0: 1.0,
            majorization_attested: a.all_filters_pass && b.all_filters_pass,
        },
    }
}
