//! `filters-check`: top-hat majorization verdicts and weights for a bank,
//! with plot-ready profile and dominance-curve exports.

use std::fs;

use entrocert_core::filters::{majorized_by_tophat, FilterBank, FilterProfile};
use serde::Serialize;
use serde_json::json;

use crate::attest::attest_arm;
use crate::config::load_bank_manifest;
use crate::manifest::{digest_file, ManifestBody, OutDir, RunManifest, TOOL_VERSION};
use crate::{CliError, FiltersCheckArgs, EXIT_CERTIFIED, EXIT_NOT_CERTIFIED};

/// At most this many filters get plot series; verdict tables always cover
/// the whole bank.
const MAX_PLOTTED: usize = 32;

#[derive(Serialize)]
struct FilterRow {
    index: usize,
    center_rad_per_s: f64,
    fwhm_rad_per_s: f64,
    peak: f64,
    /// `1/spacing - peak`; non-negative means majorized.
    margin: f64,
    verdict: bool,
    w: f64,
}

fn plotted_indices(n: usize) -> Vec<usize> {
    if n <= MAX_PLOTTED {
        return (0..n).collect();
    }
    let mut idx: Vec<usize> = (0..MAX_PLOTTED)
        .map(|i| i * (n - 1) / (MAX_PLOTTED - 1))
        .collect();
    idx.dedup();
    idx
}

/// Mass of a symmetric profile within a half-width `x` of its center,
/// midpoint-integrated on a fine grid. Plot aid only; verdicts come from
/// the exact peak rule.
fn window_masses(profile: &FilterProfile, xs: &[f64]) -> Vec<f64> {
    let x_max = xs.last().copied().unwrap_or(0.0);
    let cells = 4000usize;
    let h = x_max / cells as f64;
    let center = profile.center();
    let mut cumulative = Vec::with_capacity(cells + 1);
    let mut acc = 0.0;
    cumulative.push(0.0);
    for k in 0..cells {
        let u = (k as f64 + 0.5) * h;
        acc += profile.evaluate(center + u) * h;
        cumulative.push(acc);
    }
    xs.iter()
        .map(|&x| {
            let j = ((x / h).round() as usize).min(cells);
            2.0 * cumulative[j]
        })
        .collect()
}

pub fn run(args: &FiltersCheckArgs) -> Result<i32, CliError> {
    let text = fs::read_to_string(&args.config)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", args.config.display())))?;
    let spec = load_bank_manifest(&text)?;
    let bank: FilterBank = spec.build()?;
    let spacing = args.spacing_rad_per_s.unwrap_or_else(|| bank.nominal_spacing());
    if !(spacing > 0.0) || !spacing.is_finite() {
        return Err(CliError::input(format!(
            "spacing must be positive, got {spacing}"
        )));
    }

    let evidence = attest_arm(&bank, spec.is_uniform())?;
    let mut rows = Vec::with_capacity(bank.len());
    let mut all_pass = true;
    for (i, p) in bank.profiles().iter().enumerate() {
        let check = majorized_by_tophat(p, spacing).map_err(CliError::from)?;
        all_pass &= check.verdict;
        rows.push(FilterRow {
            index: i,
            center_rad_per_s: p.center(),
            fwhm_rad_per_s: p.characteristic_fwhm(),
            peak: p.peak_height(),
            margin: check.margin,
            verdict: check.verdict,
            w: evidence.per_filter_w[i],
        });
    }
    let reference_check =
        majorized_by_tophat(&evidence.reference, spacing).map_err(CliError::from)?;
    let pass = all_pass && reference_check.verdict;
    let exit_code = if pass { EXIT_CERTIFIED } else { EXIT_NOT_CERTIFIED };

    let body = ManifestBody {
        subcommand: "filters-check".into(),
        tool_version: TOOL_VERSION,
        inputs: vec![digest_file(&args.config)?],
        config: serde_json::from_str(&text)
            .map_err(|e| CliError::input(format!("config snapshot: {e}")))?,
        effective: json!({ "spacing_rad_per_s": spacing }),
        rng_algorithm: None,
    };
    let manifest = RunManifest::seal(body)?;
    let dir = OutDir::create(&args.out)?;
    let digest = manifest.digest().to_string();
    dir.write_json("run_manifest.json", &manifest)?;

    let plotted = plotted_indices(bank.len());
    let reference = evidence.reference.recentered(0.0);
    dir.write_csv("profiles.csv", &digest, |w| {
        // filter_index -1 is the weight reference, centered at zero
        // detuning; other rows are realized filters on the lattice.
        writeln!(w, "filter_index,omega_rad_per_s,response")?;
        let points = 201;
        for &i in &plotted {
            let p = &bank.profiles()[i];
            let half = 4.0 * p.characteristic_fwhm().max(spacing);
            for k in 0..points {
                let omega = p.center() - half + 2.0 * half * k as f64 / (points - 1) as f64;
                writeln!(w, "{i},{omega},{}", p.evaluate(omega))?;
            }
        }
        let half = 4.0 * reference.characteristic_fwhm().max(spacing);
        for k in 0..points {
            let omega = -half + 2.0 * half * k as f64 / (points - 1) as f64;
            writeln!(w, "-1,{omega},{}", reference.evaluate(omega))?;
        }
        Ok(())
    })?;

    let xs: Vec<f64> = (0..=160).map(|j| j as f64 * 1.5 * spacing / 160.0).collect();
    dir.write_csv("dominance.csv", &digest, |w| {
        // The top-hat envelope column is min(2x/spacing, 1); a majorized
        // filter's mass curve stays at or below it.
        writeln!(
            w,
            "filter_index,window_halfwidth_rad_per_s,filter_mass,tophat_mass"
        )?;
        for &i in &plotted {
            let masses = window_masses(&bank.profiles()[i], &xs);
            for (x, m) in xs.iter().zip(&masses) {
                let envelope = (2.0 * x / spacing).min(1.0);
                writeln!(w, "{i},{x},{m},{envelope}")?;
            }
        }
        let masses = window_masses(&reference, &xs);
        for (x, m) in xs.iter().zip(&masses) {
            let envelope = (2.0 * x / spacing).min(1.0);
            writeln!(w, "-1,{x},{m},{envelope}")?;
        }
        Ok(())
    })?;

    dir.write_json(
        "filters_report.json",
        &json!({
            "manifest_digest": digest,
            "tool_version": TOOL_VERSION,
            "spacing_rad_per_s": spacing,
            "filters": rows,
            "all_filters_pass": all_pass,
            "reference_passes": reference_check.verdict,
            "reference_margin": reference_check.margin,
            "w0": evidence.w0,
            "min_weight_index": evidence.min_weight_index,
            "plotted_filter_indices": plotted,
            "exit_code": exit_code,
        }),
    )?;

    let mut summary = format!(
        "filters-check: {} filters against a top-hat of width {spacing:.6e} rad/s\n",
        bank.len()
    );
    summary.push_str("  index      center         fwhm        peak      margin  verdict       w\n");
    let shown = rows.len().min(24);
    for r in &rows[..shown] {
        summary.push_str(&format!(
            "  {:>5}  {:>12.5e}  {:>11.5e}  {:>10.4e}  {:>10.3e}  {:>7}  {:>6.4}\n",
            r.index,
            r.center_rad_per_s,
            r.fwhm_rad_per_s,
            r.peak,
            r.margin,
            if r.verdict { "pass" } else { "FAIL" },
            r.w,
        ));
    }
    if rows.len() > shown {
        summary.push_str(&format!(
            "  ... {} more filters in filters_report.json\n",
            rows.len() - shown
        ));
    }
    summary.push_str(&format!(
        "  reference filter: {} (margin {:+.3e})\n",
        if reference_check.verdict { "pass" } else { "FAIL" },
        reference_check.margin,
    ));
    summary.push_str(&format!(
        "  w0 = {:.6} at filter {}\n",
        evidence.w0, evidence.min_weight_index
    ));
    summary.push_str(&format!(
        "  bank verdict: {} (exit {exit_code})\n  manifest sha256 {digest}\n",
        if pass { "PASS" } else { "FAIL" },
    ));
    dir.write_text("summary.txt", &summary)?;
    print!("{summary}");
    Ok(exit_code)
}
