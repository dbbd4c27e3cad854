//! `certify`: evaluate one entropic witness end to end and report a
//! verdict whose exit code matches the JSON.

use std::fs;
use std::path::Path;

use entrocert_core::acquisition::{
    bootstrap_margin, load_histogram, load_joint_counts, subtract_background,
    timing_entropy_bound, CoincidenceHistogram, JointCountTable, BootstrapReport, RNG_ALGORITHM,
};
use entrocert_core::filters::FilterBank;
use entrocert_core::witness::{evaluate_witness, Inequality, WitnessReport};
use serde::Serialize;
use serde_json::json;

use crate::attest::{attest_arm, combined_evidence, ArmEvidence};
use crate::config::load_run_config;
use crate::manifest::{digest_file, ManifestBody, OutDir, RunManifest, TOOL_VERSION};
use crate::simulate::run_campaign;
use crate::{
    CertifyArgs, CliError, EXIT_CERTIFIED, EXIT_NOT_CERTIFIED, EXIT_PRECONDITION,
};

fn inequality_name(v: Inequality) -> &'static str {
    match v {
        Inequality::SumDiff => "sum-difference",
        Inequality::Conditional => "conditional",
    }
}

#[derive(Serialize)]
struct EvidenceSummary<'a> {
    w0: f64,
    majorization_attested: bool,
    bank_a: &'a ArmEvidence,
    bank_b: &'a ArmEvidence,
}

#[derive(Serialize)]
struct WitnessReportFile<'a> {
    manifest_digest: &'a str,
    tool_version: &'static str,
    route: &'a str,
    witness: &'a WitnessReport,
    bootstrap: &'a BootstrapReport,
    coverage: Option<f64>,
    evidence: EvidenceSummary<'a>,
    warnings: &'a [String],
    exit_code: i32,
}

struct ResolvedInputs {
    table: JointCountTable,
    histogram: CoincidenceHistogram,
    bank_a: FilterBank,
    bank_b: FilterBank,
    uniform_a: bool,
    uniform_b: bool,
    coverage: Option<f64>,
    route: &'static str,
    warnings: Vec<String>,
}

pub fn run(args: &CertifyArgs) -> Result<i32, CliError> {
    let text = fs::read_to_string(&args.config)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", args.config.display())))?;
    let cfg = load_run_config(&text)?;
    let inequality = args
        .inequality
        .map(Inequality::from)
        .or(cfg.inequality)
        .unwrap_or(Inequality::Conditional);
    let seed = args.seed.unwrap_or(cfg.seed);
    let resamples = args.resamples.unwrap_or(cfg.resamples);

    let mut inputs = vec![digest_file(&args.config)?];
    let resolved = if let Some(m) = &cfg.measured {
        let hist_path = Path::new(&m.timing_histogram_csv);
        let joint_path = Path::new(&m.joint_counts_csv);
        inputs.push(digest_file(hist_path)?);
        inputs.push(digest_file(joint_path)?);
        let histogram = load_histogram(hist_path).map_err(CliError::from)?;
        let bank_a = cfg.bank_a.build()?;
        let bank_b = cfg.bank_b.build()?;
        let table = load_joint_counts(joint_path).map_err(CliError::from)?;
        if table.rows() > bank_a.len() || table.cols() > bank_b.len() {
            return Err(CliError::input(format!(
                "count table spans {} x {} filter indices but the banks hold {} x {} filters",
                table.rows(),
                table.cols(),
                bank_a.len(),
                bank_b.len(),
            )));
        }
        let (sp_a, sp_b) = (bank_a.nominal_spacing(), bank_b.nominal_spacing());
        let table = table
            .with_lattice(
                sp_a,
                sp_b,
                bank_a.nominal_centers()[0] - 0.5 * sp_a,
                bank_b.nominal_centers()[0] - 0.5 * sp_b,
            )
            .map_err(CliError::from)?;
        ResolvedInputs {
            table,
            histogram,
            uniform_a: cfg.bank_a.is_uniform(),
            uniform_b: cfg.bank_b.is_uniform(),
            bank_a,
            bank_b,
            coverage: None,
            route: "measured",
            warnings: Vec::new(),
        }
    } else {
        let run = run_campaign(&cfg, seed)?;
        let output = run.output;
        let histogram = output.histogram.ok_or_else(|| {
            CliError::input("certify on a campaign needs a `campaign.timing` section")
        })?;
        ResolvedInputs {
            table: output.table,
            histogram,
            bank_a: output.realized_bank_a,
            bank_b: output.realized_bank_b,
            uniform_a: run.uniform,
            uniform_b: run.uniform,
            coverage: Some(output.coverage),
            route: run.route,
            warnings: output.warnings,
        }
    };

    let mut warnings = resolved.warnings;
    let subtracted =
        subtract_background(&resolved.histogram, cfg.wing_fraction).map_err(CliError::from)?;
    let time_bound = timing_entropy_bound(&subtracted).map_err(CliError::from)?;
    let ev_a = attest_arm(&resolved.bank_a, resolved.uniform_a)?;
    let ev_b = attest_arm(&resolved.bank_b, resolved.uniform_b)?;
    let evidence = combined_evidence(&ev_a, &ev_b, inequality);
    let freq_bound = match inequality {
        Inequality::Conditional => resolved
            .table
            .conditional_bound(evidence.w0, evidence.majorization_attested)
            .map_err(CliError::from)?,
        Inequality::SumDiff => resolved
            .table
            .sum_bound(evidence.majorization_attested)
            .map_err(CliError::from)?,
    };
    let witness = evaluate_witness(&time_bound, &freq_bound, inequality).map_err(CliError::from)?;
    let bootstrap = bootstrap_margin(
        &resolved.table,
        &subtracted,
        &evidence,
        inequality,
        resamples,
        seed,
    )
    .map_err(CliError::from)?;
    let ci_width = bootstrap.ci_high - bootstrap.ci_low;
    if ci_width > 0.1 * bootstrap.margin_plugin.abs() {
        warnings.push(format!(
            "bootstrap CI width {ci_width:.4} bits exceeds 10% of the margin \
             {:.4}; the verdict is statistics-limited",
            bootstrap.margin_plugin
        ));
    }

    let exit_code = if !witness.preconditions_met {
        EXIT_PRECONDITION
    } else if witness.certified {
        EXIT_CERTIFIED
    } else {
        EXIT_NOT_CERTIFIED
    };

    let body = ManifestBody {
        subcommand: "certify".into(),
        tool_version: TOOL_VERSION,
        inputs,
        config: serde_json::from_str(&text)
            .map_err(|e| CliError::input(format!("config snapshot: {e}")))?,
        effective: json!({
            "inequality": inequality,
            "seed": seed,
            "resamples": resamples,
            "wing_fraction": cfg.wing_fraction,
            "route": resolved.route,
        }),
        rng_algorithm: Some(RNG_ALGORITHM),
    };
    let manifest = RunManifest::seal(body)?;
    let dir = OutDir::create(&args.out)?;
    dir.write_json("run_manifest.json", &manifest)?;
    let report = WitnessReportFile {
        manifest_digest: manifest.digest(),
        tool_version: TOOL_VERSION,
        route: resolved.route,
        witness: &witness,
        bootstrap: &bootstrap,
        coverage: resolved.coverage,
        evidence: EvidenceSummary {
            w0: evidence.w0,
            majorization_attested: evidence.majorization_attested,
            bank_a: &ev_a,
            bank_b: &ev_b,
        },
        warnings: &warnings,
        exit_code,
    };
    dir.write_json("witness_report.json", &report)?;

    let mut summary = format!(
        "entrocert certify: {} inequality on {} data\n",
        inequality_name(inequality),
        resolved.route,
    );
    summary.push_str(&format!(
        "  time bound      h <= {:.4} bits  [{}]\n",
        witness.h_time_bound, time_bound.kind,
    ));
    summary.push_str(&format!(
        "  frequency bound h <= {:.4} bits  [{}, w0 = {:.6}]\n",
        witness.h_freq_bound, freq_bound.kind, evidence.w0,
    ));
    summary.push_str(&format!(
        "  threshold {:.6} bits; margin {:+.4} bits\n",
        witness.threshold, witness.margin,
    ));
    summary.push_str(&format!(
        "  bootstrap ({} resamples): CI95 [{:+.4}, {:+.4}], plug-in {:+.4}\n",
        bootstrap.resamples, bootstrap.ci_low, bootstrap.ci_high, bootstrap.margin_plugin,
    ));
    if let Some(c) = resolved.coverage {
        summary.push_str(&format!("  bank coverage {c:.6}\n"));
    }
    for note in &witness.notes {
        summary.push_str(&format!("  note: {note}\n"));
    }
    for w in &warnings {
        summary.push_str(&format!("  warning: {w}\n"));
    }
    let verdict = match exit_code {
        EXIT_CERTIFIED => "CERTIFIED",
        EXIT_NOT_CERTIFIED => "NOT CERTIFIED",
        _ => "PRECONDITIONS FAILED",
    };
    summary.push_str(&format!("  verdict: {verdict} (exit {exit_code})\n"));
    summary.push_str(&format!("  manifest sha256 {}\n", manifest.digest()));
    dir.write_text("summary.txt", &summary)?;
    print!("{summary}");
    Ok(exit_code)
}
