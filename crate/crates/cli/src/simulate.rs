//! `simulate`: synthesize a coincidence campaign and write it as the same
//! CSV datasets `certify` consumes.

use std::fs;

use entrocert_core::acquisition::{
    simulate_campaign, simulate_spdc_campaign, CampaignOutput, RNG_ALGORITHM,
};
use entrocert_core::filters::FilterBank;
use entrocert_core::spdc::joint_spectral_density;
use serde::Serialize;
use serde_json::json;

use crate::config::{load_run_config, RunConfig};
use crate::manifest::{digest_file, ManifestBody, OutDir, RunManifest, TOOL_VERSION};
use crate::{CliError, SimulateArgs, EXIT_CERTIFIED};

pub struct CampaignRun {
    pub output: CampaignOutput,
    /// "analytic" for the narrowband factorized sampler, "dense-grid" for
    /// explicit quadrature over a configured grid.
    pub route: &'static str,
    /// True when both banks are exact combs and no jitter is configured,
    /// so the realized banks equal the nominal ones.
    pub uniform: bool,
}

/// Route a campaign config to the right sampler. A configured `grid`
/// selects the dense quadrature path; otherwise the analytic narrowband
/// path runs, which itself rejects banks it cannot handle.
pub fn run_campaign(cfg: &RunConfig, seed: u64) -> Result<CampaignRun, CliError> {
    let spec = cfg
        .campaign
        .as_ref()
        .ok_or_else(|| CliError::input("config has no `campaign` section"))?;
    let ccfg = cfg.campaign_config(seed)?;
    ccfg.validate().map_err(CliError::from)?;
    let timebin_s = spec.timing.as_ref().map_or(1e-12, |t| t.bin_ps * 1e-12);
    let params = spec.source.to_params(timebin_s);
    let uniform = spec.center_jitter_fwhm == 0.0
        && spec.width_jitter == 0.0
        && cfg.bank_a.is_uniform()
        && cfg.bank_b.is_uniform();
    match &spec.grid {
        Some(g) => {
            let mut warnings = params.validate().map_err(CliError::from)?;
            let rho = joint_spectral_density(&params, &g.to_spec()).map_err(CliError::from)?;
            let mut output = simulate_campaign(&rho, &ccfg).map_err(CliError::from)?;
            warnings.append(&mut output.warnings);
            output.warnings = warnings;
            Ok(CampaignRun {
                output,
                route: "dense-grid",
                uniform,
            })
        }
        None => Ok(CampaignRun {
            output: simulate_spdc_campaign(&params, &ccfg).map_err(CliError::from)?,
            route: "analytic",
            uniform,
        }),
    }
}

#[derive(Serialize)]
struct BankDump<'a> {
    nominal_spacing_rad_per_s: f64,
    nominal_centers_rad_per_s: &'a [f64],
    filters: &'a [entrocert_core::filters::FilterProfile],
}

fn dump_bank(bank: &FilterBank) -> BankDump<'_> {
    BankDump {
        nominal_spacing_rad_per_s: bank.nominal_spacing(),
        nominal_centers_rad_per_s: bank.nominal_centers(),
        filters: bank.profiles(),
    }
}

pub fn run(args: &SimulateArgs) -> Result<i32, CliError> {
    let text = fs::read_to_string(&args.config)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", args.config.display())))?;
    let cfg = load_run_config(&text)?;
    if cfg.campaign.is_none() {
        return Err(CliError::input(
            "simulate needs a `campaign` section in the config",
        ));
    }
    let seed = args.seed.unwrap_or(cfg.seed);
    let run = run_campaign(&cfg, seed)?;
    let out = run.output;

    let body = ManifestBody {
        subcommand: "simulate".into(),
        tool_version: TOOL_VERSION,
        inputs: vec![digest_file(&args.config)?],
        config: serde_json::from_str(&text)
            .map_err(|e| CliError::input(format!("config snapshot: {e}")))?,
        effective: json!({ "seed": seed, "route": run.route }),
        rng_algorithm: Some(RNG_ALGORITHM),
    };
    let manifest = RunManifest::seal(body)?;
    let dir = OutDir::create(&args.out)?;
    let digest = manifest.digest().to_string();

    let table = &out.table;
    dir.write_csv("joint_counts.csv", &digest, |w| {
        writeln!(w, "m_index,n_index,counts")?;
        for &(m, n, c) in table.entries() {
            writeln!(w, "{m},{n},{c}")?;
        }
        Ok(())
    })?;
    if let Some(h) = &out.histogram {
        dir.write_csv("histogram.csv", &digest, |w| {
            writeln!(w, "bin_start_ps,counts")?;
            for (i, &c) in h.counts().iter().enumerate() {
                let start_ps = (h.t0() + i as f64 * h.bin_width()) * 1e12;
                writeln!(w, "{start_ps},{c}")?;
            }
            Ok(())
        })?;
    }
    dir.write_json(
        "realized_banks.json",
        &json!({
            "manifest_digest": digest,
            "rng_algorithm": out.rng_algorithm,
            "coverage": out.coverage,
            "bank_a": dump_bank(&out.realized_bank_a),
            "bank_b": dump_bank(&out.realized_bank_b),
        }),
    )?;
    dir.write_json("run_manifest.json", &manifest)?;

    let mut summary = format!(
        "simulated {} coincidences over a {} x {} filter-pair table ({} route, seed {seed})\n",
        table.total(),
        table.rows(),
        table.cols(),
        run.route,
    );
    if let Some(h) = &out.histogram {
        summary.push_str(&format!(
            "timing histogram: {} bins of {:.6} ps, {} counts\n",
            h.len(),
            h.bin_width() * 1e12,
            h.total(),
        ));
    }
    summary.push_str(&format!("bank coverage of the source spectrum: {:.6}\n", out.coverage));
    for w in &out.warnings {
        summary.push_str(&format!("warning: {w}\n"));
    }
    summary.push_str(&format!("manifest sha256 {digest}\n"));
    print!("{summary}");
    Ok(EXIT_CERTIFIED)
}
