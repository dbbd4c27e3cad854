//! `budget`: the frequency-side entropy room left by a timing bound.

use std::f64::consts::PI;

use entrocert_core::acquisition::{
    gaussian_difference_histogram, load_histogram, subtract_background, timing_entropy_bound,
};
use entrocert_core::witness::frequency_budget;
use serde_json::json;

use crate::manifest::{digest_file, ManifestBody, OutDir, RunManifest, TOOL_VERSION};
use crate::{BudgetArgs, CliError, EXIT_CERTIFIED};

/// Wings of the ideal Gaussian histogram, standard deviations per side.
/// Wide enough that the truncated tail shifts the bound by far less than
/// the quoted precision.
const SPAN_SIGMAS: f64 = 8.0;

pub fn run(args: &BudgetArgs) -> Result<i32, CliError> {
    let mut inputs = Vec::new();
    let (time_bound, source) = match (&args.histogram, args.fwhm_ps, args.bin_ps) {
        (Some(path), None, None) => {
            inputs.push(digest_file(path)?);
            let h = load_histogram(path).map_err(CliError::from)?;
            let h = subtract_background(&h, args.wing_fraction).map_err(CliError::from)?;
            let bound = timing_entropy_bound(&h).map_err(CliError::from)?;
            (bound, format!("histogram {}", path.display()))
        }
        (None, Some(fwhm_ps), Some(bin_ps)) => {
            let h = gaussian_difference_histogram(
                fwhm_ps * 1e-12,
                bin_ps * 1e-12,
                SPAN_SIGMAS,
                1.0,
            )
            .map_err(CliError::from)?;
            let bound = timing_entropy_bound(&h).map_err(CliError::from)?;
            (
                bound,
                format!("Gaussian FWHM {fwhm_ps} ps at {bin_ps} ps bins"),
            )
        }
        _ => {
            return Err(CliError::input(
                "budget needs either --histogram or both --fwhm-ps and --bin-ps",
            ))
        }
    };

    let wavelength_m = args.wavelength_nm * 1e-9;
    if !(wavelength_m > 0.0) || !wavelength_m.is_finite() {
        return Err(CliError::input(format!(
            "wavelength must be positive, got {} nm",
            args.wavelength_nm
        )));
    }
    let budget = frequency_budget(time_bound.value_bits, wavelength_m).map_err(CliError::from)?;

    let summary = format!(
        "timing bound        h(t_A - t_B) <= {:.4} bits  ({source})\n\
         frequency budget    max h(w_A + w_B)     {:>10.4} bits\n\
         Gaussian sigma cap  2 pi x {:>12.4} MHz\n\
         Gaussian FWHM cap   {:>18.4} pm  (at {} nm)\n\
         Lorentzian FWHM cap 2 pi x {:>12.4} GHz\n",
        time_bound.value_bits,
        budget.max_h_freq_bits,
        budget.max_sigma / (2.0 * PI * 1e6),
        budget.max_fwhm_gauss_pm,
        args.wavelength_nm,
        budget.max_fwhm_lorentz / (2.0 * PI * 1e9),
    );
    print!("{summary}");

    if let Some(out) = &args.out {
        let body = ManifestBody {
            subcommand: "budget".into(),
            tool_version: TOOL_VERSION,
            inputs,
            config: json!({
                "fwhm_ps": args.fwhm_ps,
                "bin_ps": args.bin_ps,
                "histogram": args.histogram.as_ref().map(|p| p.display().to_string()),
                "wing_fraction": args.wing_fraction,
                "wavelength_nm": args.wavelength_nm,
            }),
            effective: json!({ "h_time_bits": time_bound.value_bits }),
            rng_algorithm: None,
        };
        let manifest = RunManifest::seal(body)?;
        let dir = OutDir::create(out)?;
        dir.write_json("run_manifest.json", &manifest)?;
        dir.write_json(
            "budget.json",
            &json!({
                "manifest_digest": manifest.digest(),
                "tool_version": TOOL_VERSION,
                "h_time_bits": time_bound.value_bits,
                "time_provenance": time_bound.provenance,
                "budget": budget,
                "wavelength_nm": args.wavelength_nm,
            }),
        )?;
        dir.write_text("summary.txt", &summary)?;
    }
    Ok(EXIT_CERTIFIED)
}
