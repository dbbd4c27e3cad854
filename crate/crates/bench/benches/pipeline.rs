//! Wall-clock cost of the pipeline stages at desk scale: timing entropy,
//! filter-bank weights, dense filter sampling, the analytic campaign
//! sampler, and the bootstrap.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use entrocert_core::acquisition::{
    bootstrap_margin, gaussian_difference_histogram, simulate_spdc_campaign, subtract_background,
    timing_entropy_bound, BankEvidence, CampaignConfig, TimingSimConfig,
};
use entrocert_core::coarsegrain::{conditional_entropy_bound, filter_sample_joint};
use entrocert_core::filters::{bank_weights, FilterBank, FilterProfile, FilterShape, WeightOptions};
use entrocert_core::probcore::Grid2D;
use entrocert_core::spdc::SpdcParams;
use entrocert_core::witness::Inequality;

fn desk_params() -> SpdcParams {
    SpdcParams {
        pump_center: 400_000.0,
        pump_sigma: 1.0,
        phasematch_sigma: 35.0,
        crystal_length_mm: 20.0,
        gvd_fs2_per_mm: 292.0,
        jitter_a: 20e-12,
        jitter_b: 20e-12,
        timebin: 1e-12,
    }
}

fn desk_bank() -> FilterBank {
    FilterBank::regular(
        FilterShape::Lorentzian { fwhm: 0.7 },
        199_934.9,
        1.0,
        131,
    )
    .unwrap()
}

fn desk_campaign() -> CampaignConfig {
    CampaignConfig {
        total_pairs: 1_000_000,
        bank_a: desk_bank(),
        bank_b: desk_bank(),
        center_jitter_fwhm: 0.0,
        width_jitter: 0.0,
        rng_seed: 11,
        background_rate: 0.0,
        timing: Some(TimingSimConfig {
            sigma_observed: 424e-12 / 2.354_820_045_030_949_3,
            bin_width: 1e-12,
            window_halfwidth: 1500e-12,
            background_per_bin: 0.0,
        }),
    }
}

fn bench_timing_entropy(c: &mut Criterion) {
    let hist = gaussian_difference_histogram(424e-12, 1e-12, 8.0, 1e7).unwrap();
    c.bench_function("timing_entropy_bound_3400_bins", |b| {
        b.iter(|| {
            let sub = subtract_background(black_box(&hist), 0.1).unwrap();
            timing_entropy_bound(&sub).unwrap()
        })
    });
}

fn bench_bank_weights(c: &mut Criterion) {
    let spacing = 1.0;
    let centers: Vec<f64> = (0..24).map(|k| k as f64 * spacing).collect();
    let profiles: Vec<FilterProfile> = centers
        .iter()
        .enumerate()
        .map(|(k, &ctr)| {
            // Deterministic small drift, enough to defeat the uniform-bank
            // shortcut.
            let dc = 0.08 * ((k as f64 * 0.7).sin());
            let scale = 1.0 + 0.1 * ((k as f64 * 1.3).cos());
            FilterProfile::lorentzian(0.7 * scale, ctr + dc).unwrap()
        })
        .collect();
    let bank = FilterBank::new(profiles, spacing, centers).unwrap();
    c.bench_function("bank_weights_24_drifting_filters", |b| {
        b.iter(|| bank_weights(black_box(&bank), &WeightOptions::default()).unwrap())
    });
}

fn bench_filter_sampling(c: &mut Criterion) {
    let step = 0.02;
    let half = 6.0;
    let n = (2.0 * half / step) as usize;
    let rho = Grid2D::from_fn(-half, step, n, -half, step, n, |x, y| {
        let s = x + y;
        let d = x - y;
        (-0.5 * (s * s + d * d / 16.0)).exp()
    })
    .unwrap();
    let bank = FilterBank::regular(FilterShape::Lorentzian { fwhm: 0.5 }, -5.75, 0.5, 24).unwrap();
    c.bench_function("filter_sample_joint_600x600_grid_24x24_bank", |b| {
        b.iter(|| {
            let sampled = filter_sample_joint(black_box(&rho), &bank, &bank).unwrap();
            conditional_entropy_bound(&sampled.grained, 1.0, true).unwrap()
        })
    });
}

fn bench_analytic_campaign(c: &mut Criterion) {
    let params = desk_params();
    let cfg = desk_campaign();
    c.bench_function("analytic_campaign_131_filters_1e6_pairs", |b| {
        b.iter(|| simulate_spdc_campaign(black_box(&params), &cfg).unwrap())
    });
}

fn bench_bootstrap(c: &mut Criterion) {
    let out = simulate_spdc_campaign(&desk_params(), &desk_campaign()).unwrap();
    let hist = out.histogram.expect("timing simulation was configured");
    let evidence = BankEvidence {
        w0: 1.0,
        majorization_attested: true,
    };
    c.bench_function("bootstrap_margin_200_resamples", |b| {
        b.iter(|| {
            bootstrap_margin(
                black_box(&out.table),
                &hist,
                &evidence,
                Inequality::Conditional,
                200,
                11,
            )
            .unwrap()
        })
    });
}

criterion_group!(
    benches,
    bench_timing_entropy,
    bench_bank_weights,
    bench_filter_sampling,
    bench_analytic_campaign,
    bench_bootstrap,
);
criterion_main!(benches);
