use pwcrt_core::monte_carlo::{empirical_exceedance, simulate, SimConfig};
use pwcrt_core::{analyze_frame, datasets, AnalysisOptions, ExceedanceCurve, FrameAnalysis, MessageSet};

fn analysed(set: &MessageSet, i: usize, eps: f64) -> FrameAnalysis {
    analyze_frame(set, i, &AnalysisOptions::with_epsilon(eps)).unwrap()
}

fn config_for(set: MessageSet, i: usize, analysis: &FrameAnalysis, samples: u64, seed: u64) -> SimConfig {
    SimConfig {
        instances: analysis.instances.len(),
        ..SimConfig::new(set, i, samples, seed).unwrap()
    }
}

fn kolmogorov(a: &ExceedanceCurve, b: &ExceedanceCurve, upto: u64) -> f64 {
    (0..=upto).map(|t| (a.eval(t) - b.eval(t)).abs()).fold(0.0, f64::max)
}

#[test]
fn worked_example_tail_within_binomial_bounds() {
    let set = datasets::example3();
    let analysis = analysed(&set, 1, datasets::EXAMPLE3_EPSILON);
    let report = simulate(&config_for(set, 1, &analysis, 1_000_000, 9)).unwrap();
    let empirical = empirical_exceedance(&report);
    let p = analysis.curve.eval(13);
    assert!((p - 1e-5).abs() < 1e-12);
    let sigma = (p * (1.0 - p) / 1e6).sqrt();
    assert!((empirical.eval(13) - p).abs() <= 3.0 * sigma, "{} vs {p}", empirical.eval(13));
}

fn binomial_agreement(set: MessageSet, i: usize, eps: f64, samples: u64, seed: u64, points: u64) -> f64 {
    let analysis = analysed(&set, i, eps);
    let report = simulate(&config_for(set, i, &analysis, samples, seed)).unwrap();
    let empirical = empirical_exceedance(&report);
    let upto = analysis.curve.steps().last().unwrap().0 + 1;
    let residual = analysis.curve.eval(upto);
    let n = samples as f64;
    let inside = (0..points)
        .map(|k| k * upto / (points - 1))
        .filter(|&t| {
            let f = analysis.curve.eval(t);
            let bound = 4.0 * (f * (1.0 - f) / n).sqrt() + residual + 1e-12;
            (empirical.eval(t) - f).abs() <= bound
        })
        .count();
    inside as f64 / points as f64
}

#[test]
fn empirical_curve_within_binomial_band() {
    let fraction = binomial_agreement(datasets::example3(), 1, 1e-12, 200_000, 3, 200);
    assert!(fraction >= 0.99, "example3: {fraction}");
    let fraction = binomial_agreement(datasets::sae(), 16, datasets::SAE_EPSILON, 100_000, 4, 1000);
    assert!(fraction >= 0.99, "sae: {fraction}");
}

#[test]
fn more_samples_shrink_the_distance() {
    let set = datasets::sae();
    let i = 16;
    let analysis = analysed(&set, i, datasets::SAE_EPSILON);
    let upto = analysis.curve.steps().last().unwrap().0;
    let distance = |samples| {
        let report = simulate(&config_for(set.clone(), i, &analysis, samples, 21)).unwrap();
        kolmogorov(&analysis.curve, &empirical_exceedance(&report), upto)
    };
    let coarse = distance(10_000);
    let fine = distance(1_000_000);
    assert!(fine < coarse, "{fine} vs {coarse}");
    assert!(fine < 2e-3);
}

#[test]
fn report_does_not_depend_on_thread_count() {
    let config = SimConfig::new(datasets::sae(), 16, 20_000, 5).unwrap();
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| simulate(&config).unwrap());
    assert_eq!(single, simulate(&config).unwrap());
}

#[test]
fn report_round_trips_through_json() {
    let report = simulate(&SimConfig::new(datasets::example3(), 1, 1000, 2).unwrap()).unwrap();
    let json = serde_json::to_string(&report).unwrap();
    assert_eq!(serde_json::from_str::<pwcrt_core::SimReport>(&json).unwrap(), report);
}
