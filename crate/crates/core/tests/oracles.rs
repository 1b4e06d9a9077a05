mod common;

use common::{brute_force_response, exact_options, max_point_diff, micro_sets, streams, timeline_wcrt};
use pwcrt_core::analysis::busy_window_sequence;
use pwcrt_core::{
    analyze_frame, datasets, det_wcrt, generate_sets, legacy_pwcrt, AnalysisOptions, DetOptions, ErrorModel,
    GenSpec, MessageSet, RetryLimit,
};

fn error_free(set: &MessageSet) -> MessageSet {
    set.with_error_model(ErrorModel::new(0.0, RetryLimit::Fixed(0)))
        .unwrap()
        .without_retry_overrides()
}

fn small_spec(seed: u64) -> GenSpec {
    GenSpec {
        n_messages: 5,
        n_sets: 20,
        seed,
        bus_speed: 1000,
        period_ms: (10.0, 200.0),
        transmission_bits: (1, 12),
        ..GenSpec::default()
    }
}

#[test]
fn deterministic_matches_timeline() {
    let mut sets = vec![datasets::example3(), datasets::sae()];
    sets.extend(generate_sets(&small_spec(5)).unwrap());
    sets.extend(generate_sets(&GenSpec { n_sets: 10, seed: 6, ..GenSpec::default() }).unwrap());
    for set in &sets {
        let s = streams(set);
        for i in 0..set.len() {
            let det = det_wcrt(set, i, &DetOptions::default()).unwrap();
            assert_eq!(det.wcrt, timeline_wcrt(&s, i), "frame {i} of {set:?}");
        }
    }
}

#[test]
fn error_free_pipeline_degenerates_to_deterministic() {
    for set in generate_sets(&small_spec(8)).unwrap() {
        let set = error_free(&set);
        for i in 0..set.len() {
            let det = det_wcrt(&set, i, &DetOptions::default()).unwrap();
            let analysis = analyze_frame(&set, i, &AnalysisOptions::default()).unwrap();
            assert!(analysis.instances.iter().all(|r| r.response.len() == 1));
            let worst = analysis
                .instances
                .iter()
                .filter_map(|r| r.response.min_value())
                .max()
                .unwrap();
            assert_eq!(worst, det.wcrt);
            assert_eq!(analysis.curve.eval(det.wcrt - 1), 1.0);
            assert_eq!(analysis.curve.eval(det.wcrt), 0.0);
        }
    }
}

#[test]
fn error_free_window_ends_with_deterministic_busy_period() {
    for set in generate_sets(&small_spec(9)).unwrap() {
        let set = error_free(&set);
        let i = set.len() - 1;
        let det = det_wcrt(&set, i, &DetOptions::default()).unwrap();
        let seq = busy_window_sequence(&set, i, &AnalysisOptions::default()).unwrap();
        assert!(seq.records.iter().all(|(_, w)| w.len() == 1));
        assert!(seq.stop_time >= det.busy_period);
        let last = seq.last().max_value().unwrap();
        assert_eq!(last, det.busy_period);
    }
}

#[test]
fn worked_example_matches_enumeration() {
    let set = datasets::example3();
    let s = streams(&set);
    // With every retry taken the two frames overload the bus, so the window
    // only closes up to a tiny tail.
    let analysis = analyze_frame(&set, 1, &AnalysisOptions::with_epsilon(1e-15)).unwrap();
    for inst in &analysis.instances {
        let reference = brute_force_response(&s, 1, inst.release);
        assert!(max_point_diff(&inst.response, &reference) < 1e-12, "instance {}", inst.ordinal);
    }
}

#[test]
fn micro_sets_match_enumeration() {
    let (mut compared, mut spread) = (0, 0);
    for set in micro_sets(2024, 25) {
        let s = streams(&set);
        for i in 1..set.len() {
            let analysis = analyze_frame(&set, i, &exact_options()).unwrap();
            for inst in &analysis.instances {
                let reference = brute_force_response(&s, i, inst.release);
                let diff = max_point_diff(&inst.response, &reference);
                assert!(diff < 1e-10, "frame {i}, release {}: {diff}\n{set:?}", inst.release);
                compared += 1;
                spread += usize::from(reference.len() > 2);
            }
        }
    }
    assert!(compared >= 25 && spread >= 10, "{compared} instances, {spread} non-trivial");
}

#[test]
fn legacy_never_below_improved() {
    let mut cases: Vec<(MessageSet, f64)> = micro_sets(77, 15).into_iter().map(|s| (s, 1e-9)).collect();
    cases.push((datasets::example3(), datasets::EXAMPLE3_EPSILON));
    cases.push((datasets::sae(), datasets::SAE_EPSILON));
    for (set, eps) in cases {
        let opts = AnalysisOptions::with_epsilon(eps);
        let i = set.len() - 1;
        let improved = analyze_frame(&set, i, &opts).unwrap();
        let legacy = legacy_pwcrt(&set, i, &opts).unwrap();
        let horizon = improved.curve.steps().last().unwrap().0.max(legacy.curve.steps().last().unwrap().0);
        for t in 0..=horizon + 1 {
            assert!(improved.curve.eval(t) <= legacy.curve.eval(t) + 1e-12, "t = {t}");
        }
    }
}

#[test]
fn single_frame_legacy_equals_improved() {
    let set = MessageSet::new(
        vec![pwcrt_core::Frame::new("only", 0, 62, 1250, 1250, 13)],
        125_000,
        ErrorModel::new(1e-5, RetryLimit::Threshold(1e-12)),
    )
    .unwrap();
    let opts = AnalysisOptions::default();
    let a = analyze_frame(&set, 0, &opts).unwrap();
    let b = legacy_pwcrt(&set, 0, &opts).unwrap();
    assert_eq!(a.curve.steps(), b.curve.steps());
}
