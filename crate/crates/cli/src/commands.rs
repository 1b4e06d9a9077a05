use std::path::{Path, PathBuf};

use pwcrt_core::format::{exceedance_from_csv, exceedance_to_csv};
use pwcrt_core::monte_carlo::{BlockingMode, JitterMode};
use pwcrt_core::timing::{bench_sets, BenchReport};
use pwcrt_core::{
    analyze_frame, det_wcrt, empirical_exceedance, generate_sets, legacy_pwcrt, max_abs_diff_ms,
    message_set_to_json, mse_ms, AnalysisOptions, BitTime, DetOptions, ExceedanceCurve,
    GenSpec, MessageSet, Method, SimConfig,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::input::{default_epsilon, load_set_file, parse_range, read_file, LoadedSet};
use crate::manifest::RunManifest;
use crate::{
    AnalyzeArgs, BenchArgs, Cli, CliError, CliResult, CompareArgs, GenerateArgs, JitterArg, MethodArg,
    SimBlockingArg, SimulateArgs,
};

#[derive(Debug, Serialize)]
struct FrameSummary {
    frame_id: String,
    method: Method,
    blocking_bits: BitTime,
    deadline_bits: BitTime,
    deadline_miss_probability: f64,
    /// Largest response time with non-zero probability, in bit-times.
    max_response_bits: BitTime,
    #[serde(skip_serializing_if = "Option::is_none")]
    stochastic: Option<StochasticSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    deterministic: Option<DeterministicSummary>,
}

#[derive(Debug, Serialize)]
struct StochasticSummary {
    epsilon: f64,
    stop_time_bits: BitTime,
    stop_tail: f64,
    instances: usize,
    convolutions: usize,
}

#[derive(Debug, Serialize)]
struct DeterministicSummary {
    with_errors: bool,
    busy_period_bits: BitTime,
    instances: usize,
    schedulable: bool,
}

fn method_of(arg: MethodArg) -> Method {
    match arg {
        MethodArg::Improved => Method::Improved,
        MethodArg::Legacy => Method::Legacy,
        MethodArg::Deterministic => Method::Deterministic,
    }
}

fn analyze_one(
    set: &MessageSet,
    i: usize,
    args: &AnalyzeArgs,
    opts: &AnalysisOptions,
) -> CliResult<(FrameSummary, ExceedanceCurve)> {
    let bits_per_ms = set.bits_per_ms();
    if args.method == MethodArg::Deterministic {
        let det_opts = DetOptions {
            blocking: opts.blocking,
            with_errors: args.with_errors,
            horizon: opts.horizon,
        };
        let det = det_wcrt(set, i, &det_opts)?;
        let curve = ExceedanceCurve::step_at(det.wcrt, Method::Deterministic, det.frame_id.clone(), bits_per_ms);
        let summary = FrameSummary {
            frame_id: det.frame_id,
            method: Method::Deterministic,
            blocking_bits: det.blocking,
            deadline_bits: set.frame(i).deadline,
            deadline_miss_probability: if det.schedulable { 0.0 } else { 1.0 },
            max_response_bits: det.wcrt,
            stochastic: None,
            deterministic: Some(DeterministicSummary {
                with_errors: args.with_errors,
                busy_period_bits: det.busy_period,
                instances: det.instances,
                schedulable: det.schedulable,
            }),
        };
        return Ok((summary, curve));
    }
    let analysis = match args.method {
        MethodArg::Legacy => legacy_pwcrt(set, i, opts)?,
        _ => analyze_frame(set, i, opts)?,
    };
    let max_response_bits = analysis
        .instances
        .iter()
        .filter_map(|inst| inst.response.entries().last().map(|&(v, _)| v))
        .max()
        .unwrap_or(0);
    let summary = FrameSummary {
        frame_id: analysis.frame_id.clone(),
        method: analysis.method,
        blocking_bits: analysis.blocking,
        deadline_bits: analysis.deadline,
        deadline_miss_probability: analysis.deadline_miss_probability,
        max_response_bits,
        stochastic: Some(StochasticSummary {
            epsilon: analysis.epsilon,
            stop_time_bits: analysis.stop_time,
            stop_tail: analysis.stop_tail,
            instances: analysis.instances.len(),
            convolutions: analysis.convolutions,
        }),
        deterministic: None,
    };
    Ok((summary, analysis.curve))
}

fn record_set(manifest: &mut RunManifest, loaded: &LoadedSet) {
    manifest.param("set", &loaded.label);
    if let Some(digest) = &loaded.digest {
        manifest.inputs.push(digest.clone());
    }
}

fn analysis_options(loaded: &LoadedSet, epsilon: Option<f64>, horizon: Option<u64>, args: &crate::SetArgs) -> AnalysisOptions {
    let defaults = AnalysisOptions::default();
    AnalysisOptions {
        epsilon: epsilon.unwrap_or_else(|| default_epsilon(loaded)),
        blocking: args.blocking_rule(),
        horizon: horizon.unwrap_or(defaults.horizon),
    }
}

pub(crate) fn analyze(cli: &Cli, args: &AnalyzeArgs) -> CliResult<()> {
    let mut manifest = RunManifest::new("analyze");
    let loaded = manifest.timed("load", || args.set.load())?;
    let targets = args.set.targets(&loaded.set)?;
    let opts = analysis_options(&loaded, args.epsilon, args.horizon, &args.set);
    let method = method_of(args.method);
    record_set(&mut manifest, &loaded);
    manifest
        .param("method", method)
        .param("options", opts)
        .param("with_errors", args.with_errors)
        .param("error_model", loaded.set.error_model);

    let set = &loaded.set;
    let results = manifest.timed("analysis", || {
        targets
            .par_iter()
            .map(|&i| analyze_one(set, i, args, &opts))
            .collect::<CliResult<Vec<_>>>()
    })?;

    let out = &cli.out_dir;
    for (summary, curve) in &results {
        let name = format!("{}_{}_{method}.csv", loaded.label, summary.frame_id);
        manifest.write(out, &name, &exceedance_to_csv(curve))?;
        println!(
            "{}: {method} deadline-miss probability {:.6e}, max response {} bits ({:.4} ms)",
            summary.frame_id,
            summary.deadline_miss_probability,
            summary.max_response_bits,
            set.bits_to_ms(summary.max_response_bits as f64),
        );
    }
    let stem = match targets.as_slice() {
        [i] => format!("{}_{}_{method}", loaded.label, set.frame(*i).id),
        _ => format!("{}_{method}", loaded.label),
    };
    let summaries: Vec<&FrameSummary> = results.iter().map(|(s, _)| s).collect();
    manifest.write_json(out, &format!("{stem}.json"), &summaries)?;
    manifest.finish(out, &stem)?;
    Ok(())
}

pub(crate) fn simulate(cli: &Cli, args: &SimulateArgs) -> CliResult<()> {
    let mut manifest = RunManifest::new("simulate");
    let loaded = manifest.timed("load", || args.set.load())?;
    let targets = args.set.targets(&loaded.set)?;
    let opts = analysis_options(&loaded, args.epsilon, None, &args.set);
    record_set(&mut manifest, &loaded);
    let blocking = match args.blocking_mode {
        SimBlockingArg::WorstCase => BlockingMode::WorstCaseDeterministic,
        SimBlockingArg::Sampled => BlockingMode::Sampled,
    };
    let jitter = match args.jitter {
        JitterArg::Off => JitterMode::Off,
        JitterArg::Uniform => JitterMode::Uniform,
    };
    manifest
        .param("samples", args.samples)
        .param("seed", args.seed)
        .param("blocking_mode", blocking)
        .param("blocking_rule", args.set.blocking_rule())
        .param("jitter", jitter)
        .param("error_model", loaded.set.error_model)
        .param("rng", pwcrt_core::monte_carlo::RNG_ALGORITHM)
        .param("shards", pwcrt_core::monte_carlo::SHARDS);

    let out = cli.out_dir.clone();
    let mut instance_counts = Vec::new();
    for i in targets {
        let instances = match args.instances {
            Some(n) => n,
            None => manifest
                .timed("size", || analyze_frame(&loaded.set, i, &opts))?
                .instances
                .len(),
        };
        instance_counts.push(instances);
        let mut config = SimConfig::new(loaded.set.clone(), i, args.samples, args.seed)?;
        config.instances = instances;
        config.blocking = blocking;
        config.blocking_rule = args.set.blocking_rule();
        config.jitter = jitter;
        if let Some(h) = args.horizon {
            config.horizon = h;
        }
        let report = manifest.timed("simulation", || pwcrt_core::simulate(&config))?;
        let curve = empirical_exceedance(&report);
        let stem = format!("{}_{}_monte_carlo", loaded.label, report.frame_id);
        manifest.write(&out, &format!("{stem}.csv"), &exceedance_to_csv(&curve))?;
        manifest.write_json(&out, &format!("{stem}.json"), &report)?;
        let worst = report.worst_histogram.keys().next_back().copied().unwrap_or(0);
        println!(
            "{}: {} samples, largest observed response {} bits ({:.4} ms)",
            report.frame_id,
            report.samples,
            worst,
            loaded.set.bits_to_ms(worst as f64),
        );
    }
    manifest.param("instances", instance_counts);
    let stem = match &args.set.frame {
        Some(id) => format!("{}_{id}_monte_carlo", loaded.label),
        None => format!("{}_monte_carlo", loaded.label),
    };
    manifest.finish(&out, &stem)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct PairComparison {
    a: String,
    b: String,
    mse: f64,
    max_abs_diff: f64,
}

#[derive(Debug, Serialize)]
struct CompareReport {
    points: usize,
    range_ms: (f64, f64),
    pairs: Vec<PairComparison>,
}

pub(crate) fn compare(cli: &Cli, args: &CompareArgs) -> CliResult<()> {
    let mut manifest = RunManifest::new("compare");
    let (lo, hi) = parse_range::<f64>(&args.range, "--range")?;
    manifest.param("points", args.points).param("range_ms", (lo, hi));
    let mut curves = Vec::with_capacity(args.curves.len());
    for path in &args.curves {
        let (text, digest) = read_file(path)?;
        let curve = exceedance_from_csv(&text)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        manifest.inputs.push(digest);
        curves.push((path.display().to_string(), curve));
    }
    let mut pairs = Vec::new();
    for (k, (name_a, a)) in curves.iter().enumerate() {
        for (name_b, b) in &curves[k + 1..] {
            let pair = PairComparison {
                a: name_a.clone(),
                b: name_b.clone(),
                mse: mse_ms(a, b, args.points, lo, hi)?,
                max_abs_diff: max_abs_diff_ms(a, b, args.points, lo, hi)?,
            };
            println!("{} vs {}: mse {:.6e}, max |diff| {:.6e}", pair.a, pair.b, pair.mse, pair.max_abs_diff);
            pairs.push(pair);
        }
    }
    let report = CompareReport {
        points: args.points,
        range_ms: (lo, hi),
        pairs,
    };
    manifest.write_json(&cli.out_dir, &args.output, &report)?;
    let stem = Path::new(&args.output)
        .file_stem()
        .map_or_else(|| "compare".to_string(), |s| s.to_string_lossy().into_owned());
    manifest.finish(&cli.out_dir, &stem)?;
    Ok(())
}

fn gen_spec(args: &GenerateArgs) -> CliResult<GenSpec> {
    Ok(GenSpec {
        n_messages: args.n,
        utilization: args.utilization,
        n_sets: args.sets,
        seed: args.seed,
        period_ms: parse_range(&args.periods, "--periods")?,
        transmission_bits: parse_range(&args.transmission, "--transmission")?,
        jitter_fraction: parse_range(&args.jitter, "--jitter")?,
        deadline_fraction: args.deadline_fraction,
        error_overhead: args.error_overhead,
        lambda: args.lambda,
        retry_threshold: args.retry_threshold,
        bus_speed: args.bus_speed,
        ..GenSpec::default()
    })
}

pub(crate) fn generate(cli: &Cli, args: &GenerateArgs) -> CliResult<()> {
    let mut manifest = RunManifest::new("generate");
    let spec = gen_spec(args)?;
    manifest.param("spec", &spec);
    let sets = manifest.timed("generation", || generate_sets(&spec))?;
    let width = sets.len().saturating_sub(1).to_string().len().max(3);
    for (k, set) in sets.iter().enumerate() {
        manifest.write(&cli.out_dir, &format!("set_{k:0width$}.json"), &message_set_to_json(set))?;
    }
    let realized: Vec<f64> = sets.iter().map(MessageSet::utilization).collect();
    manifest.param("realized_utilization", &realized);
    manifest.finish(&cli.out_dir, "generate")?;
    println!("wrote {} sets to {}", sets.len(), cli.out_dir.display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct BenchGroup {
    /// Target utilization of generated sets; absent for a directory.
    #[serde(skip_serializing_if = "Option::is_none")]
    utilization: Option<f64>,
    report: BenchReport,
}

fn sweep(text: &str, step: f64) -> CliResult<Vec<f64>> {
    if !text.contains(':') {
        let u = text
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("--utilization: cannot parse {text:?}")))?;
        return Ok(vec![u]);
    }
    let (lo, hi) = parse_range::<f64>(text, "--utilization")?;
    if step.is_nan() || step <= 0.0 {
        return Err(CliError::Usage("--step must be positive".into()));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|k| lo + k as f64 * step).collect())
}

fn sets_in_dir(dir: &Path, manifest: &mut RunManifest) -> CliResult<Vec<(String, MessageSet)>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(CliError::io(dir))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|e| e == "json")
                && !p.to_string_lossy().ends_with(".manifest.json")
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Usage(format!("{}: no message-set files", dir.display())));
    }
    let mut sets = Vec::with_capacity(paths.len());
    for path in paths {
        let (set, digest) = load_set_file(&path)?;
        manifest.inputs.push(digest);
        let name = path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
        sets.push((name, set));
    }
    Ok(sets)
}

pub(crate) fn bench(cli: &Cli, args: &BenchArgs) -> CliResult<()> {
    let mut manifest = RunManifest::new("bench");
    let opts = AnalysisOptions::with_epsilon(args.epsilon);
    manifest.param("options", opts).param("repeats", args.repeats);
    let mut groups = Vec::new();
    if let Some(dir) = &args.dir {
        manifest.param("dir", dir.display().to_string());
        let sets = sets_in_dir(dir, &mut manifest)?;
        let report = manifest.timed("bench", || bench_sets(&sets, &opts, args.repeats))?;
        groups.push(BenchGroup {
            utilization: None,
            report,
        });
    } else if let Some(text) = &args.utilization {
        let targets = sweep(text, args.step)?;
        manifest
            .param("utilizations", &targets)
            .param("n", args.n)
            .param("sets", args.sets)
            .param("seed", args.seed);
        for u in targets {
            let spec = GenSpec {
                n_messages: args.n,
                utilization: u,
                n_sets: args.sets,
                seed: args.seed,
                ..GenSpec::default()
            };
            let sets: Vec<(String, MessageSet)> = generate_sets(&spec)?
                .into_iter()
                .enumerate()
                .map(|(k, s)| (format!("u{u:.2}_set_{k:03}"), s))
                .collect();
            let report = manifest.timed(&format!("bench u={u:.2}"), || bench_sets(&sets, &opts, args.repeats))?;
            groups.push(BenchGroup {
                utilization: Some(u),
                report,
            });
        }
    } else {
        return Err(CliError::Usage("give --dir or --utilization".into()));
    }
    for g in &groups {
        let label = g.utilization.map_or_else(|| "dir".to_string(), |u| format!("U={u:.2}"));
        println!(
            "{label}: improved mean {:.3} ms max {:.3} ms, legacy mean {:.3} ms max {:.3} ms",
            g.report.improved.mean * 1e3,
            g.report.improved.max * 1e3,
            g.report.legacy.mean * 1e3,
            g.report.legacy.max * 1e3,
        );
    }
    manifest.write_json(&cli.out_dir, "bench.json", &groups)?;
    manifest.finish(&cli.out_dir, "bench")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweeps() {
        assert_eq!(sweep("0.5", 0.1).unwrap(), vec![0.5]);
        let values = sweep("0.1:0.9", 0.1).unwrap();
        assert_eq!(values.len(), 9);
        assert!((values[8] - 0.9).abs() < 1e-12);
        assert!(sweep("0.1:0.9", 0.0).is_err());
    }
}
