use super::busy_window::{absorb, backlog_from_window, horizon_error, Step};
use super::response::{queuing_delay_with, response_pmf};
use super::{AnalysisOptions, ArrivalBoundary, FrameAnalysis, InstanceRelease, InstanceResponse, ReleaseQueue};
use crate::error::Result;
use crate::exceedance::Method;
use crate::model::{blocking_time, retrans_pmf, MessageSet};
use crate::pmf::{BitTime, Pmf};

const ARRIVALS: ArrivalBoundary = ArrivalBoundary::Inclusive;

/// Window state just before `until`, rebuilt from the critical instant by
/// replaying every release in `history` that happened before it.
fn replay(
    blocking: BitTime,
    history: &[InstanceRelease],
    until: BitTime,
    pmfs: &[Pmf],
    convolutions: &mut usize,
) -> Result<Pmf> {
    let mut window = Pmf::point(blocking, 1.0)?;
    for r in history.iter().take_while(|r| r.release < until) {
        let (stable, pending) = window.split(r.release, ARRIVALS.at(r.release));
        window = stable.coalesce(&pending.convolve(&pmfs[r.frame]))?;
        *convolutions += 1;
    }
    Ok(window)
}

/// Baseline analysis: releases coinciding with the end of a busy period join
/// it, and every window state is recomputed from the critical instant.
pub fn legacy_pwcrt(set: &MessageSet, i: usize, opts: &AnalysisOptions) -> Result<FrameAnalysis> {
    set.check_index(i)?;
    opts.validate()?;
    let pmfs = set.transmission_pmfs()?;
    let blocking = blocking_time(set, i, opts.blocking);
    let mut convolutions = 0;

    let mut history: Vec<InstanceRelease> = Vec::new();
    let mut queue = ReleaseQueue::new(set.frames(), i + 1, 0).peekable();
    let (stop_time, stop_tail) = 'walk: loop {
        let t = queue.peek().expect("periodic releases never run out").release;
        if t > opts.horizon {
            return Err(horizon_error(opts.horizon));
        }
        let mut window = replay(blocking, &history, t, &pmfs, &mut convolutions)?;
        while let Some(r) = queue.next_if(|r| r.release == t) {
            match absorb(&window, t, ARRIVALS.at(t), &pmfs[r.frame], opts.epsilon)? {
                Step::Stop { pending_mass } => break 'walk (t, pending_mass),
                Step::Absorbed(w) => {
                    window = w;
                    convolutions += 1;
                    history.push(r);
                }
            }
        }
    };

    let frame = set.frame(i);
    let retrans = retrans_pmf(frame, &set.error_model)?;
    let mut instances = Vec::new();
    for ordinal in 0.. {
        let release = ordinal * frame.period;
        if release > stop_time {
            break;
        }
        let window = replay(blocking, &history, release, &pmfs, &mut convolutions)?;
        let backlog = backlog_from_window(&window, release)?;
        let (queuing, spent) =
            queuing_delay_with(set, i, release, &backlog, opts, &pmfs, &retrans, ARRIVALS)?;
        convolutions += spent;
        let response = response_pmf(&queuing, frame);
        instances.push(InstanceResponse {
            ordinal,
            release,
            backlog,
            queuing,
            response,
        });
    }
    Ok(FrameAnalysis::assemble(
        set,
        i,
        Method::Legacy,
        opts,
        blocking,
        (stop_time, stop_tail),
        instances,
        convolutions,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::analyze_frame;
    use crate::datasets;

    #[test]
    fn worked_example_dominates_improved() {
        let set = datasets::example3();
        let opts = AnalysisOptions::with_epsilon(datasets::EXAMPLE3_EPSILON);
        let legacy = legacy_pwcrt(&set, 1, &opts).unwrap();
        let improved = analyze_frame(&set, 1, &opts).unwrap();
        for t in 0..40 {
            assert!(legacy.curve.eval(t) + 1e-15 >= improved.curve.eval(t), "t = {t}");
        }
        assert!(legacy.convolutions > improved.convolutions);
    }

    #[test]
    fn highest_priority_frame() {
        let set = datasets::example3();
        let opts = AnalysisOptions::with_epsilon(1e-9);
        let legacy = legacy_pwcrt(&set, 0, &opts).unwrap();
        assert!(!legacy.instances.is_empty());
        assert!((legacy.instances[0].response.total_with_residual() - 1.0).abs() < 1e-12);
    }
}
