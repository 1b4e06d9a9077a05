use super::busy_window::{absorb, backlog, busy_window_with, horizon_error, Step};
use super::{AnalysisOptions, ArrivalBoundary, FrameAnalysis, InstanceResponse, ReleaseQueue};
use crate::error::Result;
use crate::exceedance::Method;
use crate::model::{retrans_pmf, Frame, MessageSet};
use crate::pmf::{BitTime, Pmf};

/// Queuing delay of the instance of frame `i` released at `release`, given
/// its backlog. Returns the PMF and the number of convolutions spent.
pub fn queuing_delay(
    set: &MessageSet,
    i: usize,
    release: BitTime,
    backlog: &Pmf,
    opts: &AnalysisOptions,
) -> Result<Pmf> {
    let pmfs = set.transmission_pmfs()?;
    let retrans = retrans_pmf(set.frame(i), &set.error_model)?;
    queuing_delay_with(set, i, release, backlog, opts, &pmfs, &retrans, ArrivalBoundary::Strict)
        .map(|(s, _)| s)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn queuing_delay_with(
    set: &MessageSet,
    i: usize,
    release: BitTime,
    backlog: &Pmf,
    opts: &AnalysisOptions,
    pmfs: &[Pmf],
    retrans: &Pmf,
    arrivals: ArrivalBoundary,
) -> Result<(Pmf, usize)> {
    opts.validate()?;
    let mut delay = backlog.convolve(retrans);
    let mut convolutions = 1;
    for hp in ReleaseQueue::new(set.frames(), i, release) {
        let offset = hp.release - release;
        if offset > opts.horizon {
            return Err(horizon_error(opts.horizon));
        }
        match absorb(&delay, offset, arrivals.at(offset), &pmfs[hp.frame], opts.epsilon)? {
            Step::Stop { .. } => break,
            Step::Absorbed(next) => {
                delay = next;
                convolutions += 1;
            }
        }
    }
    Ok((delay, convolutions))
}

/// The final attempt takes exactly `C`.
pub fn response_pmf(queuing: &Pmf, frame: &Frame) -> Pmf {
    queuing
        .shift(frame.transmission as i64)
        .expect("positive shift cannot underflow")
}

/// Response-time distributions of every instance of frame `i` released in
/// its busy window, and their exceedance envelope.
pub fn analyze_frame(set: &MessageSet, i: usize, opts: &AnalysisOptions) -> Result<FrameAnalysis> {
    let pmfs = set.transmission_pmfs()?;
    let seq = busy_window_with(set, i, opts, &pmfs)?;
    let frame = set.frame(i);
    let retrans = retrans_pmf(frame, &set.error_model)?;
    let mut convolutions = seq.convolutions;
    let mut instances = Vec::new();
    for ordinal in 0.. {
        let release = ordinal * frame.period;
        if release > seq.stop_time {
            break;
        }
        let backlog = backlog(&seq, release)?;
        let (queuing, spent) = queuing_delay_with(
            set,
            i,
            release,
            &backlog,
            opts,
            &pmfs,
            &retrans,
            ArrivalBoundary::Strict,
        )?;
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
        Method::Improved,
        opts,
        seq.blocking,
        (seq.stop_time, seq.stop_tail),
        instances,
        convolutions,
    ))
}
