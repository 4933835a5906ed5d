//! Wall-clock instrumentation of the enumeration engine.
//!
//! Preprocessing is the time to build the stream (reduction, indexes);
//! the delay of an answer is the time of the pull that produced it. Every
//! answer gets a delay entry; the first pull is treated as warm-up and left
//! out of the summary statistics.

use std::time::Instant;

use cqfd_core::enumerate::{enumerate_free_connex, enumerate_with_dedup, AnswerStream};
use cqfd_core::instance::{Instance, Symbols};
use cqfd_core::transform::Answer;
use cqfd_core::{Query, Schema};
use serde_json::json;

use crate::corpus::{random_instance, rng};

#[derive(Clone, Debug, Default)]
pub struct TimedRun {
    pub preprocess_nanos: u64,
    /// One entry per answer, in output order.
    pub delays: Vec<u64>,
    pub answers: usize,
    /// Repeated answers dropped by the deduplicating engine.
    pub suppressed: usize,
}

impl TimedRun {
    fn steady(&self) -> Vec<u64> {
        let mut d: Vec<u64> = self.delays.iter().skip(1).copied().collect();
        d.sort_unstable();
        d
    }

    /// Median delay without the warm-up pull (0 with fewer than two answers).
    pub fn median_delay(&self) -> u64 {
        let d = self.steady();
        if d.is_empty() {
            0
        } else {
            d[d.len() / 2]
        }
    }

    /// Largest delay without the warm-up pull.
    pub fn max_delay(&self) -> u64 {
        self.steady().last().copied().unwrap_or(0)
    }

    pub fn to_json(&self, engine: &str) -> serde_json::Value {
        json!({
            "engine": engine,
            "preprocess_nanos": self.preprocess_nanos,
            "answers": self.answers,
            "suppressed": self.suppressed,
            "median_delay_nanos": self.median_delay(),
            "max_delay_nanos": self.max_delay(),
        })
    }
}

/// Opens the constant-delay stream (deduplicating when `s` has
/// cardinality bounds).
pub fn open_stream(q: &Query, s: &Schema, i: &Instance) -> cqfd_core::Result<AnswerStream> {
    if s.all_fds() {
        enumerate_free_connex(q, s, i)
    } else {
        enumerate_with_dedup(q, s, i)
    }
}

/// Runs the engine, timing preprocessing and every pull, and hands each
/// answer to `sink`. Stops after `limit` answers if given.
pub fn time_enumeration(
    q: &Query,
    s: &Schema,
    i: &Instance,
    limit: Option<usize>,
    mut sink: impl FnMut(&Answer, &Symbols),
) -> cqfd_core::Result<TimedRun> {
    let start = Instant::now();
    let mut stream = open_stream(q, s, i)?;
    let mut run = TimedRun { preprocess_nanos: start.elapsed().as_nanos() as u64, ..Default::default() };
    while limit.is_none_or(|l| run.answers < l) {
        let t = Instant::now();
        let next = stream.next();
        let d = t.elapsed().as_nanos() as u64;
        let Some(a) = next else { break };
        run.delays.push(d);
        run.answers += 1;
        sink(&a, stream.plan().symbols());
    }
    run.suppressed = stream.suppressed();
    Ok(run)
}

#[derive(Clone, Debug)]
pub struct ProfilePoint {
    /// Requested size.
    pub n: usize,
    /// Tuples actually generated.
    pub tuples: usize,
    pub answers: usize,
    pub preprocess_nanos: u64,
    pub median_delay_nanos: u64,
    pub max_delay_nanos: u64,
}

#[derive(Clone, Debug)]
pub struct DelayProfile {
    pub points: Vec<ProfilePoint>,
    /// Least-squares slope of log(preprocessing) against log(tuples).
    pub preprocess_slope: f64,
    /// Least-squares slope of log(median delay) against log(tuples).
    pub median_delay_slope: f64,
}

impl DelayProfile {
    /// Ratios of median delays between consecutive sizes.
    pub fn median_delay_ratios(&self) -> Vec<f64> {
        self.points
            .windows(2)
            .map(|w| w[1].median_delay_nanos.max(1) as f64 / w[0].median_delay_nanos.max(1) as f64)
            .collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let points: Vec<serde_json::Value> = self
            .points
            .iter()
            .map(|p| {
                json!({
                    "n": p.n,
                    "tuples": p.tuples,
                    "answers": p.answers,
                    "preprocess_nanos": p.preprocess_nanos,
                    "median_delay_nanos": p.median_delay_nanos,
                    "max_delay_nanos": p.max_delay_nanos,
                    "log_tuples": ln(p.tuples as u64),
                    "log_preprocess": ln(p.preprocess_nanos),
                    "log_median_delay": ln(p.median_delay_nanos),
                })
            })
            .collect();
        json!({
            "points": points,
            "preprocess_slope": self.preprocess_slope,
            "median_delay_slope": self.median_delay_slope,
            "median_delay_ratios": self.median_delay_ratios(),
        })
    }
}

fn ln(x: u64) -> f64 {
    (x.max(1) as f64).ln()
}

/// Least-squares slope of `ys` against `xs` (0 with fewer than two
/// distinct x values).
pub fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return 0.0;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// For each size `n`, generates a seeded instance of about `n` tuples
/// satisfying `s` (values drawn from `n/2` constants), runs the engine
/// `repeats` times and records the fastest preprocessing and the median of
/// the per-run median delays.
pub fn measure_delay_profile(
    q: &Query,
    s: &Schema,
    sizes: &[usize],
    seed: u64,
    repeats: usize,
) -> cqfd_core::Result<DelayProfile> {
    let n_rel = s.relations().len().max(1);
    let mut points = Vec::new();
    for &n in sizes {
        let mut r = rng(seed ^ (n as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let per = n / n_rel;
        let inst = random_instance(&mut r, q, s, (n / 2).max(2), per..=per);
        let mut best_pre = u64::MAX;
        let mut medians = Vec::new();
        let mut max_delay = 0;
        let mut answers = 0;
        for _ in 0..repeats.max(1) {
            let run = time_enumeration(q, s, &inst, None, |_, _| {})?;
            best_pre = best_pre.min(run.preprocess_nanos);
            medians.push(run.median_delay());
            max_delay = max_delay.max(run.max_delay());
            answers = run.answers;
        }
        medians.sort_unstable();
        log::info!("profile n={n}: {} tuples, {answers} answers", inst.total_tuples());
        points.push(ProfilePoint {
            n,
            tuples: inst.total_tuples(),
            answers,
            preprocess_nanos: best_pre,
            median_delay_nanos: medians[medians.len() / 2],
            max_delay_nanos: max_delay,
        });
    }
    let xs: Vec<f64> = points.iter().map(|p| ln(p.tuples as u64)).collect();
    let pre: Vec<f64> = points.iter().map(|p| ln(p.preprocess_nanos)).collect();
    let med: Vec<f64> = points.iter().map(|p| ln(p.median_delay_nanos)).collect();
    Ok(DelayProfile { preprocess_slope: slope(&xs, &pre), median_delay_slope: slope(&xs, &med), points })
}
