//! Seeded Monte Carlo checks of the stopping and reflection bounds.
//!
//! Trial `i` of an experiment with seed `s` always draws from stream
//! `(s, i)`, and outcomes are folded into integer counters, so results do
//! not depend on the size of the thread pool the experiment runs on.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{lemma52_part1_bound, Params};
use crate::error::{param_err, Result};
use crate::exact::{prob_max_ge_reflection, prob_sum_ge, ExactProb};
use crate::rng::SeedStreams;
use crate::stats::{McEstimate, Relation, Verdict, VerificationVerdict, DEFAULT_CONFIDENCE};
use crate::walk::{apply_stop, generate_walk, Direction, StopWindow, StoppingStrategy};

/// Trial budget and seeding for one experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub trials: u64,
    pub seed: u64,
    pub confidence: f64,
}

impl McConfig {
    pub fn new(trials: u64, seed: u64) -> Self {
        Self {
            trials,
            seed,
            confidence: DEFAULT_CONFIDENCE,
        }
    }

    pub fn estimate(&self, successes: u64) -> McEstimate {
        McEstimate::new(successes, self.trials, self.seed, self.confidence)
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return param_err("trials must be positive");
        }
        Ok(())
    }
}

/// Runs `trial` once per index in `0..trials` on its own substream and
/// counts, per slot, how many trials reported `true`.
pub fn tally<const K: usize, F>(seed: u64, trials: u64, trial: F) -> [u64; K]
where
    F: Fn(&mut ChaCha8Rng, u64) -> [bool; K] + Sync,
{
    let streams = SeedStreams::new(seed);
    (0..trials)
        .into_par_iter()
        .map(|i| trial(&mut streams.stream(i), i))
        .fold(
            || [0u64; K],
            |mut acc, hits| {
                for (a, h) in acc.iter_mut().zip(hits) {
                    *a += u64::from(h);
                }
                acc
            },
        )
        .reduce(
            || [0u64; K],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        )
}

/// Empirical `Pr(M_n >= r)` against the exact bound `2 Pr(S_n >= r)`.
pub fn verify_fact3_mc(n: u32, r: i64, mc: &McConfig) -> Result<VerificationVerdict> {
    Ok(fact3_row(n, r, mc)?.verdict)
}

/// One row of the reflection experiment: exact values beside the estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fact3Row {
    pub n: u32,
    pub r: i64,
    pub exact_max_ge: ExactProb,
    pub exact_max_ge_f64: f64,
    pub twice_sum_ge: ExactProb,
    /// Whether the reflection value lies in the estimate's interval.
    pub exact_in_ci: bool,
    pub verdict: VerificationVerdict,
}

pub fn fact3_row(n: u32, r: i64, mc: &McConfig) -> Result<Fact3Row> {
    mc.validate()?;
    if n < 1 || r < 1 {
        return param_err(format!("need n >= 1 and r >= 1, got n = {n}, r = {r}"));
    }
    let [hits] = tally(mc.seed, mc.trials, |rng, _| {
        let trace = generate_walk(n as usize, rng);
        [trace.run_max() >= r]
    });
    let exact = prob_max_ge_reflection(n, r)?;
    let bound = prob_sum_ge(n, r)?.times(2);
    let empirical = mc.estimate(hits);
    let exact_f64 = exact.to_f64();
    Ok(Fact3Row {
        n,
        r,
        exact_in_ci: empirical.contains(exact_f64),
        exact_max_ge_f64: exact_f64,
        exact_max_ge: exact,
        verdict: VerificationVerdict::new(
            format!("fact3/n={n}/r={r}"),
            empirical,
            Relation::Le,
            bound.to_f64(),
        ),
        twice_sum_ge: bound,
    })
}

/// Outcome of the stoppable short-stream experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Part1Outcome {
    /// Smallest integer deviation strictly above `beta/4`.
    pub threshold: i64,
    pub stream_len: u64,
    pub verdict: VerificationVerdict,
    pub up: McEstimate,
    pub down: McEstimate,
}

/// A stream of `nt` coins stopped by a first-hit adversary, against
/// `2 exp(-(beta/4)^2 / (2tn))`. Even trials target the up direction, odd
/// trials the down direction.
pub fn verify_lemma52_part1(params: &Params, mc: &McConfig) -> Result<Part1Outcome> {
    mc.validate()?;
    let d = params.derive()?;
    let bound = lemma52_part1_bound(params)?;
    let len = params.n * params.t;
    let threshold = d.beta_quarter.floor() as i64 + 1;
    let [hits, up_hits, down_hits] = if len == 0 {
        [0; 3]
    } else {
        let len = len as usize;
        tally(mc.seed, mc.trials, |rng, i| {
            let dir = if i % 2 == 0 {
                Direction::Up
            } else {
                Direction::Down
            };
            let trace = generate_walk(len, rng);
            let stopped = apply_stop(
                &trace,
                StoppingStrategy::FirstHit {
                    threshold,
                    direction: dir,
                    window: StopWindow::full(len),
                },
            )
            .expect("window covers the stream");
            let hit = dir.excess(stopped.value) as f64 > d.beta_quarter;
            [hit, hit && dir == Direction::Up, hit && dir == Direction::Down]
        })
    };
    let up_trials = mc.trials.div_ceil(2);
    let down_trials = mc.trials / 2;
    let sub = |hits: u64, trials: u64| McEstimate::new(hits, trials.max(1), mc.seed, mc.confidence);
    Ok(Part1Outcome {
        threshold,
        stream_len: len,
        verdict: VerificationVerdict::new(
            format!("lemma52-1/n={}/t={}", params.n, params.t),
            mc.estimate(hits),
            Relation::Le,
            bound,
        ),
        up: sub(up_hits, up_trials),
        down: sub(down_hits, down_trials),
    })
}

/// Per-direction measurements of the long-stream experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectionalPart2 {
    pub direction: Direction,
    /// Prefix of `n(n-2t)` coins deviates by at least `alpha`.
    pub p_first: McEstimate,
    /// The adversarially stopped tail moves at least `beta/4` the other way.
    pub p_adversary_max: McEstimate,
    /// The stopped stream deviates by at least `alpha'`.
    pub p_full: McEstimate,
    /// `p_full >= p_first - p_adversary_max` within interval widths.
    pub structural_check: bool,
    /// Every trial with the first event and without the adversary event
    /// also had the full event.
    pub pathwise_check: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Part2Report {
    pub n: u64,
    pub t: u64,
    pub prefix_len: u64,
    pub stream_len: u64,
    pub alpha: f64,
    pub beta_quarter: f64,
    pub alpha_prime: f64,
    pub up: DirectionalPart2,
    pub down: DirectionalPart2,
    /// Benchmark for `p_first` carried over from the uncorrected analysis;
    /// reported only.
    pub reference_first: f64,
    pub structural_check: bool,
}

/// A stream of `n(n-t)` coins whose last `nt` coins can be cut off by an
/// omniscient adversary working against the measured direction.
pub fn verify_lemma52_part2(params: &Params, mc: &McConfig) -> Result<Part2Report> {
    mc.validate()?;
    let d = params.derive()?;
    let prefix = (params.n * (params.n - 2 * params.t)) as usize;
    let len = (params.n * (params.n - params.t)) as usize;
    if prefix < 1 {
        return param_err("n(n-2t) must be at least 1");
    }
    let counts: [u64; 7] = tally(mc.seed, mc.trials, |rng, _| {
        let trace = generate_walk(len, rng);
        let sums = trace.prefix_sums();
        let mut out = [false; 7];
        for (slot, dir) in [Direction::Up, Direction::Down].into_iter().enumerate() {
            let first = dir.excess(sums[prefix]) as f64 >= d.alpha;
            let (stop, value) = trace.window_extreme(dir.opposite(), prefix, len);
            debug_assert!(stop >= prefix);
            let pushback = dir.opposite().excess(value - sums[prefix]) as f64 >= d.beta_quarter;
            let full = dir.excess(value) as f64 >= d.alpha_prime;
            out[slot * 3] = first;
            out[slot * 3 + 1] = pushback;
            out[slot * 3 + 2] = full;
            if first && !pushback && !full {
                out[6] = true;
            }
        }
        out
    });
    let side = |slot: usize, dir| {
        let p_first = mc.estimate(counts[slot * 3]);
        let p_adversary_max = mc.estimate(counts[slot * 3 + 1]);
        let p_full = mc.estimate(counts[slot * 3 + 2]);
        DirectionalPart2 {
            direction: dir,
            structural_check: p_full.ci_high >= p_first.ci_low - p_adversary_max.ci_high,
            pathwise_check: counts[6] == 0,
            p_first,
            p_adversary_max,
            p_full,
        }
    };
    let up = side(0, Direction::Up);
    let down = side(1, Direction::Down);
    Ok(Part2Report {
        n: params.n,
        t: params.t,
        prefix_len: prefix as u64,
        stream_len: len as u64,
        alpha: d.alpha,
        beta_quarter: d.beta_quarter,
        alpha_prime: d.alpha_prime,
        structural_check: up.structural_check && down.structural_check,
        up,
        down,
        reference_first: 0.211,
    })
}

/// Running maximum against twice the endpoint tail at one threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lemma71Row {
    pub label: String,
    pub threshold: f64,
    /// `Pr(max >= threshold)`
    pub x: McEstimate,
    /// `Pr(endpoint >= threshold)`
    pub y: McEstimate,
    /// Interval allowance added to `2 y`.
    pub slack: f64,
    pub verdict: Verdict,
}

impl Lemma71Row {
    fn new(label: String, threshold: f64, x: McEstimate, y: McEstimate) -> Self {
        let slack = x.half_width() + 2.0 * y.half_width();
        let verdict = if x.p_hat <= 2.0 * y.p_hat + slack {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        Self {
            label,
            threshold,
            x,
            y,
            slack,
            verdict,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lemma71Report {
    pub stream_len: u64,
    pub rows: Vec<Lemma71Row>,
}

impl Lemma71Report {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.verdict == Verdict::Pass)
    }
}

/// Total length of the incomplete streams, `round(c1 m n t)`.
pub fn lemma71_stream_len(params: &Params) -> u64 {
    (params.c1 * params.m as f64 * params.n as f64 * params.t as f64).round() as u64
}

/// Maximum reached by the `t` incomplete streams (modelled as one walk of
/// `c1 m n t` steps) against twice the endpoint tail, at the threshold
/// `(beta/6) c1 m` and at 0.5, 1 and 2 standard deviations of the walk.
pub fn verify_lemma71(params: &Params, mc: &McConfig) -> Result<Lemma71Report> {
    let d = params.derive()?;
    let len = lemma71_stream_len(params);
    if len < 1 {
        return param_err(format!("c1 m n t rounds to {len}; need at least one coin"));
    }
    let sigma = (len as f64).sqrt();
    let thresholds = vec![
        ("beta/6*c1*m".to_owned(), d.beta / 6.0 * params.c1 * params.m as f64),
        ("0.5sigma".to_owned(), 0.5 * sigma),
        ("1sigma".to_owned(), sigma),
        ("2sigma".to_owned(), 2.0 * sigma),
    ];
    lemma71_at(len, &thresholds, mc)
}

/// Max-versus-endpoint comparison at arbitrary thresholds.
pub fn lemma71_at(len: u64, thresholds: &[(String, f64)], mc: &McConfig) -> Result<Lemma71Report> {
    mc.validate()?;
    if len < 1 {
        return param_err("stream length must be at least 1");
    }
    const MAX_THRESHOLDS: usize = 8;
    if thresholds.len() > MAX_THRESHOLDS {
        return param_err(format!("at most {MAX_THRESHOLDS} thresholds per run"));
    }
    let levels: Vec<f64> = thresholds.iter().map(|(_, v)| *v).collect();
    let counts: [u64; 2 * MAX_THRESHOLDS] = tally(mc.seed, mc.trials, |rng, _| {
        let trace = generate_walk(len as usize, rng);
        let (max, end) = (trace.run_max() as f64, trace.endpoint() as f64);
        let mut out = [false; 2 * MAX_THRESHOLDS];
        for (k, &thr) in levels.iter().enumerate() {
            out[2 * k] = max >= thr;
            out[2 * k + 1] = end >= thr;
        }
        out
    });
    let rows = thresholds
        .iter()
        .enumerate()
        .map(|(k, (label, thr))| {
            Lemma71Row::new(
                label.clone(),
                *thr,
                mc.estimate(counts[2 * k]),
                mc.estimate(counts[2 * k + 1]),
            )
        })
        .collect();
    Ok(Lemma71Report {
        stream_len: len,
        rows,
    })
}

/// Exact small case: `(Pr(M_len >= r), 2 Pr(S_len >= r))`.
pub fn lemma71_exact(len: u32, r: i64) -> Result<(ExactProb, ExactProb)> {
    Ok((prob_max_ge_reflection(len, r)?, prob_sum_ge(len, r)?.times(2)))
}
