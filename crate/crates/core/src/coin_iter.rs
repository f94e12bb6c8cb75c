//! One iteration of a summed-coinflip global coin, with the three sources
//! of bad deviation, and a toy agreement loop built on it.
//!
//! This is a desk-scale model of the good-event mechanism, not a protocol:
//! there is no message passing and no detection of bad processors.
//!
//! Processor `j` in iteration `i` flips coins from substream `(i, j)` of the
//! configured seed. Good processors are laid out as
//! `[core | excluded | stopped]`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{DerivedThresholds, Params};
use crate::error::{param_err, Result};
use crate::rng::SeedStreams;
use crate::stats::{McEstimate, DEFAULT_CONFIDENCE};
use crate::walk::{apply_stop, generate_walk, Direction, StopWindow, StoppingStrategy, WalkTrace};

/// Adversary behaviours that leave the core processors untouched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdversaryKnobs {
    /// Stop the stopped streams at their extreme against the good
    /// direction. When off they run to completion.
    pub stop_streams: bool,
    /// Push the ambiguous-coin term to `-t` against the good direction.
    pub ambiguous: bool,
    /// Add the bad processors' own coins as `t n` against the good
    /// direction. Off by default.
    pub bad_coins: bool,
}

impl Default for AdversaryKnobs {
    fn default() -> Self {
        Self {
            stop_streams: true,
            ambiguous: true,
            bad_coins: false,
        }
    }
}

impl AdversaryKnobs {
    pub fn passive() -> Self {
        Self {
            stop_streams: false,
            ambiguous: false,
            bad_coins: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationConfig {
    pub n: u64,
    pub t: u64,
    /// Good processors wrongly excluded from the sum.
    pub t_excluded: u64,
    /// Good streams the adversary stops early.
    pub t_stopped: u64,
    /// Direction in which the coin must land for agreement; the adversary
    /// pushes the other way.
    pub good_direction: Direction,
    pub knobs: AdversaryKnobs,
    pub seed: u64,
}

impl IterationConfig {
    /// Every adversarial source at full strength: `t` excluded and `t`
    /// stopped streams.
    pub fn new(n: u64, t: u64, seed: u64) -> Self {
        Self {
            n,
            t,
            t_excluded: t,
            t_stopped: t,
            good_direction: Direction::Up,
            knobs: AdversaryKnobs::default(),
            seed,
        }
    }

    /// Number of complete good streams.
    pub fn core_count(&self) -> u64 {
        self.n - self.t - self.t_excluded - self.t_stopped
    }

    /// The thresholds this configuration is judged against.
    pub fn thresholds(&self) -> Result<DerivedThresholds> {
        Params::new(self.n, self.t).derive()
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_excluded > self.t || self.t_stopped > self.t {
            return param_err(format!(
                "t_excluded = {} and t_stopped = {} must not exceed t = {}",
                self.t_excluded, self.t_stopped, self.t
            ));
        }
        if self.n < self.t + self.t_excluded + self.t_stopped + 1 {
            return param_err("need at least one complete good stream");
        }
        Params::new(self.n, self.t).validate()
    }
}

/// Components of one iteration's coin sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: u64,
    pub core_sum: i64,
    /// Excluded streams' sum, clamped to `[-floor(beta/4), floor(beta/4)]`.
    pub excluded_sum: i64,
    /// Excluded streams' sum before clamping.
    pub excluded_raw: i64,
    pub excluded_cap_binding: bool,
    pub stopped_sum: i64,
    pub ambiguous_term: i64,
    pub bad_term: i64,
    pub total: i64,
    /// Sign of `total`; zero counts as up.
    pub coin: Direction,
    pub tie: bool,
    /// Core deviation reaches `alpha'` in the good direction.
    pub good_event: bool,
}

/// The streams an iteration was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationStreams {
    pub core: Vec<WalkTrace>,
    pub excluded: Vec<WalkTrace>,
    pub stopped: Vec<WalkTrace>,
    pub stop_indices: Vec<usize>,
}

/// Runs iteration `iteration` of `config`.
pub fn run_iteration(config: &IterationConfig, iteration: u64) -> Result<IterationRecord> {
    run_iteration_traced(config, iteration).map(|(rec, _)| rec)
}

/// Like [`run_iteration`], also returning the raw streams.
pub fn run_iteration_traced(
    config: &IterationConfig,
    iteration: u64,
) -> Result<(IterationRecord, IterationStreams)> {
    config.validate()?;
    let d = config.thresholds()?;
    Ok(iterate(config, &d, iteration))
}

fn iterate(
    config: &IterationConfig,
    d: &DerivedThresholds,
    iteration: u64,
) -> (IterationRecord, IterationStreams) {
    let n = config.n as usize;
    let streams = SeedStreams::new(config.seed).child(iteration);
    let core_count = config.core_count();
    let walk = |j: u64| generate_walk(n, &mut streams.stream(j));

    let core: Vec<WalkTrace> = (0..core_count).map(walk).collect();
    let excluded: Vec<WalkTrace> = (core_count..core_count + config.t_excluded)
        .map(walk)
        .collect();
    let stopped: Vec<WalkTrace> = (core_count + config.t_excluded
        ..core_count + config.t_excluded + config.t_stopped)
        .map(walk)
        .collect();

    let good = config.good_direction;
    let against = good.opposite();
    let strategy = if config.knobs.stop_streams {
        StoppingStrategy::OmniscientExtreme {
            direction: against,
            window: StopWindow::full(n),
        }
    } else {
        StoppingStrategy::NoStop
    };
    let stop_indices: Vec<usize> = stopped
        .iter()
        .map(|w| {
            apply_stop(w, strategy)
                .expect("full window is valid")
                .stop_index
        })
        .collect();

    let core_sum: i64 = core.iter().map(WalkTrace::endpoint).sum();
    let excluded_raw: i64 = excluded.iter().map(WalkTrace::endpoint).sum();
    let cap = d.beta_quarter.floor() as i64;
    let excluded_sum = excluded_raw.clamp(-cap, cap);
    let stopped_sum: i64 = stopped
        .iter()
        .zip(&stop_indices)
        .map(|(w, &k)| w.prefix_sums()[k])
        .sum();
    let t = config.t as i64;
    let ambiguous_term = if config.knobs.ambiguous {
        against.sign() * t
    } else {
        0
    };
    let bad_term = if config.knobs.bad_coins {
        against.sign() * t * config.n as i64
    } else {
        0
    };
    let total = core_sum + excluded_sum + stopped_sum + ambiguous_term + bad_term;
    let record = IterationRecord {
        iteration,
        core_sum,
        excluded_sum,
        excluded_raw,
        excluded_cap_binding: excluded_sum != excluded_raw,
        stopped_sum,
        ambiguous_term,
        bad_term,
        total,
        coin: if total >= 0 {
            Direction::Up
        } else {
            Direction::Down
        },
        tie: total == 0,
        good_event: good.excess(core_sum) as f64 >= d.alpha_prime,
    };
    (
        record,
        IterationStreams {
            core,
            excluded,
            stopped,
            stop_indices,
        },
    )
}

/// Frequency of the good event over iterations `0..iterations`.
pub fn good_event_frequency(config: &IterationConfig, iterations: u64) -> Result<McEstimate> {
    if iterations == 0 {
        return param_err("iterations must be positive");
    }
    config.validate()?;
    let d = config.thresholds()?;
    let hits = (0..iterations)
        .into_par_iter()
        .filter(|&i| iterate(config, &d, i).0.good_event)
        .count() as u64;
    Ok(McEstimate::new(
        hits,
        iterations,
        config.seed,
        DEFAULT_CONFIDENCE,
    ))
}

/// Whether an iteration ends the agreement loop: the coin lands in the good
/// direction with magnitude at least `alpha'`.
pub fn decides(record: &IterationRecord, good: Direction, alpha_prime: f64) -> bool {
    record.coin == good && record.total.unsigned_abs() as f64 >= alpha_prime
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementOutcome {
    pub agreed: bool,
    pub iterations_used: u64,
    pub records: Vec<IterationRecord>,
}

/// Iterates until an iteration decides or `max_iterations` have run.
pub fn run_agreement(config: &IterationConfig, max_iterations: u64) -> Result<AgreementOutcome> {
    if max_iterations == 0 {
        return param_err("max_iterations must be at least 1");
    }
    config.validate()?;
    let d = config.thresholds()?;
    let mut records = Vec::new();
    for i in 0..max_iterations {
        let (rec, _) = iterate(config, &d, i);
        records.push(rec);
        if decides(&rec, config.good_direction, d.alpha_prime) {
            return Ok(AgreementOutcome {
                agreed: true,
                iterations_used: i + 1,
                records,
            });
        }
    }
    Ok(AgreementOutcome {
        agreed: false,
        iterations_used: max_iterations,
        records,
    })
}

/// Summary of many independent agreement runs (run `k` uses seed
/// `base_seed + k`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgreementSummary {
    pub runs: u64,
    pub agreed: u64,
    pub total_iterations: u64,
    pub max_iterations: u64,
    /// `agreed / total_iterations`, the geometric estimate of the
    /// per-iteration success probability.
    pub per_iteration_rate: f64,
}

pub fn agreement_summary(
    config: &IterationConfig,
    runs: u64,
    max_iterations: u64,
) -> Result<AgreementSummary> {
    if runs == 0 {
        return param_err("runs must be positive");
    }
    let outcomes: Vec<(bool, u64)> = (0..runs)
        .into_par_iter()
        .map(|k| {
            let cfg = IterationConfig {
                seed: config.seed.wrapping_add(k),
                ..*config
            };
            run_agreement(&cfg, max_iterations).map(|o| (o.agreed, o.iterations_used))
        })
        .collect::<Result<_>>()?;
    let agreed = outcomes.iter().filter(|o| o.0).count() as u64;
    let total_iterations = outcomes.iter().map(|o| o.1).sum();
    Ok(AgreementSummary {
        runs,
        agreed,
        total_iterations,
        max_iterations,
        per_iteration_rate: agreed as f64 / total_iterations as f64,
    })
}
