//! Symmetric ±1 walks and adversarial stopping rules.

use std::fmt;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{param_err, Result};
use crate::rng::CoinFlips;

/// Longest stream the engine will generate.
pub const MAX_STREAM_LEN: usize = 1 << 31;

/// Direction of a deviation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "+")]
    Up,
    #[serde(rename = "-")]
    Down,
}

impl Direction {
    pub fn sign(self) -> i64 {
        match self {
            Direction::Up => 1,
            Direction::Down => -1,
        }
    }

    pub fn opposite(self) -> Direction {
        match self {
            Direction::Up => Direction::Down,
            Direction::Down => Direction::Up,
        }
    }

    /// Signed excess of `value` in this direction.
    pub fn excess(self, value: i64) -> i64 {
        self.sign() * value
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Up => "+",
            Direction::Down => "-",
        })
    }
}

impl std::str::FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "+" | "up" | "plus" => Ok(Direction::Up),
            "-" | "down" | "minus" => Ok(Direction::Down),
            other => Err(format!("unknown direction `{other}`")),
        }
    }
}

/// A realized ±1 walk with its prefix sums and running extrema.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalkTrace {
    steps: Vec<i8>,
    prefix_sums: Vec<i64>,
    run_max: i64,
    run_min: i64,
    argmax: usize,
    argmin: usize,
}

impl WalkTrace {
    /// Builds a trace from explicit steps. Every step must be ±1.
    pub fn from_steps(steps: Vec<i8>) -> Result<Self> {
        if steps.len() > MAX_STREAM_LEN {
            return param_err(format!("stream length {} exceeds 2^31", steps.len()));
        }
        if let Some(bad) = steps.iter().find(|&&s| s != 1 && s != -1) {
            return param_err(format!("step {bad} is not ±1"));
        }
        let mut prefix_sums = Vec::with_capacity(steps.len() + 1);
        prefix_sums.push(0i64);
        let (mut run_max, mut run_min, mut argmax, mut argmin) = (0i64, 0i64, 0usize, 0usize);
        let mut acc = 0i64;
        for (k, &s) in steps.iter().enumerate() {
            acc += i64::from(s);
            prefix_sums.push(acc);
            if acc > run_max {
                run_max = acc;
                argmax = k + 1;
            }
            if acc < run_min {
                run_min = acc;
                argmin = k + 1;
            }
        }
        Ok(Self {
            steps,
            prefix_sums,
            run_max,
            run_min,
            argmax,
            argmin,
        })
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn steps(&self) -> &[i8] {
        &self.steps
    }

    /// `prefix_sums()[k]` is the sum of the first `k` steps.
    pub fn prefix_sums(&self) -> &[i64] {
        &self.prefix_sums
    }

    pub fn endpoint(&self) -> i64 {
        *self.prefix_sums.last().expect("prefix_sums is never empty")
    }

    /// Maximum over all prefix sums, including the empty prefix.
    pub fn run_max(&self) -> i64 {
        self.run_max
    }

    pub fn run_min(&self) -> i64 {
        self.run_min
    }

    /// Smallest index attaining `run_max`.
    pub fn argmax(&self) -> usize {
        self.argmax
    }

    pub fn argmin(&self) -> usize {
        self.argmin
    }

    /// Running extreme in `dir`: `run_max` for up, `run_min` for down.
    pub fn run_extreme(&self, dir: Direction) -> i64 {
        match dir {
            Direction::Up => self.run_max,
            Direction::Down => self.run_min,
        }
    }

    /// Extreme of the prefix sums over indices `lo..=hi` in `dir`, with the
    /// smallest index attaining it.
    pub fn window_extreme(&self, dir: Direction, lo: usize, hi: usize) -> (usize, i64) {
        let mut best = (lo, self.prefix_sums[lo]);
        for (k, &v) in self.prefix_sums[lo..=hi].iter().enumerate().skip(1) {
            if dir.excess(v) > dir.excess(best.1) {
                best = (lo + k, v);
            }
        }
        best
    }
}

/// Generates a walk of `length` fair ±1 steps from `rng`.
pub fn generate_walk<R: RngCore>(length: usize, rng: &mut R) -> WalkTrace {
    assert!(length <= MAX_STREAM_LEN, "stream length exceeds 2^31");
    let steps: Vec<i8> = CoinFlips::new(rng).take(length).collect();
    WalkTrace::from_steps(steps).expect("generated steps are ±1")
}

/// Inclusive range of admissible stopping indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StopWindow {
    pub lo: usize,
    pub hi: usize,
}

impl StopWindow {
    pub fn new(lo: usize, hi: usize) -> Self {
        Self { lo, hi }
    }

    /// The full window `[1, len]`.
    pub fn full(len: usize) -> Self {
        Self { lo: 1, hi: len }
    }

    fn validate(&self, len: usize) -> Result<()> {
        if self.lo < 1 || self.lo > self.hi || self.hi > len {
            return param_err(format!(
                "stop window [{}, {}] invalid for stream of length {len}",
                self.lo, self.hi
            ));
        }
        Ok(())
    }
}

/// An adversary's rule for where to truncate a coinflip stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StoppingStrategy {
    NoStop,
    FixedLength {
        k: usize,
    },
    /// Stop at the first index in the window whose prefix sum reaches the
    /// threshold in `direction`; at the window's end if it never does.
    FirstHit {
        threshold: i64,
        direction: Direction,
        window: StopWindow,
    },
    /// Stop where the prefix sum is most extreme in `direction` over the
    /// window, with full knowledge of the stream.
    OmniscientExtreme {
        direction: Direction,
        window: StopWindow,
    },
}

impl StoppingStrategy {
    pub fn validate(&self, len: usize) -> Result<()> {
        match *self {
            StoppingStrategy::NoStop => Ok(()),
            StoppingStrategy::FixedLength { k } => {
                if k > len {
                    return param_err(format!("fixed length {k} exceeds stream length {len}"));
                }
                Ok(())
            }
            StoppingStrategy::FirstHit {
                threshold, window, ..
            } => {
                if threshold < 1 {
                    return param_err(format!("first-hit threshold {threshold} must be >= 1"));
                }
                window.validate(len)
            }
            StoppingStrategy::OmniscientExtreme { window, .. } => window.validate(len),
        }
    }

    /// The same rule with its window replaced by `[1, len]`.
    pub fn with_full_window(self, len: usize) -> Self {
        match self {
            StoppingStrategy::FirstHit {
                threshold,
                direction,
                ..
            } => StoppingStrategy::FirstHit {
                threshold,
                direction,
                window: StopWindow::full(len),
            },
            StoppingStrategy::OmniscientExtreme { direction, .. } => {
                StoppingStrategy::OmniscientExtreme {
                    direction,
                    window: StopWindow::full(len),
                }
            }
            other => other,
        }
    }
}

/// Where a stream was stopped and the sum it showed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoppedStream {
    pub stop_index: usize,
    pub value: i64,
    pub strategy_used: StoppingStrategy,
}

/// Applies `strategy` to `trace`.
pub fn apply_stop(trace: &WalkTrace, strategy: StoppingStrategy) -> Result<StoppedStream> {
    strategy.validate(trace.len())?;
    let stop_index = match strategy {
        StoppingStrategy::NoStop => trace.len(),
        StoppingStrategy::FixedLength { k } => k,
        StoppingStrategy::FirstHit {
            threshold,
            direction,
            window,
        } => trace.prefix_sums()[window.lo..=window.hi]
            .iter()
            .position(|&v| direction.excess(v) >= threshold)
            .map_or(window.hi, |p| window.lo + p),
        StoppingStrategy::OmniscientExtreme { direction, window } => {
            trace.window_extreme(direction, window.lo, window.hi).0
        }
    };
    Ok(StoppedStream {
        stop_index,
        value: trace.prefix_sums()[stop_index],
        strategy_used: strategy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use proptest::prelude::*;

    fn trace(steps: &[i8]) -> WalkTrace {
        WalkTrace::from_steps(steps.to_vec()).unwrap()
    }

    #[test]
    fn empty_walk() {
        let t = generate_walk(0, &mut substream(0, 0));
        assert_eq!(t.prefix_sums(), &[0]);
        assert_eq!((t.run_max(), t.run_min()), (0, 0));
    }

    #[test]
    fn single_step() {
        for seed in 0..16 {
            let t = generate_walk(1, &mut substream(seed, 0));
            match t.steps() {
                [1] => assert_eq!(t.run_max(), 1),
                [-1] => assert_eq!(t.run_max(), 0),
                s => panic!("unexpected steps {s:?}"),
            }
        }
    }

    #[test]
    fn long_walk_extrema_match_recomputation() {
        let t = generate_walk(1_000_000, &mut substream(2024, 0));
        let mut acc = 0i64;
        let mut sums = vec![0i64];
        for &s in t.steps() {
            acc += i64::from(s);
            sums.push(acc);
        }
        assert_eq!(sums, t.prefix_sums());
        assert_eq!(t.run_max(), *sums.iter().max().unwrap());
        assert_eq!(t.run_min(), *sums.iter().min().unwrap());
        assert_eq!(t.argmax(), sums.iter().position(|&v| v == t.run_max()).unwrap());
    }

    #[test]
    fn first_hit_example() {
        let t = trace(&[1, 1, -1]);
        let s = apply_stop(
            &t,
            StoppingStrategy::FirstHit {
                threshold: 2,
                direction: Direction::Up,
                window: StopWindow::new(1, 3),
            },
        )
        .unwrap();
        assert_eq!((s.stop_index, s.value), (2, 2));
    }

    #[test]
    fn first_hit_never_hits_stops_at_window_end() {
        let t = trace(&[1, -1, -1, 1]);
        let s = apply_stop(
            &t,
            StoppingStrategy::FirstHit {
                threshold: 2,
                direction: Direction::Up,
                window: StopWindow::new(1, 3),
            },
        )
        .unwrap();
        assert_eq!((s.stop_index, s.value), (3, -1));
    }

    #[test]
    fn omniscient_example() {
        let t = trace(&[1, -1, -1]);
        let s = apply_stop(
            &t,
            StoppingStrategy::OmniscientExtreme {
                direction: Direction::Up,
                window: StopWindow::new(1, 3),
            },
        )
        .unwrap();
        assert_eq!((s.stop_index, s.value), (1, 1));
    }

    #[test]
    fn omniscient_ties_take_smallest_index() {
        let t = trace(&[1, -1, 1, -1, -1]);
        let s = apply_stop(
            &t,
            StoppingStrategy::OmniscientExtreme {
                direction: Direction::Down,
                window: StopWindow::new(1, 5),
            },
        )
        .unwrap();
        assert_eq!((s.stop_index, s.value), (5, -1));
        let s = apply_stop(
            &t,
            StoppingStrategy::OmniscientExtreme {
                direction: Direction::Down,
                window: StopWindow::new(1, 4),
            },
        )
        .unwrap();
        assert_eq!((s.stop_index, s.value), (2, 0));
    }

    #[test]
    fn fixed_and_no_stop() {
        let t = trace(&[1, 1, -1, 1]);
        let s = apply_stop(&t, StoppingStrategy::NoStop).unwrap();
        assert_eq!((s.stop_index, s.value), (4, 2));
        let s = apply_stop(&t, StoppingStrategy::FixedLength { k: 0 }).unwrap();
        assert_eq!((s.stop_index, s.value), (0, 0));
    }

    #[test]
    fn invalid_windows_are_rejected() {
        let t = trace(&[1, 1, -1]);
        let bad = [
            StoppingStrategy::FixedLength { k: 4 },
            StoppingStrategy::FirstHit {
                threshold: 0,
                direction: Direction::Up,
                window: StopWindow::new(1, 3),
            },
            StoppingStrategy::OmniscientExtreme {
                direction: Direction::Up,
                window: StopWindow::new(0, 3),
            },
            StoppingStrategy::OmniscientExtreme {
                direction: Direction::Up,
                window: StopWindow::new(3, 2),
            },
            StoppingStrategy::OmniscientExtreme {
                direction: Direction::Up,
                window: StopWindow::new(1, 4),
            },
        ];
        for s in bad {
            assert!(apply_stop(&t, s).is_err(), "{s:?} accepted");
        }
        assert!(WalkTrace::from_steps(vec![1, 0]).is_err());
    }

    #[test]
    fn omniscient_value_equals_scanned_max() {
        let n = 64;
        for seed in 0..1_000 {
            let t = generate_walk(n, &mut substream(seed, 7));
            let scan = t.prefix_sums()[1..].iter().copied().max().unwrap();
            let s = apply_stop(
                &t,
                StoppingStrategy::OmniscientExtreme {
                    direction: Direction::Up,
                    window: StopWindow::full(n),
                },
            )
            .unwrap();
            assert_eq!(s.value, scan);
        }
    }

    #[test]
    fn same_seed_same_trace() {
        let a = generate_walk(10_000, &mut substream(99, 3));
        let b = generate_walk(10_000, &mut substream(99, 3));
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn trace_invariants(steps in prop::collection::vec(prop::bool::ANY, 0..300)) {
            let steps: Vec<i8> = steps.into_iter().map(|b| if b { 1 } else { -1 }).collect();
            let t = WalkTrace::from_steps(steps).unwrap();
            prop_assert_eq!(t.prefix_sums().len(), t.len() + 1);
            prop_assert!(t.prefix_sums().windows(2).all(|w| (w[1] - w[0]).abs() == 1));
            prop_assert!(t.run_max() >= 0 && t.run_min() <= 0);
            prop_assert_eq!(t.prefix_sums()[t.argmax()], t.run_max());
            prop_assert_eq!(t.prefix_sums()[t.argmin()], t.run_min());
        }

        #[test]
        fn first_hit_reaches_iff_running_max_does(
            seed in any::<u64>(), len in 1usize..200, r in 1i64..20,
        ) {
            let t = generate_walk(len, &mut substream(seed, 0));
            let window = StopWindow::full(len);
            let s = apply_stop(&t, StoppingStrategy::FirstHit {
                threshold: r, direction: Direction::Up, window,
            }).unwrap();
            let reached = t.prefix_sums()[1..].iter().any(|&v| v >= r);
            prop_assert_eq!(s.value >= r, reached);
        }

        #[test]
        fn omniscient_dominates_other_rules(
            seed in any::<u64>(), len in 1usize..200, lo_frac in 0.0f64..1.0, k_frac in 0.0f64..1.0,
            r in 1i64..20,
        ) {
            let t = generate_walk(len, &mut substream(seed, 1));
            let lo = 1 + ((len - 1) as f64 * lo_frac) as usize;
            let window = StopWindow::new(lo, len);
            let k = lo + ((len - lo) as f64 * k_frac) as usize;
            let best = apply_stop(&t, StoppingStrategy::OmniscientExtreme {
                direction: Direction::Up, window,
            }).unwrap().value;
            let others = [
                apply_stop(&t, StoppingStrategy::NoStop).unwrap().value,
                apply_stop(&t, StoppingStrategy::FixedLength { k }).unwrap().value,
                apply_stop(&t, StoppingStrategy::FirstHit {
                    threshold: r, direction: Direction::Up, window,
                }).unwrap().value,
            ];
            for v in others {
                prop_assert!(best >= v);
            }
        }
    }
}
