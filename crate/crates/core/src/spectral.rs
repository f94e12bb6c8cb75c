//! Stopped coin matrices, their iteration sums, and spectral norms.
//!
//! `H` is an `n x n` matrix of coinflips filled column by column, where the
//! adversary may cut up to `t` columns short and zero their suffixes. It
//! splits as `H = H' + W` with `H'` fully random and `W` holding the negated
//! suffixes. Stacking column sums over `m` iterations gives `G = R + Z`.

use std::fmt::{Display, Write as _};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::Params;
use crate::error::{param_err, LabError, Result};
use crate::montecarlo::McConfig;
use crate::rng::{substream, CoinFlips, SeedStreams};
use crate::stats::{McEstimate, Relation, VerificationVerdict};
use crate::walk::{apply_stop, StoppingStrategy, WalkTrace};

pub const DEFAULT_REL_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_POWER_ITERS: usize = 10_000;

const START_VECTOR_SEED: u64 = 0x05EE_D0F5_CA1E;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Copy + Default> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::default(); rows * cols],
        }
    }
}

impl<T: Copy> Matrix<T> {
    pub fn from_rows(rows: Vec<Vec<T>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    pub fn map<U>(&self, f: impl Fn(T) -> U) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = T> + '_ {
        (0..self.rows).map(move |i| self.get(i, j))
    }
}

impl<T: Copy + Display> Matrix<T> {
    /// Comma-separated rows, one line per row.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.rows {
            for j in 0..self.cols {
                if j > 0 {
                    out.push(',');
                }
                write!(out, "{}", self.get(i, j)).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

impl Matrix<i64> {
    pub fn column_sum(&self, j: usize) -> i64 {
        self.column(j).sum()
    }

    pub fn to_f64(&self) -> Matrix<f64> {
        self.map(|x| x as f64)
    }
}

/// `H = H' + W` for one iteration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoppedCoinMatrix {
    pub h: Matrix<i64>,
    pub h_prime: Matrix<i64>,
    pub w: Matrix<i64>,
    pub stopped_columns: Vec<usize>,
    /// Coins kept in each stopped column; entries from this row on are zero
    /// in `H`.
    pub stop_points: Vec<usize>,
}

/// Fills an `n x n` coin matrix; the first `t_stopped` columns are stopped
/// by `adversary`.
pub fn build_h(
    n: usize,
    t_stopped: usize,
    adversary: StoppingStrategy,
    seed: u64,
) -> Result<StoppedCoinMatrix> {
    if t_stopped > n {
        return param_err(format!("cannot stop {t_stopped} of {n} columns"));
    }
    build_h_with_columns(n, (0..t_stopped).collect(), adversary, seed)
}

/// Like [`build_h`] with explicit stopped column indices.
pub fn build_h_with_columns(
    n: usize,
    stopped_columns: Vec<usize>,
    adversary: StoppingStrategy,
    seed: u64,
) -> Result<StoppedCoinMatrix> {
    if let Some(&j) = stopped_columns.iter().find(|&&j| j >= n) {
        return param_err(format!("stopped column {j} out of range for n = {n}"));
    }
    let mut sorted = stopped_columns.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != stopped_columns.len() {
        return param_err("stopped columns must be distinct");
    }
    adversary.validate(n)?;

    let streams = SeedStreams::new(seed);
    let mut h_prime = Matrix::zeros(n, n);
    for j in 0..n {
        let mut rng = streams.stream(j as u64);
        for (i, s) in CoinFlips::new(&mut rng).take(n).enumerate() {
            h_prime.set(i, j, i64::from(s));
        }
    }
    let mut h = h_prime.clone();
    let mut w = Matrix::zeros(n, n);
    let mut stop_points = Vec::with_capacity(stopped_columns.len());
    for &j in &stopped_columns {
        let steps = h_prime.column(j).map(|x| x as i8).collect();
        let trace = WalkTrace::from_steps(steps)?;
        let k = apply_stop(&trace, adversary)?.stop_index;
        for i in k..n {
            h.set(i, j, 0);
            w.set(i, j, -h_prime.get(i, j));
        }
        stop_points.push(k);
    }
    Ok(StoppedCoinMatrix {
        h,
        h_prime,
        w,
        stopped_columns,
        stop_points,
    })
}

/// `G = R + Z` over `m` iterations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IterationSumMatrices {
    pub g: Matrix<i64>,
    pub r: Matrix<i64>,
    pub z: Matrix<i64>,
    pub bad_columns: Vec<usize>,
    pub stopped_columns: Vec<usize>,
}

/// Builds `m x n` iteration sums. The last `t` columns belong to bad
/// processors and are zero; the first `t` columns are stopped by
/// `adversary` in every iteration.
pub fn build_g(params: &Params, adversary: StoppingStrategy, seed: u64) -> Result<IterationSumMatrices> {
    params.validate()?;
    let n = params.n as usize;
    let t = params.t as usize;
    let m = params.m as usize;
    let bad_columns: Vec<usize> = (n - t..n).collect();
    let stopped_columns: Vec<usize> = (0..t).collect();
    let family = SeedStreams::new(seed);
    let mut g = Matrix::zeros(m, n);
    let mut r = Matrix::zeros(m, n);
    let mut z = Matrix::zeros(m, n);
    for i in 0..m {
        let hm = build_h_with_columns(
            n,
            stopped_columns.clone(),
            adversary,
            family.child(i as u64).seed(),
        )?;
        for j in 0..n - t {
            g.set(i, j, hm.h.column_sum(j));
            r.set(i, j, hm.h_prime.column_sum(j));
            z.set(i, j, hm.w.column_sum(j));
        }
    }
    Ok(IterationSumMatrices {
        g,
        r,
        z,
        bad_columns,
        stopped_columns,
    })
}

/// Largest singular value with a convergence certificate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub value: f64,
    /// Relative Gram-residual bound at termination.
    pub relative_error_bound: f64,
    pub iterations_used: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = dot(v, v).sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

/// Applies the Gram operator of the smaller side: `M^T M v` when
/// `rows >= cols`, else `M M^T v`.
fn gram_apply(m: &Matrix<f64>, v: &[f64], tmp: &mut [f64], out: &mut [f64]) {
    let (r, c) = (m.rows, m.cols);
    if r >= c {
        for (i, t) in tmp.iter_mut().enumerate() {
            *t = dot(&m.data[i * c..(i + 1) * c], v);
        }
        out.iter_mut().for_each(|x| *x = 0.0);
        for (i, &t) in tmp.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(&m.data[i * c..(i + 1) * c]) {
                *o += a * t;
            }
        }
    } else {
        tmp.iter_mut().for_each(|x| *x = 0.0);
        for (i, &vi) in v.iter().enumerate() {
            for (t, &a) in tmp.iter_mut().zip(&m.data[i * c..(i + 1) * c]) {
                *t += a * vi;
            }
        }
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(&m.data[i * c..(i + 1) * c], tmp);
        }
    }
}

fn start_vector(dim: usize, attempt: u64) -> Vec<f64> {
    let mut rng = substream(START_VECTOR_SEED, attempt);
    let mut v: Vec<f64> = (0..dim)
        .map(|_| {
            let u = rand::RngCore::next_u64(&mut rng) >> 11;
            u as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        })
        .collect();
    normalize(&mut v);
    v
}

/// Power iteration on the Gram operator. Stops once successive Rayleigh
/// quotients agree to `rel_tol` and the Gram residual is below `rel_tol`
/// relative to the quotient. One restart from a fresh start vector is
/// allowed before giving up.
pub fn spectral_norm(m: &Matrix<f64>, rel_tol: f64, max_power_iters: usize) -> Result<NormEstimate> {
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return param_err(format!("rel_tol must lie in (0, 1), got {rel_tol}"));
    }
    if m.data.iter().all(|&x| x == 0.0) {
        return Ok(NormEstimate {
            value: 0.0,
            relative_error_bound: 0.0,
            iterations_used: 0,
        });
    }
    let (small, big) = (m.rows.min(m.cols), m.rows.max(m.cols));
    let mut tmp = vec![0.0; big];
    let mut w = vec![0.0; small];
    let mut used = 0;
    let mut best = 0.0f64;
    for attempt in 0..2 {
        let mut v = start_vector(small, attempt);
        let mut prev = f64::NAN;
        for _ in 0..max_power_iters {
            used += 1;
            gram_apply(m, &v, &mut tmp, &mut w);
            let lambda = dot(&v, &w);
            best = best.max(lambda);
            let residual = w
                .iter()
                .zip(&v)
                .map(|(a, b)| (a - lambda * b).powi(2))
                .sum::<f64>()
                .sqrt();
            let settled = (lambda - prev).abs() < rel_tol * lambda;
            if settled && residual <= rel_tol * lambda {
                return Ok(NormEstimate {
                    value: lambda.sqrt(),
                    relative_error_bound: residual / (2.0 * lambda),
                    iterations_used: used,
                });
            }
            prev = lambda;
            if normalize(&mut w) == 0.0 {
                // start vector fell in the null space
                break;
            }
            std::mem::swap(&mut v, &mut w);
        }
    }
    Err(LabError::Convergence {
        best: best.max(0.0).sqrt(),
        iterations: used,
    })
}

/// Norms of one `G = R + Z` draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormTrial {
    pub g: f64,
    pub r: f64,
    pub z: f64,
    /// `|R| + |Z| - |G|`; never below the numeric tolerance.
    pub triangle_slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormBoundReport {
    pub n: u64,
    pub m: u64,
    pub t: u64,
    pub epsilon: f64,
    /// `(6 + 2 eps) sqrt(n (m + n))`
    pub threshold: f64,
    /// `2 / (m + n)`
    pub probability_bound: f64,
    pub g_exceeds: VerificationVerdict,
    /// `|R| > threshold / 2`
    pub r_exceeds_half: McEstimate,
    /// `|Z| > threshold / 2`
    pub z_exceeds_half: McEstimate,
    pub triangle_checks: u64,
    pub max_g: f64,
    pub mean_g: f64,
    pub trials: Vec<NormTrial>,
}

/// Draws `G = R + Z` per trial, checks `|G| <= |R| + |Z|`, and compares the
/// exceedance rate of `|G| > (6 + 2 eps) sqrt(n (m + n))` with `2/(m+n)`.
pub fn verify_norm_bound(
    params: &Params,
    adversary: StoppingStrategy,
    mc: &McConfig,
    rel_tol: f64,
) -> Result<NormBoundReport> {
    let d = params.derive()?;
    if mc.trials == 0 {
        return param_err("trials must be positive");
    }
    let family = SeedStreams::new(mc.seed);
    let trials: Vec<NormTrial> = (0..mc.trials)
        .into_par_iter()
        .map(|k| -> Result<NormTrial> {
            let mats = build_g(params, adversary, family.child(k).seed())?;
            let norm = |x: &Matrix<i64>| {
                spectral_norm(&x.to_f64(), rel_tol, DEFAULT_MAX_POWER_ITERS).map(|e| e.value)
            };
            let (g, r, z) = (norm(&mats.g)?, norm(&mats.r)?, norm(&mats.z)?);
            let slack = r + z - g;
            if slack < -10.0 * rel_tol * (r + z) {
                return Err(LabError::Triangle {
                    trial: k,
                    g,
                    sum: r + z,
                });
            }
            Ok(NormTrial {
                g,
                r,
                z,
                triangle_slack: slack,
            })
        })
        .collect::<Result<_>>()?;
    let a = d.norm_threshold;
    let count = |f: &dyn Fn(&NormTrial) -> bool| trials.iter().filter(|t| f(t)).count() as u64;
    let bound = 2.0 / (params.m + params.n) as f64;
    let max_g = trials.iter().map(|t| t.g).fold(0.0, f64::max);
    let mean_g = trials.iter().map(|t| t.g).sum::<f64>() / trials.len() as f64;
    Ok(NormBoundReport {
        n: params.n,
        m: params.m,
        t: params.t,
        epsilon: params.epsilon,
        threshold: a,
        probability_bound: bound,
        g_exceeds: VerificationVerdict::new(
            format!("spectral/n={}/m={}/t={}", params.n, params.m, params.t),
            mc.estimate(count(&|t| t.g > a)),
            Relation::Le,
            bound,
        ),
        r_exceeds_half: mc.estimate(count(&|t| t.r > a / 2.0)),
        z_exceeds_half: mc.estimate(count(&|t| t.z > a / 2.0)),
        triangle_checks: trials.len() as u64,
        max_g,
        mean_g,
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::walk::{Direction, StopWindow};

    fn adversary(n: usize) -> StoppingStrategy {
        StoppingStrategy::OmniscientExtreme {
            direction: Direction::Down,
            window: StopWindow::full(n),
        }
    }

    #[test]
    fn unstopped_h_has_no_w() {
        let hm = build_h(16, 0, StoppingStrategy::NoStop, 1).unwrap();
        assert!(hm.w.data.iter().all(|&x| x == 0));
        assert_eq!(hm.h, hm.h_prime);
    }

    #[test]
    fn fixed_stop_leaves_two_negated_entries() {
        let hm = build_h(4, 1, StoppingStrategy::FixedLength { k: 2 }, 9).unwrap();
        assert_eq!(hm.stop_points, vec![2]);
        let nonzero: Vec<(usize, usize)> = (0..4)
            .flat_map(|i| (0..4).map(move |j| (i, j)))
            .filter(|&(i, j)| hm.w.get(i, j) != 0)
            .collect();
        assert_eq!(nonzero, vec![(2, 0), (3, 0)]);
        for (i, j) in nonzero {
            assert_eq!(hm.w.get(i, j), -hm.h_prime.get(i, j));
            assert_eq!(hm.h.get(i, j), 0);
        }
    }

    #[test]
    fn decomposition_holds_entrywise() {
        for seed in 0..20 {
            let hm = build_h(24, 5, adversary(24), seed).unwrap();
            for i in 0..24 {
                for j in 0..24 {
                    assert_eq!(hm.h.get(i, j), hm.h_prime.get(i, j) + hm.w.get(i, j));
                    if j >= 5 {
                        assert_eq!(hm.w.get(i, j), 0);
                    }
                }
            }
        }
    }

    #[test]
    fn g_equals_r_plus_z() {
        let p = Params::new(8, 1).with_m(8);
        let s = build_g(&p, adversary(8), 3).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                assert_eq!(s.g.get(i, j), s.r.get(i, j) + s.z.get(i, j));
            }
            assert_eq!(s.g.get(i, 7), 0);
            assert_eq!(s.r.get(i, 7), 0);
        }
        assert_eq!(s.bad_columns, vec![7]);
    }

    #[test]
    fn no_adversary_gives_zero_z() {
        let p = Params::new(6, 0).with_m(1);
        let s = build_g(&p, adversary(6), 0).unwrap();
        assert!(s.z.data.iter().all(|&x| x == 0));
        assert_eq!(s.g, s.r);
    }

    #[test]
    fn z_entries_bounded() {
        let p = Params::new(20, 4).with_m(10);
        for seed in 0..10 {
            let s = build_g(&p, adversary(20), seed).unwrap();
            for i in 0..10 {
                for j in 0..20 {
                    assert!(s.z.get(i, j).abs() <= 20);
                    if j >= 4 {
                        assert_eq!(s.z.get(i, j), 0);
                    }
                }
            }
        }
    }

    #[test]
    fn norm_examples() {
        let d = Matrix::from_rows(vec![vec![3.0, 0.0], vec![0.0, 4.0]]);
        let e = spectral_norm(&d, 1e-10, 1000).unwrap();
        assert!((e.value - 4.0).abs() < 1e-8);

        let a = Matrix::from_rows(vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        let e = spectral_norm(&a, 1e-10, 1000).unwrap();
        let exact = ((30.0 + 884f64.sqrt()) / 2.0).sqrt();
        assert!((e.value - exact).abs() < 1e-8 * exact);
        assert!((e.value - 5.4650).abs() < 1e-4);

        let mut id = Matrix::zeros(5, 5);
        for i in 0..5 {
            id.set(i, i, 1.0);
        }
        assert!((spectral_norm(&id, 1e-6, 100).unwrap().value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rectangular_and_zero() {
        let a = Matrix::from_rows(vec![vec![1.0, 2.0, 2.0]]);
        assert!((spectral_norm(&a, 1e-9, 100).unwrap().value - 3.0).abs() < 1e-9);
        let z: Matrix<f64> = Matrix::zeros(3, 4);
        assert_eq!(spectral_norm(&z, 1e-6, 10).unwrap().value, 0.0);
    }

    #[test]
    fn non_convergence_reports_best() {
        let a = Matrix::from_rows(vec![vec![1.0, 0.0], vec![0.0, 0.999]]);
        match spectral_norm(&a, 1e-12, 5) {
            Err(LabError::Convergence { best, iterations }) => {
                assert_eq!(iterations, 10);
                assert!(best > 0.99 && best <= 1.0);
            }
            other => panic!("expected convergence error, got {other:?}"),
        }
        assert!(spectral_norm(&a, 0.0, 5).is_err());
    }

    #[test]
    fn csv_export() {
        let a = Matrix::from_rows(vec![vec![1i64, -1], vec![0, 2]]);
        assert_eq!(a.to_csv(), "1,-1\n0,2\n");
    }

    #[test]
    fn small_norm_bound_run() {
        let p = Params::new(12, 1).with_m(12);
        let rep = verify_norm_bound(&p, adversary(12), &McConfig::new(20, 5), DEFAULT_REL_TOL).unwrap();
        assert_eq!(rep.triangle_checks, 20);
        assert!(rep.trials.iter().all(|t| t.g <= t.r + t.z + 1e-4 * (t.r + t.z)));
    }
}
