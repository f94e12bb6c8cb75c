//! Protocol parameters, derived deviation thresholds, and the arithmetic
//! claims behind the corrected constants.

use serde::{Deserialize, Serialize};

use crate::error::{param_err, Result};

pub const DEFAULT_EPSILON: f64 = 0.1;
pub const DEFAULT_C1: f64 = 0.001;

/// Protocol parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    /// Number of processors.
    pub n: u64,
    /// Number of bad processors.
    pub t: u64,
    /// Slack in the spectral norm bound.
    pub epsilon: f64,
    /// Variant-2 stream length constant.
    pub c1: f64,
    /// Iterations, i.e. rows of the iteration-sum matrix.
    pub m: u64,
}

impl Params {
    pub fn new(n: u64, t: u64) -> Self {
        Self {
            n,
            t,
            epsilon: DEFAULT_EPSILON,
            c1: DEFAULT_C1,
            m: n,
        }
    }

    pub fn with_m(mut self, m: u64) -> Self {
        self.m = m;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_c1(mut self, c1: f64) -> Self {
        self.c1 = c1;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return param_err("n must be positive");
        }
        if 2 * self.t >= self.n {
            return param_err(format!("need 2t < n, got n = {}, t = {}", self.n, self.t));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return param_err(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.c1 > 0.0 && self.c1.is_finite()) {
            return param_err(format!("c1 must be positive, got {}", self.c1));
        }
        if self.m == 0 {
            return param_err("m must be positive");
        }
        Ok(())
    }

    pub fn derive(&self) -> Result<DerivedThresholds> {
        derive(self)
    }
}

/// Deviation thresholds derived from [`Params`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedThresholds {
    /// `sqrt(2n(n-2t))`
    pub alpha: f64,
    /// `sqrt(2n(n-t)) - 2t`
    pub beta: f64,
    pub beta_half: f64,
    /// `sqrt(2n(n-t))/4 - t/2`
    pub beta_quarter: f64,
    /// `alpha - beta/4`
    pub alpha_prime: f64,
    /// `(6 + 2 eps) sqrt(n(m+n))`
    pub norm_threshold: f64,
}

fn beta_real(n: f64, t: f64) -> f64 {
    (2.0 * n * (n - t)).sqrt() - 2.0 * t
}

/// Computes every threshold from `params`.
pub fn derive(params: &Params) -> Result<DerivedThresholds> {
    params.validate()?;
    let n = params.n as f64;
    let t = params.t as f64;
    let m = params.m as f64;
    let alpha = (2.0 * n * (n - 2.0 * t)).sqrt();
    let beta = beta_real(n, t);
    let beta_quarter = (2.0 * n * (n - t)).sqrt() / 4.0 - t / 2.0;
    let d = DerivedThresholds {
        alpha,
        beta,
        beta_half: beta / 2.0,
        beta_quarter,
        alpha_prime: alpha - beta_quarter,
        norm_threshold: (6.0 + 2.0 * params.epsilon) * (n * (m + n)).sqrt(),
    };
    if !(d.alpha_prime > 0.0 && d.beta_quarter > 0.0) {
        return param_err(format!("thresholds not positive for n = {n}, t = {t}"));
    }
    Ok(d)
}

/// `2 exp(-(beta/4)^2 / (2 t n))` for real-valued `n`, `t > 0`.
pub fn stoppable_stream_bound(n: f64, t: f64) -> f64 {
    let bq = beta_real(n, t) / 4.0;
    2.0 * (-(bq * bq) / (2.0 * t * n)).exp()
}

/// Bound on the probability that a stream of up to `nt` coins, stopped
/// adversarially, deviates beyond `beta/4`. Zero when `t = 0`.
pub fn lemma52_part1_bound(params: &Params) -> Result<f64> {
    params.validate()?;
    if params.t == 0 {
        return Ok(0.0);
    }
    Ok(stoppable_stream_bound(params.n as f64, params.t as f64))
}

/// Product chain `(2/3)(.001) c^2 (.49999)^2 (7 + 2 eps)^-2` for the
/// Variant-1 resilience bound, with `c` the displayed coefficient.
pub fn variant1_chain(coefficient: f64, epsilon: f64) -> f64 {
    (2.0 / 3.0) * 0.001 * coefficient.powi(2) * 0.49999f64.powi(2) / (7.0 + 2.0 * epsilon).powi(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClaimRelation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = "in")]
    Within,
}

/// One arithmetic claim with both sides evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Claim {
    pub id: String,
    pub description: String,
    pub lhs: f64,
    pub relation: ClaimRelation,
    pub rhs: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rhs_high: Option<f64>,
    pub pass: bool,
}

impl Claim {
    fn new(id: &str, description: String, lhs: f64, relation: ClaimRelation, rhs: f64) -> Self {
        let pass = match relation {
            ClaimRelation::Le => lhs <= rhs,
            ClaimRelation::Gt => lhs > rhs,
            ClaimRelation::Within => unreachable!("use Claim::within"),
        };
        Self {
            id: id.to_owned(),
            description,
            lhs,
            relation,
            rhs,
            rhs_high: None,
            pass,
        }
    }

    fn within(id: &str, description: String, lhs: f64, lo: f64, hi: f64) -> Self {
        Self {
            id: id.to_owned(),
            description,
            lhs,
            relation: ClaimRelation::Within,
            rhs: lo,
            rhs_high: Some(hi),
            pass: lo <= lhs && lhs <= hi,
        }
    }
}

/// Evaluated constant claims plus informational notes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimReport {
    pub n: u64,
    pub epsilon: f64,
    pub c1: f64,
    pub claims: Vec<Claim>,
    pub notes: Vec<String>,
}

impl ClaimReport {
    pub fn all_pass(&self) -> bool {
        self.claims.iter().all(|c| c.pass)
    }
}

/// Evaluates the four constant claims for processor count `params.n`.
///
/// (a) the stoppable-stream bound at `t = .005 n` is at most `e^-11`;
/// (b) `.211 - e^-11 > 1/20`;
/// (c) `(beta/2)^2 > .49999 n^2` at `t = 1e-6 n`;
/// (d) the Variant-1 product chain at `eps -> 0` lies in `[1.13e-9, 1.15e-9]`.
pub fn check_claims(params: &Params) -> ClaimReport {
    let n = params.n.max(1) as f64;
    let e11 = (-11.0f64).exp();
    let mut claims = Vec::with_capacity(4);

    let t_a = 0.005 * n;
    claims.push(Claim::new(
        "a",
        format!("2 exp(-(beta/4)^2 / (2tn)) at t = .005n = {t_a} is at most e^-11"),
        stoppable_stream_bound(n, t_a),
        ClaimRelation::Le,
        e11,
    ));

    claims.push(Claim::new(
        "b",
        ".211 - e^-11 > 1/20".to_owned(),
        0.211 - e11,
        ClaimRelation::Gt,
        1.0 / 20.0,
    ));

    let t_c = 1e-6 * n;
    let beta_half = beta_real(n, t_c) / 2.0;
    claims.push(Claim::new(
        "c",
        format!("(beta/2)^2 / n^2 at t = 1e-6 n = {t_c} exceeds .49999"),
        (beta_half / n).powi(2),
        ClaimRelation::Gt,
        0.49999,
    ));

    claims.push(Claim::within(
        "d",
        "(2/3)(.001)(.0183)^2(.49999)^2(7+2eps)^-2 at eps -> 0 lies in [1.13e-9, 1.15e-9]"
            .to_owned(),
        variant1_chain(0.0183, 0.0),
        1.13e-9,
        1.15e-9,
    ));

    let notes = vec![
        format!(
            "coefficient discrepancy: the displayed formula uses .183, which gives {:.4e}; \
             only .0183 reproduces the stated 1.14e-9 (chain value {:.4e})",
            variant1_chain(0.183, 0.0),
            variant1_chain(0.0183, 0.0)
        ),
        format!(
            "chain at configured eps = {}: {:.4e}",
            params.epsilon,
            variant1_chain(0.0183, params.epsilon)
        ),
        "resilience bound `t < 1/72` is read as t < n/72".to_owned(),
        "Variant-1 resilience replaced: t < 4.25e-7 n becomes t < 3.3e-8 n".to_owned(),
        format!(
            "stoppable-stream bound uses 2 exp(-(beta/4)^2/(2tn)); the literal form \
             (1/2) e^{{-(beta/4)^2}} / (2nt) evaluates to {:.3e} at t = .005n",
            0.5 * (-(beta_real(n, t_a) / 4.0).powi(2)).exp() / (2.0 * n * t_a)
        ),
    ];

    ClaimReport {
        n: params.n,
        epsilon: params.epsilon,
        c1: params.c1,
        claims,
        notes,
    }
}
