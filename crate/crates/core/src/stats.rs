//! Event-probability estimates with exact binomial confidence intervals.

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

pub const DEFAULT_CONFIDENCE: f64 = 0.99;

/// Empirical estimate of an event probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub successes: u64,
    pub trials: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub seed: u64,
    pub confidence_level: f64,
}

impl McEstimate {
    pub fn new(successes: u64, trials: u64, seed: u64, confidence_level: f64) -> Self {
        assert!(trials > 0, "an estimate needs at least one trial");
        assert!(successes <= trials);
        let (ci_low, ci_high) = clopper_pearson(successes, trials, confidence_level);
        Self {
            successes,
            trials,
            p_hat: successes as f64 / trials as f64,
            ci_low,
            ci_high,
            seed,
            confidence_level,
        }
    }

    pub fn half_width(&self) -> f64 {
        (self.ci_high - self.ci_low) / 2.0
    }

    pub fn contains(&self, p: f64) -> bool {
        self.ci_low <= p && p <= self.ci_high
    }
}

/// Two-sided Clopper–Pearson interval for `successes` out of `trials`.
pub fn clopper_pearson(successes: u64, trials: u64, level: f64) -> (f64, f64) {
    assert!(trials > 0 && successes <= trials);
    assert!(level > 0.0 && level < 1.0, "confidence level must be in (0, 1)");
    let tail = (1.0 - level) / 2.0;
    let (x, n) = (successes as f64, trials as f64);
    let low = match successes {
        0 => 0.0,
        s if s == trials => tail.powf(1.0 / n),
        _ => beta_quantile(x, n - x + 1.0, tail),
    };
    let high = match successes {
        s if s == trials => 1.0,
        0 => 1.0 - tail.powf(1.0 / n),
        _ => beta_quantile(x + 1.0, n - x, 1.0 - tail),
    };
    (low.min(x / n), high.max(x / n))
}

// Inverse of the regularized incomplete beta function by bisection.
fn beta_quantile(a: f64, b: f64, q: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if beta_reg(a, b, mid) < q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Direction of the claimed inequality `empirical <relation> bound`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    /// Verdict for `estimate <relation> bound`: pass when the whole interval
    /// satisfies the relation, fail when none of it does.
    pub fn judge(estimate: &McEstimate, relation: Relation, bound: f64) -> Verdict {
        match relation {
            Relation::Le if estimate.ci_high <= bound => Verdict::Pass,
            Relation::Le if estimate.ci_low > bound => Verdict::Fail,
            Relation::Ge if estimate.ci_low >= bound => Verdict::Pass,
            Relation::Ge if estimate.ci_high < bound => Verdict::Fail,
            _ => Verdict::Inconclusive,
        }
    }
}

/// An empirical estimate compared against a bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationVerdict {
    pub claim_id: String,
    pub empirical: McEstimate,
    pub analytic_bound: f64,
    pub relation: Relation,
    pub verdict: Verdict,
}

impl VerificationVerdict {
    pub fn new(
        claim_id: impl Into<String>,
        empirical: McEstimate,
        relation: Relation,
        analytic_bound: f64,
    ) -> Self {
        Self {
            claim_id: claim_id.into(),
            verdict: Verdict::judge(&empirical, relation, analytic_bound),
            empirical,
            analytic_bound,
            relation,
        }
    }
}
