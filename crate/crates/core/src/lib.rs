//! Verification laboratory for summed-coinflip global coins under
//! adversarial stream stopping.
//!
//! The pieces, bottom up:
//!
//! - [`walk`]: ±1 walks and the adversary's stopping rules.
//! - [`exact`]: exact endpoint and running-maximum distributions, the
//!   reflection identity, and a brute-force path enumeration oracle.
//! - [`bounds`]: protocol parameters, derived thresholds, and the constant
//!   claims.
//! - [`stats`] and [`montecarlo`]: seeded, pool-size-independent Monte
//!   Carlo estimates with Clopper–Pearson intervals.
//! - [`coin_iter`]: one global-coin iteration with its bad-deviation
//!   sources, and a toy agreement loop.
//! - [`spectral`]: the `H = H' + W` and `G = R + Z` matrix families and
//!   power-iteration spectral norms.
//! - [`report`]: the JSON/CSV report schema.

pub mod bounds;
pub mod coin_iter;
pub mod error;
pub mod exact;
pub mod montecarlo;
pub mod report;
pub mod rng;
pub mod spectral;
pub mod stats;
pub mod walk;

pub use bounds::{check_claims, derive, lemma52_part1_bound, ClaimReport, DerivedThresholds, Params};
pub use coin_iter::{
    good_event_frequency, run_agreement, run_iteration, AdversaryKnobs, AgreementOutcome,
    IterationConfig, IterationRecord,
};
pub use error::{LabError, Result};
pub use exact::{
    chernoff_tail, prob_max_ge_enumeration, prob_max_ge_reflection, prob_sum_eq, prob_sum_ge,
    ExactProb,
};
pub use montecarlo::{
    verify_fact3_mc, verify_lemma52_part1, verify_lemma52_part2, verify_lemma71, McConfig,
};
pub use report::{Report, ResultEntry, Summary};
pub use spectral::{
    build_g, build_h, spectral_norm, verify_norm_bound, IterationSumMatrices, Matrix,
    NormEstimate, StoppedCoinMatrix,
};
pub use stats::{McEstimate, Relation, Verdict, VerificationVerdict};
pub use walk::{
    apply_stop, generate_walk, Direction, StopWindow, StoppedStream, StoppingStrategy, WalkTrace,
};
