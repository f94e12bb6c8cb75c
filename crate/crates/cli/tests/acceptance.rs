//! Acceptance suite. One test per criterion; each prints a single
//! `criterion N: PASS|FAIL ...` line. Run with
//! `cargo test -p coinlab-cli --test acceptance -- --nocapture`.

use std::process::Command;
use std::time::{Duration, Instant};

use coinlab::coin_iter::{decides, run_iteration_traced};
use coinlab::exact::{max_ge_from_histogram, max_histogram_enumeration, prob_sum_eq, prob_sum_gt};
use coinlab::montecarlo::{lemma71_at, lemma71_exact};
use coinlab::rng::substream;
use coinlab::spectral::DEFAULT_REL_TOL;
use coinlab::{
    check_claims, good_event_frequency, lemma52_part1_bound, prob_max_ge_enumeration,
    prob_max_ge_reflection, prob_sum_ge, run_iteration, spectral_norm, verify_lemma52_part1,
    verify_lemma52_part2, verify_lemma71, verify_norm_bound, AdversaryKnobs, Direction,
    IterationConfig, Matrix, McConfig, McEstimate, Params, StopWindow, StoppingStrategy, Verdict,
};
use rand::Rng;
use serde_json::Value;

fn report(criterion: u32, ok: bool, detail: &str, elapsed: Duration) {
    let status = if ok { "PASS" } else { "FAIL" };
    println!(
        "criterion {criterion}: {status} ({:.2}s) {detail}",
        elapsed.as_secs_f64()
    );
}

#[test]
fn criterion_1_reflection_identity_is_exact() {
    let start = Instant::now();
    let mut mismatches = Vec::new();
    let mut not_strict = Vec::new();
    for n in 1..=16u32 {
        let hist = max_histogram_enumeration(n).unwrap();
        for r in 1..=i64::from(n) {
            let enumerated = max_ge_from_histogram(&hist, n, r);
            let reflection = prob_max_ge_reflection(n, r).unwrap();
            if enumerated != reflection {
                mismatches.push((n, r));
            }
            let twice = prob_sum_ge(n, r).unwrap().times(2);
            if !twice.is_zero() && !(enumerated < twice) {
                not_strict.push((n, r));
            }
        }
    }
    let elapsed = start.elapsed();
    let ok = mismatches.is_empty() && not_strict.is_empty() && elapsed < Duration::from_secs(60);
    report(
        1,
        ok,
        &format!(
            "identity mismatches: {}; pairs where Pr(M>=r) < 2Pr(S>=r) is not strict: {} {:?}",
            mismatches.len(),
            not_strict.len(),
            not_strict
        ),
        elapsed,
    );
    assert!(mismatches.is_empty(), "reflection identity mismatches: {mismatches:?}");
    assert!(
        not_strict.is_empty(),
        "strict inequality fails at {} pairs (all with n + r odd): {not_strict:?}",
        not_strict.len()
    );
    assert!(elapsed < Duration::from_secs(60));
}

#[test]
fn criterion_2_stoppable_stream_bound() {
    let start = Instant::now();
    let e11 = (-11.0f64).exp();
    let analytic = lemma52_part1_bound(&Params::new(1000, 5)).unwrap();
    let out = verify_lemma52_part1(&Params::new(200, 1), &McConfig::new(1_000_000, 2024)).unwrap();
    let elapsed = start.elapsed();
    let v = &out.verdict;
    let ok = analytic <= e11 && v.verdict == Verdict::Pass && elapsed < Duration::from_secs(120);
    report(
        2,
        ok,
        &format!(
            "bound(1000,5) = {analytic:.3e} <= e^-11 = {e11:.3e}; MC(200,1): {} / {} hits, CI high {:.3e} vs bound {:.3e}",
            v.empirical.successes, v.empirical.trials, v.empirical.ci_high, v.analytic_bound
        ),
        elapsed,
    );
    assert!(ok);
}

#[test]
fn criterion_3_long_stream_structure() {
    let start = Instant::now();
    let rep = verify_lemma52_part2(&Params::new(60, 3), &McConfig::new(100_000, 2024)).unwrap();
    let elapsed = start.elapsed();
    let ok = rep.structural_check && rep.up.pathwise_check;
    report(
        3,
        ok,
        &format!(
            "up: p_first {:.4} p_adv {:.4} p_full {:.4}; down: p_first {:.4} p_adv {:.4} p_full {:.4}; \
             p_first beside reference {} (not judged)",
            rep.up.p_first.p_hat,
            rep.up.p_adversary_max.p_hat,
            rep.up.p_full.p_hat,
            rep.down.p_first.p_hat,
            rep.down.p_adversary_max.p_hat,
            rep.down.p_full.p_hat,
            rep.reference_first
        ),
        elapsed,
    );
    assert!(ok);
}

#[test]
fn criterion_4_constant_chains() {
    let start = Instant::now();
    let claims = check_claims(&Params::new(1000, 5));
    let elapsed = start.elapsed();
    let note = claims
        .notes
        .iter()
        .find(|n| n.contains(".183") && n.contains(".0183"))
        .cloned();
    let ok = claims.claims.len() == 4
        && claims.all_pass()
        && note.is_some()
        && elapsed < Duration::from_secs(1);
    let lines: Vec<String> = claims
        .claims
        .iter()
        .map(|c| format!("({}) {:.6e} {:?} {:.6e} {}", c.id, c.lhs, c.relation, c.rhs, c.pass))
        .collect();
    report(4, ok, &lines.join("; "), elapsed);
    println!("  note: {}", note.unwrap_or_default());
    assert!(ok);
}

#[test]
fn criterion_5_max_versus_endpoint() {
    let start = Instant::now();
    let params = Params::new(40, 2).with_m(10).with_c1(0.05);
    let rep = verify_lemma71(&params, &McConfig::new(100_000, 2024)).unwrap();
    let sigma_rows: Vec<_> = rep.rows.iter().filter(|r| r.label.ends_with("sigma")).collect();

    let (max_ge, twice) = lemma71_exact(8, 2).unwrap();
    let expect = prob_sum_gt(8, 2).unwrap().times(2) + prob_sum_eq(8, 2).unwrap();
    let exact_ok = max_ge == expect && max_ge == prob_max_ge_enumeration(8, 2).unwrap() && max_ge <= twice;
    let small = lemma71_at(8, &[("2".into(), 2.0)], &McConfig::new(100_000, 2024)).unwrap();
    let mc_ok = small.rows[0].x.contains(max_ge.to_f64());

    let elapsed = start.elapsed();
    let ok = rep.stream_len == 40
        && sigma_rows.len() == 3
        && rep.all_pass()
        && exact_ok
        && mc_ok
        && elapsed < Duration::from_secs(120);
    let lines: Vec<String> = rep
        .rows
        .iter()
        .map(|r| format!("{}: {:.4} <= 2*{:.4}+{:.4}", r.label, r.x.p_hat, r.y.p_hat, r.slack))
        .collect();
    report(
        5,
        ok,
        &format!("{}; exact len 8: Pr(max>=2) = {max_ge}, 2Pr(S>=2) = {twice}", lines.join("; ")),
        elapsed,
    );
    assert!(ok);
}

fn closed_form_norm(a: f64, b: f64, c: f64, d: f64) -> f64 {
    let fro = a * a + b * b + c * c + d * d;
    let det = a * d - b * c;
    ((fro + (fro * fro - 4.0 * det * det).max(0.0).sqrt()) / 2.0).sqrt()
}

#[test]
fn criterion_6_spectral_bound() {
    let start = Instant::now();
    let params = Params::new(32, 1).with_m(32).with_epsilon(0.1);
    let adversary = StoppingStrategy::OmniscientExtreme {
        direction: Direction::Down,
        window: StopWindow::full(32),
    };
    let rep = verify_norm_bound(&params, adversary, &McConfig::new(1_000, 2024), DEFAULT_REL_TOL).unwrap();
    let triangle_ok = rep
        .trials
        .iter()
        .all(|t| t.g <= t.r + t.z + 10.0 * DEFAULT_REL_TOL * (t.r + t.z));
    let bound_ok = rep.g_exceeds.empirical.p_hat <= 2.0 / 64.0 && rep.g_exceeds.verdict == Verdict::Pass;

    let mut rng = substream(2024, 6);
    let mut worst = 0.0f64;
    let mut checked = 0;
    while checked < 1_000 {
        let e: [f64; 4] = std::array::from_fn(|_| f64::from(rng.random_range(-20i32..=20)));
        if e.iter().all(|&x| x == 0.0) {
            continue;
        }
        let m = Matrix::from_rows(vec![vec![e[0], e[1]], vec![e[2], e[3]]]);
        let est = spectral_norm(&m, DEFAULT_REL_TOL, 10_000).unwrap().value;
        let exact = closed_form_norm(e[0], e[1], e[2], e[3]);
        worst = worst.max((est - exact).abs() / exact);
        checked += 1;
    }
    let elapsed = start.elapsed();
    let ok = triangle_ok && bound_ok && worst <= 1e-6 && elapsed < Duration::from_secs(180);
    report(
        6,
        ok,
        &format!(
            "exceedances {} / {} (threshold {:.2}, max |G| {:.2}), bound {:.5}; triangle ok in {} trials; \
             2x2 worst rel err {worst:.2e}",
            rep.g_exceeds.empirical.successes,
            rep.g_exceeds.empirical.trials,
            rep.threshold,
            rep.max_g,
            rep.probability_bound,
            rep.triangle_checks
        ),
        elapsed,
    );
    assert!(ok);
}

#[test]
fn criterion_7_coin_iteration_properties() {
    let start = Instant::now();
    let config = IterationConfig {
        knobs: AdversaryKnobs {
            bad_coins: true,
            ..AdversaryKnobs::default()
        },
        ..IterationConfig::new(60, 3, 2024)
    };
    let cap = config.thresholds().unwrap().beta_quarter.floor() as i64;

    // Additivity, recomputed from the raw streams.
    let mut additive = true;
    for i in 0..1_000 {
        let (rec, s) = run_iteration_traced(&config, i).unwrap();
        let endpoint = |w: &coinlab::WalkTrace| w.steps().iter().map(|&x| i64::from(x)).sum::<i64>();
        let lowest = |w: &coinlab::WalkTrace| {
            let mut acc = 0i64;
            w.steps()
                .iter()
                .map(|&x| {
                    acc += i64::from(x);
                    acc
                })
                .min()
                .unwrap()
        };
        let core: i64 = s.core.iter().map(endpoint).sum();
        let excluded: i64 = s.excluded.iter().map(endpoint).sum();
        let stopped: i64 = s.stopped.iter().map(lowest).sum();
        let recomputed = core + excluded.clamp(-cap, cap) + stopped - 3 - 3 * 60;
        additive &= rec.total == recomputed
            && rec.total
                == rec.core_sum + rec.excluded_sum + rec.stopped_sum + rec.ambiguous_term + rec.bad_term;
    }

    // good_event reads only the core streams.
    let passive = IterationConfig {
        knobs: AdversaryKnobs::passive(),
        ..config
    };
    let invariant = (0..1_000).all(|i| {
        run_iteration(&config, i).unwrap().good_event == run_iteration(&passive, i).unwrap().good_event
    });

    // Without an adversary, deciding and the good event coincide.
    let honest = IterationConfig::new(60, 0, 2024);
    let d = honest.thresholds().unwrap();
    let iterations = 10_000u64;
    let decided = (0..iterations)
        .filter(|&i| decides(&run_iteration(&honest, i).unwrap(), Direction::Up, d.alpha_prime))
        .count() as u64;
    let freq = good_event_frequency(&honest, iterations).unwrap();
    let rate = McEstimate::new(decided, iterations, 2024, 0.99);
    let rate_ok = decided == freq.successes && freq.contains(rate.p_hat);

    let elapsed = start.elapsed();
    let ok = additive && invariant && rate_ok;
    report(
        7,
        ok,
        &format!(
            "additivity {additive}; invariance {invariant}; t=0 decide rate {:.4} vs good event {:.4} [{:.4}, {:.4}]",
            rate.p_hat, freq.p_hat, freq.ci_low, freq.ci_high
        ),
        elapsed,
    );
    assert!(ok);
}

fn run_all(workers: &str) -> Value {
    let out = Command::new(env!("CARGO_BIN_EXE_coinlab"))
        .args(["all", "--seed", "2024", "--workers", workers])
        .output()
        .expect("binary runs");
    assert!(
        out.status.code().is_some_and(|c| c == 0 || c == 1),
        "unexpected exit {:?}: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("json report")
}

#[test]
fn criterion_8_all_is_deterministic_across_worker_counts() {
    let start = Instant::now();
    let a = run_all("1");
    let b = run_all("4");
    let numeric = |v: &Value| {
        serde_json::to_string(&(&v["tool_version"], &v["results"], &v["summary"])).unwrap()
    };
    let same = numeric(&a) == numeric(&b);
    let elapsed = start.elapsed();
    report(
        8,
        same,
        &format!(
            "{} result rows; summary {}",
            a["results"].as_array().map_or(0, Vec::len),
            a["summary"]
        ),
        elapsed,
    );
    assert!(same);
}
