//! Attacks against the obfuscation itself, with exact oracle-query metering.
//!
//! The experiment draws a hidden threshold, publishes the obfuscation, and
//! hands it to an attack. `tau` counts every oracle query the attack makes;
//! the aggregates condition the cost statistics on successful recovery.
//!
//! Probing entry 0 is never needed (it is a known 0) and the top entry is a
//! known 1 because the threshold is strictly below the domain size, so a
//! binary search over `[0, ell]` pins the threshold in exactly
//! `ceil(log2 ell)` probes. Each probe costs one suffix mining sweep, uniform
//! over the suffix space, which is where the attack's expected cost comes
//! from.

use std::fmt;

use rand::Rng;
use serde::Serialize;

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::oracle::{OracleKind, RandomOracle};
use crate::seeds;
use crate::threshold::{self, preprocess, ThresholdObfuscation, ThresholdParams};

/// What one attack run produced. `success` is filled in by the harness that
/// knows the generation-time threshold; attacks themselves cannot.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AttackReport {
    /// The attack's guess for the hidden threshold.
    pub recovered: u64,
    /// Probe-style searches performed.
    pub probes: u64,
    /// Oracle queries spent, measured as the counter delta over the attack.
    pub tau: u64,
    pub success: bool,
}

impl AttackReport {
    pub fn judged_against(mut self, true_threshold: u64) -> Self {
        self.success = self.recovered == true_threshold;
        self
    }
}

/// Recover the threshold by probing midpoints: entry 0 is a known 0, entry
/// `ell` a known 1, and the interval halves until only the threshold fits.
pub fn binary_search_attack(
    obf: &ThresholdObfuscation,
    oracle: &mut RandomOracle,
) -> Result<AttackReport> {
    let before = oracle.query_count();
    let mut lo = 0u64;
    let mut hi = obf.ell;
    let mut probes = 0u64;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        let bit = threshold::probe(obf, mid, oracle).map_err(|e| match e {
            Error::NotPreprocessOutput => {
                Error::AttackInconclusive(format!("entry {mid} has no matching suffix"))
            }
            other => other,
        })?;
        probes += 1;
        if bit == 0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(AttackReport {
        recovered: hi,
        probes,
        tau: oracle.query_count() - before,
        success: false,
    })
}

/// Resolve one entry within a query budget. Unlike the honest probe, the
/// attacker reuses the digest it already fetched instead of re-reading, so a
/// resolved entry costs exactly the mining queries. Returns the entry bit,
/// or `None` with the budget fully spent.
fn probe_within_budget(
    obf: &ThresholdObfuscation,
    i: u64,
    oracle: &mut RandomOracle,
    budget: &mut u64,
) -> Result<Option<u8>> {
    let suffix_len = obf.m - obf.k;
    let prefix = obf.prefix(i);
    let target = obf.committed(i);
    for j in 0..(1u64 << suffix_len) {
        if *budget == 0 {
            return Ok(None);
        }
        *budget -= 1;
        let digest = oracle.query(&prefix.concat(&BitString::from_u64(j, suffix_len)))?;
        if digest.starts_with(target) {
            return Ok(Some(digest.last_bit() ^ obf.mask(i)));
        }
    }
    Ok(None)
}

/// Probe midpoints in binary-search order until the query budget runs out,
/// then guess uniformly over the interval the revealed bits still allow.
pub fn bounded_query_attack(
    obf: &ThresholdObfuscation,
    oracle: &mut RandomOracle,
    budget: u64,
    guess_rng: &mut impl Rng,
) -> Result<AttackReport> {
    let before = oracle.query_count();
    let mut remaining = budget;
    let mut lo = 0u64;
    let mut hi = obf.ell;
    let mut probes = 0u64;
    while hi - lo > 1 && remaining > 0 {
        let mid = lo + (hi - lo) / 2;
        match probe_within_budget(obf, mid, oracle, &mut remaining)? {
            Some(0) => {
                probes += 1;
                lo = mid;
            }
            Some(_) => {
                probes += 1;
                hi = mid;
            }
            None => break,
        }
    }
    // The threshold is strictly below ell, so the top cell never holds it.
    let upper = if hi == obf.ell { obf.ell - 1 } else { hi };
    let recovered = if upper <= lo + 1 {
        upper.max(lo + 1)
    } else {
        guess_rng.gen_range(lo + 1..=upper)
    };
    let tau = oracle.query_count() - before;
    debug_assert!(tau <= budget);
    Ok(AttackReport {
        recovered,
        probes,
        tau,
        success: false,
    })
}

/// One designated puzzle: can a budget of `q` queries find a suffix whose
/// digest reproduces the committed bits? Enumerates from all-zeros like the
/// honest prober.
pub fn single_puzzle_attack(
    prefix: &BitString,
    c_target: &BitString,
    oracle: &mut RandomOracle,
    budget: u64,
) -> Result<bool> {
    let suffix_len = oracle.width() - prefix.len();
    let mut spent = 0u64;
    for j in 0..(1u64 << suffix_len) {
        if spent >= budget {
            return Ok(false);
        }
        spent += 1;
        let digest = oracle.query(&prefix.concat(&BitString::from_u64(j, suffix_len)))?;
        if digest.starts_with(c_target) {
            return Ok(true);
        }
    }
    Ok(false)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackMethod {
    BinarySearch,
    BoundedQuery(u64),
    /// Always answer the same value without querying; the no-information
    /// baseline.
    FixedGuess(u64),
}

impl fmt::Display for AttackMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttackMethod::BinarySearch => write!(f, "binary"),
            AttackMethod::BoundedQuery(q) => write!(f, "bounded:{q}"),
            AttackMethod::FixedGuess(v) => write!(f, "fixed:{v}"),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ExperimentParams {
    pub ell: u64,
    pub m: usize,
    pub k: usize,
    pub oracle_kind: OracleKind,
}

/// Aggregate statistics over the experiment's seeds. Cost statistics are
/// conditioned on successful recovery; collision-corrupted runs show up as
/// failures and stay out of them.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ExperimentAggregate {
    pub method: String,
    pub ell: u64,
    pub m: usize,
    pub k: usize,
    pub runs: u64,
    pub success_rate: f64,
    pub failures: u64,
    pub tau_mean: f64,
    pub tau_std: f64,
    pub tau_ci95: [f64; 2],
    pub tau_p10: u64,
    pub tau_p50: u64,
    pub tau_p90: u64,
    pub probe_mean: f64,
}

/// One seed of the obfuscation experiment: draw a threshold uniformly,
/// preprocess, run the attack, judge the guess.
pub fn run_single_experiment(
    params: &ExperimentParams,
    seed: u64,
    method: AttackMethod,
) -> Result<AttackReport> {
    let mut gen = seeds::stream(seed, "gen");
    let true_threshold = gen.gen_range(1..params.ell);
    let tparams = ThresholdParams {
        ell: params.ell,
        threshold: true_threshold,
        m: params.m,
        k: params.k,
    };
    let mut oracle = RandomOracle::from_kind(
        params.oracle_kind,
        params.m,
        Some(seeds::derive_seed(seed, "oracle")),
    )?;
    let obf = preprocess(&tparams, &mut oracle, &mut gen)?;
    let report = match method {
        AttackMethod::BinarySearch => binary_search_attack(&obf, &mut oracle)?,
        AttackMethod::BoundedQuery(q) => {
            let mut guess_rng = seeds::stream(seed, "guess");
            bounded_query_attack(&obf, &mut oracle, q, &mut guess_rng)?
        }
        AttackMethod::FixedGuess(v) => AttackReport {
            recovered: v,
            probes: 0,
            tau: 0,
            success: false,
        },
    };
    Ok(report.judged_against(true_threshold))
}

/// Run the experiment once per seed and aggregate. Identical parameter and
/// seed lists produce identical aggregates.
pub fn run_obfuscation_experiment(
    params: &ExperimentParams,
    experiment_seeds: &[u64],
    method: AttackMethod,
) -> Result<ExperimentAggregate> {
    let mut reports = Vec::with_capacity(experiment_seeds.len());
    for &seed in experiment_seeds {
        reports.push(run_single_experiment(params, seed, method)?);
    }

    let runs = reports.len() as u64;
    let successes: Vec<&AttackReport> = reports.iter().filter(|r| r.success).collect();
    let mut taus: Vec<u64> = successes.iter().map(|r| r.tau).collect();
    taus.sort_unstable();
    let n = taus.len() as f64;
    let tau_mean = if taus.is_empty() {
        0.0
    } else {
        taus.iter().sum::<u64>() as f64 / n
    };
    let tau_var = if taus.len() < 2 {
        0.0
    } else {
        taus.iter()
            .map(|&t| (t as f64 - tau_mean).powi(2))
            .sum::<f64>()
            / (n - 1.0)
    };
    let tau_std = tau_var.sqrt();
    let half = if taus.is_empty() {
        0.0
    } else {
        1.96 * tau_std / n.sqrt()
    };
    let quantile = |p: f64| -> u64 {
        if taus.is_empty() {
            return 0;
        }
        let idx = ((taus.len() - 1) as f64 * p).round() as usize;
        taus[idx]
    };
    let total_probes: u64 = successes.iter().map(|r| r.probes).sum();
    let probe_mean = if successes.is_empty() {
        0.0
    } else {
        total_probes as f64 / successes.len() as f64
    };

    Ok(ExperimentAggregate {
        method: method.to_string(),
        ell: params.ell,
        m: params.m,
        k: params.k,
        runs,
        success_rate: successes.len() as f64 / runs.max(1) as f64,
        failures: runs - successes.len() as u64,
        tau_mean,
        tau_std,
        tau_ci95: [tau_mean - half, tau_mean + half],
        tau_p10: quantile(0.10),
        tau_p50: quantile(0.50),
        tau_p90: quantile(0.90),
        probe_mean,
    })
}
