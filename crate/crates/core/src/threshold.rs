//! Threshold truth table hidden behind prefix/suffix hash puzzles.
//!
//! `preprocess` commits to each table entry: it draws a public k-bit prefix
//! and a hidden (m-k)-bit suffix, hashes their concatenation, publishes the
//! first m-1 digest bits as the commitment and the last digest bit XOR the
//! table bit as the mask. Recovering one entry (`probe`) means mining the
//! suffix that reproduces the committed bits — at most `2^(m-k)` oracle
//! queries — and XOR-ing the digest's last bit with the mask. The threshold
//! itself is never stored; it is recoverable only through probes.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::oracle::{OracleKind, RandomOracle};

/// Generation-time parameters. The threshold is consumed by `preprocess`
/// and deliberately absent from its output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ThresholdParams {
    pub ell: u64,
    pub threshold: u64,
    pub m: usize,
    pub k: usize,
}

impl ThresholdParams {
    pub fn validate(&self) -> Result<()> {
        if self.ell < 2 {
            return Err(Error::InvalidParams(format!(
                "domain size {} must be at least 2",
                self.ell
            )));
        }
        if self.threshold == 0 || self.threshold >= self.ell {
            return Err(Error::InvalidParams(format!(
                "threshold {} outside 0 < T < {}",
                self.threshold, self.ell
            )));
        }
        if self.k <= 1 || self.k >= self.m {
            return Err(Error::InvalidParams(format!(
                "prefix length {} outside 1 < k < m = {}",
                self.k, self.m
            )));
        }
        Ok(())
    }
}

/// Step function over 0..=ell: 0 below the threshold, 1 at or above it.
pub fn threshold_eval(threshold: u64, ell: u64, i: u64) -> Result<u8> {
    if i > ell {
        return Err(Error::Domain { i, ell });
    }
    Ok(u8::from(i >= threshold))
}

/// The published artifact: per-entry commitments `C`, prefixes `P`, and mask
/// bits `V`, indexed 1..=ell. Entry 0 is not stored; the consensus wrapper
/// treats it as a known 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThresholdObfuscation {
    pub ell: u64,
    pub m: usize,
    pub k: usize,
    committed: Vec<BitString>,
    prefixes: Vec<BitString>,
    masks: Vec<u8>,
}

impl ThresholdObfuscation {
    /// Committed digest bits for entry `i` (1-based), m-1 bits.
    pub fn committed(&self, i: u64) -> &BitString {
        &self.committed[(i - 1) as usize]
    }

    /// Public prefix for entry `i` (1-based), k bits.
    pub fn prefix(&self, i: u64) -> &BitString {
        &self.prefixes[(i - 1) as usize]
    }

    /// Mask bit for entry `i` (1-based).
    pub fn mask(&self, i: u64) -> u8 {
        self.masks[(i - 1) as usize]
    }

    fn check_index(&self, i: u64) -> Result<()> {
        if i < 1 || i > self.ell {
            return Err(Error::Domain { i, ell: self.ell });
        }
        Ok(())
    }
}

/// Commit to the whole truth table of `f_T`. Prefixes and hidden suffixes
/// come from `gen`, a randomness stream independent of the oracle seed; the
/// suffixes and the threshold are discarded on return.
pub fn preprocess(
    params: &ThresholdParams,
    oracle: &mut RandomOracle,
    gen: &mut impl Rng,
) -> Result<ThresholdObfuscation> {
    params.validate()?;
    if oracle.width() != params.m {
        return Err(Error::InvalidParams(format!(
            "oracle width {} does not match m = {}",
            oracle.width(),
            params.m
        )));
    }
    let n = params.ell as usize;
    let mut committed = Vec::with_capacity(n);
    let mut prefixes = Vec::with_capacity(n);
    let mut masks = Vec::with_capacity(n);
    for i in 1..=params.ell {
        let prefix = BitString::random(gen, params.k);
        let suffix = BitString::random(gen, params.m - params.k);
        let digest = oracle.query(&prefix.concat(&suffix))?;
        committed.push(digest.prefix(params.m - 1));
        prefixes.push(prefix);
        masks.push(digest.last_bit() ^ threshold_eval(params.threshold, params.ell, i)?);
    }
    Ok(ThresholdObfuscation {
        ell: params.ell,
        m: params.m,
        k: params.k,
        committed,
        prefixes,
        masks,
    })
}

/// Mine the suffix whose digest reproduces `c_target` on the first m-1 bits.
/// Candidates are enumerated lexicographically from all-zeros, one oracle
/// query each; the first match wins.
pub fn find_suffix(
    prefix: &BitString,
    c_target: &BitString,
    oracle: &mut RandomOracle,
) -> Result<BitString> {
    let m = oracle.width();
    if prefix.len() >= m {
        return Err(Error::InvalidParams(format!(
            "prefix length {} leaves no suffix under width {m}",
            prefix.len()
        )));
    }
    let suffix_len = m - prefix.len();
    if suffix_len > 63 {
        return Err(Error::InvalidParams(format!(
            "suffix space 2^{suffix_len} is not enumerable"
        )));
    }
    if c_target.len() != m - 1 {
        return Err(Error::InvalidParams(format!(
            "target has {} bits, expected m-1 = {}",
            c_target.len(),
            m - 1
        )));
    }
    for j in 0..(1u64 << suffix_len) {
        let candidate = BitString::from_u64(j, suffix_len);
        let digest = oracle.query(&prefix.concat(&candidate))?;
        if digest.starts_with(c_target) {
            return Ok(candidate);
        }
    }
    Err(Error::NotPreprocessOutput)
}

/// Recover table entry `i`: mine the suffix, re-read the digest, and XOR its
/// last bit with the stored mask. Equals `f_T(i)` except on the per-entry
/// collision event, which has probability at most `2^-k`.
pub fn probe(obf: &ThresholdObfuscation, i: u64, oracle: &mut RandomOracle) -> Result<u8> {
    obf.check_index(i)?;
    let suffix = find_suffix(obf.prefix(i), obf.committed(i), oracle)?;
    let digest = oracle.query(&obf.prefix(i).concat(&suffix))?;
    Ok(digest.last_bit() ^ obf.mask(i))
}

/// On-disk form of an obfuscation, with the oracle backend it was generated
/// against so probes can be replayed elsewhere.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObfuscationFile {
    pub ell: u64,
    pub m: usize,
    pub k: usize,
    #[serde(rename = "C")]
    pub c: Vec<HexBits>,
    #[serde(rename = "P")]
    pub p: Vec<HexBits>,
    #[serde(rename = "V")]
    pub v: Vec<u8>,
    pub oracle_mode: OracleKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_seed: Option<u64>,
}

/// A bit string as stored in JSON: MSB-first hex plus its exact bit length.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HexBits {
    pub bits: usize,
    pub hex: String,
}

impl HexBits {
    fn encode(b: &BitString) -> Self {
        HexBits {
            bits: b.len(),
            hex: b.to_hex(),
        }
    }

    fn decode(&self, want_bits: usize) -> Result<BitString> {
        if self.bits != want_bits {
            return Err(Error::Encoding(format!(
                "entry declares {} bits, expected {want_bits}",
                self.bits
            )));
        }
        BitString::from_hex(&self.hex, self.bits)
    }
}

impl ObfuscationFile {
    pub fn new(obf: &ThresholdObfuscation, kind: OracleKind, seed: Option<u64>) -> Self {
        ObfuscationFile {
            ell: obf.ell,
            m: obf.m,
            k: obf.k,
            c: obf.committed.iter().map(HexBits::encode).collect(),
            p: obf.prefixes.iter().map(HexBits::encode).collect(),
            v: obf.masks.clone(),
            oracle_mode: kind,
            oracle_seed: seed,
        }
    }

    /// Rebuild the obfuscation and a fresh oracle instance for probing it.
    pub fn into_parts(self) -> Result<(ThresholdObfuscation, RandomOracle)> {
        let n = self.ell as usize;
        if self.c.len() != n || self.p.len() != n || self.v.len() != n {
            return Err(Error::Encoding(format!(
                "array lengths {}/{}/{} do not all equal ell = {}",
                self.c.len(),
                self.p.len(),
                self.v.len(),
                self.ell
            )));
        }
        if self.k == 0 || self.k >= self.m {
            return Err(Error::Encoding(format!(
                "stored k = {} incompatible with m = {}",
                self.k, self.m
            )));
        }
        let committed = self
            .c
            .iter()
            .map(|h| h.decode(self.m - 1))
            .collect::<Result<Vec<_>>>()?;
        let prefixes = self
            .p
            .iter()
            .map(|h| h.decode(self.k))
            .collect::<Result<Vec<_>>>()?;
        for &bit in &self.v {
            if bit > 1 {
                return Err(Error::Encoding(format!("mask entry {bit} is not a bit")));
            }
        }
        let oracle = RandomOracle::from_kind(self.oracle_mode, self.m, self.oracle_seed)?;
        Ok((
            ThresholdObfuscation {
                ell: self.ell,
                m: self.m,
                k: self.k,
                committed,
                prefixes,
                masks: self.v,
            },
            oracle,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn mk(ell: u64, t: u64, m: usize, k: usize, seed: u64) -> (ThresholdObfuscation, RandomOracle) {
        let params = ThresholdParams {
            ell,
            threshold: t,
            m,
            k,
        };
        let mut oracle = RandomOracle::ideal(m, seeds::derive_seed(seed, "oracle")).unwrap();
        let mut gen = seeds::stream(seed, "gen");
        let obf = preprocess(&params, &mut oracle, &mut gen).unwrap();
        oracle.reset_query_count();
        (obf, oracle)
    }

    #[test]
    fn threshold_eval_step() {
        assert_eq!(threshold_eval(2, 4, 1).unwrap(), 0);
        assert_eq!(threshold_eval(2, 4, 2).unwrap(), 1);
        assert_eq!(threshold_eval(3, 4, 4).unwrap(), 1);
        assert_eq!(threshold_eval(1, 4, 0).unwrap(), 0);
        assert!(matches!(
            threshold_eval(2, 4, 5),
            Err(Error::Domain { i: 5, ell: 4 })
        ));
    }

    #[test]
    fn params_validation() {
        let good = ThresholdParams {
            ell: 4,
            threshold: 2,
            m: 16,
            k: 8,
        };
        assert!(good.validate().is_ok());
        assert!(ThresholdParams { threshold: 0, ..good }.validate().is_err());
        assert!(ThresholdParams { threshold: 4, ..good }.validate().is_err());
        assert!(ThresholdParams { k: 1, ..good }.validate().is_err());
        assert!(ThresholdParams { k: 16, ..good }.validate().is_err());
        assert!(ThresholdParams { ell: 1, threshold: 0, ..good }.validate().is_err());
    }

    #[test]
    fn preprocess_output_shapes() {
        let (obf, _) = mk(4, 2, 16, 8, 1);
        assert_eq!(obf.ell, 4);
        for i in 1..=4 {
            assert_eq!(obf.committed(i).len(), 15);
            assert_eq!(obf.prefix(i).len(), 8);
            assert!(obf.mask(i) <= 1);
        }
    }

    #[test]
    fn preprocess_is_deterministic() {
        let (a, _) = mk(8, 3, 16, 8, 42);
        let (b, _) = mk(8, 3, 16, 8, 42);
        assert_eq!(a, b);
    }

    #[test]
    fn probe_round_trips_the_table() {
        // ell=8, T=5 with k large enough that collisions are negligible.
        for seed in 0..5u64 {
            let (obf, mut oracle) = mk(8, 5, 24, 16, seed);
            for i in 1..=8 {
                let expect = threshold_eval(5, 8, i).unwrap();
                assert_eq!(probe(&obf, i, &mut oracle).unwrap(), expect, "entry {i}");
            }
            assert_eq!(probe(&obf, 4, &mut oracle).unwrap(), 0);
            assert_eq!(probe(&obf, 5, &mut oracle).unwrap(), 1);
        }
    }

    #[test]
    fn probe_rejects_out_of_range() {
        let (obf, mut oracle) = mk(4, 2, 16, 8, 1);
        assert!(matches!(probe(&obf, 0, &mut oracle), Err(Error::Domain { .. })));
        assert!(matches!(probe(&obf, 5, &mut oracle), Err(Error::Domain { .. })));
    }

    #[test]
    fn probe_is_deterministic_with_stable_cost() {
        let (obf, mut oracle) = mk(8, 3, 20, 12, 9);
        let before = oracle.query_count();
        let first = probe(&obf, 6, &mut oracle).unwrap();
        let first_cost = oracle.query_count() - before;
        let mid = oracle.query_count();
        let second = probe(&obf, 6, &mut oracle).unwrap();
        let second_cost = oracle.query_count() - mid;
        assert_eq!(first, second);
        assert_eq!(first_cost, second_cost);
        // Exhaustive enumeration plus the final re-read.
        assert!(first_cost <= (1 << 8) + 1);
    }

    #[test]
    fn find_suffix_returns_planted_match() {
        let m = 20;
        let k = 12;
        let mut oracle = RandomOracle::ideal(m, 77).unwrap();
        let mut gen = ChaCha12Rng::seed_from_u64(3);
        let prefix = BitString::random(&mut gen, k);
        let planted = BitString::random(&mut gen, m - k);
        let digest = oracle.query(&prefix.concat(&planted)).unwrap();
        let target = digest.prefix(m - 1);
        // No earlier collision at this seed, so the planted suffix comes back.
        let mut scan = RandomOracle::ideal(m, 77).unwrap();
        let hit = find_suffix(&prefix, &target, &mut scan).unwrap();
        assert_eq!(hit, planted);
        assert!(scan.query_count() <= 1 << (m - k));
    }

    #[test]
    fn find_suffix_exhaustion_errors() {
        // Enumerate every digest prefix the 2^8 suffixes can reach, pick a
        // target outside that set, and expect the search to fail after
        // sweeping the whole space.
        let m = 12;
        let k = 4;
        let prefix = BitString::from_u64(0b1010, k);
        let mut reachable = std::collections::HashSet::new();
        let mut scan = RandomOracle::ideal(m, 5).unwrap();
        for j in 0..(1u64 << (m - k)) {
            let d = scan
                .query(&prefix.concat(&BitString::from_u64(j, m - k)))
                .unwrap();
            reachable.insert(d.prefix(m - 1).to_u64());
        }
        let missing = (0..(1u64 << (m - 1)))
            .find(|t| !reachable.contains(t))
            .unwrap();
        let target = BitString::from_u64(missing, m - 1);
        let mut oracle = RandomOracle::ideal(m, 5).unwrap();
        let err = find_suffix(&prefix, &target, &mut oracle).unwrap_err();
        assert!(matches!(err, Error::NotPreprocessOutput));
        // Query cost of a failed search is the whole suffix space.
        assert_eq!(oracle.query_count(), 1 << (m - k));
    }

    #[test]
    fn find_suffix_mean_cost_is_half_the_space() {
        // Match position is uniform, so the mean query count over many
        // (seed, entry) pairs approaches (2^(m-k)+1)/2; allow 10%.
        let m = 22;
        let k = 12; // m-k = 10
        let mut total = 0u64;
        let mut samples = 0u64;
        for seed in 0..50u64 {
            let (obf, mut oracle) = mk(16, 7, m, k, seed);
            for i in 1..=10u64 {
                let before = oracle.query_count();
                find_suffix(obf.prefix(i), obf.committed(i), &mut oracle).unwrap();
                total += oracle.query_count() - before;
                samples += 1;
            }
        }
        let mean = total as f64 / samples as f64;
        let ideal = f64::from((1u32 << 10) + 1) / 2.0;
        assert!(
            (mean - ideal).abs() <= 0.10 * ideal,
            "mean suffix cost {mean} not within 10% of {ideal} over {samples} samples"
        );
    }

    #[test]
    fn recovered_table_is_monotone() {
        for seed in 0..10u64 {
            let (obf, mut oracle) = mk(32, 1 + seed % 31, 24, 16, seed);
            let bits: Vec<u8> = (1..=32)
                .map(|i| probe(&obf, i, &mut oracle).unwrap())
                .collect();
            let mut sorted = bits.clone();
            sorted.sort_unstable();
            assert_eq!(bits, sorted, "non-monotone recovered table at seed {seed}");
        }
    }

    #[test]
    fn file_round_trip() {
        let (obf, _) = mk(8, 3, 16, 8, 4);
        let file = ObfuscationFile::new(&obf, OracleKind::Ideal, Some(123));
        let json = serde_json::to_string(&file).unwrap();
        let parsed: ObfuscationFile = serde_json::from_str(&json).unwrap();
        let (back, oracle) = parsed.into_parts().unwrap();
        assert_eq!(back, obf);
        assert_eq!(oracle.width(), 16);
        assert_eq!(oracle.mode(), crate::oracle::OracleMode::Ideal { seed: 123 });
    }

    #[test]
    fn file_rejects_inconsistent_shapes() {
        let (obf, _) = mk(4, 2, 16, 8, 4);
        let mut file = ObfuscationFile::new(&obf, OracleKind::Ideal, Some(1));
        file.v.pop();
        assert!(file.into_parts().is_err());

        let mut file = ObfuscationFile::new(&obf, OracleKind::Ideal, Some(1));
        file.c[0].bits = 14;
        assert!(file.into_parts().is_err());

        // Ideal mode without a seed cannot rebuild its oracle.
        let file = ObfuscationFile::new(&obf, OracleKind::Ideal, None);
        assert!(file.into_parts().is_err());
    }

    #[test]
    fn second_full_match_rate_within_bound() {
        // m=12, k=4: the chance that some other suffix reproduces the whole
        // digest is at most 2^-k; check over 10_000 trials with 3 sigma.
        let m = 12;
        let k = 4;
        let trials = 10_000u64;
        let mut hits = 0u64;
        for t in 0..trials {
            let mut oracle = RandomOracle::ideal(m, t).unwrap();
            let mut gen = ChaCha12Rng::seed_from_u64(t ^ 0x5eed);
            let prefix = BitString::random(&mut gen, k);
            let suffix = BitString::random(&mut gen, m - k);
            let reference = oracle.query(&prefix.concat(&suffix)).unwrap();
            for j in 0..(1u64 << (m - k)) {
                let candidate = BitString::from_u64(j, m - k);
                if candidate == suffix {
                    continue;
                }
                if oracle.query(&prefix.concat(&candidate)).unwrap() == reference {
                    hits += 1;
                    break;
                }
            }
        }
        let p = 2f64.powi(-(k as i32));
        let sigma = (p * (1.0 - p) / trials as f64).sqrt();
        let freq = hits as f64 / trials as f64;
        assert!(
            freq <= p + 3.0 * sigma,
            "second-match frequency {freq} above {p} + 3 sigma"
        );
    }

    #[test]
    fn whole_table_matches_eval_at_desk_scale() {
        // Exhaustive correctness at ell=64, k=16, m=24 across 50 seeds; the
        // per-run collision budget ell * 2^-k makes mismatches vanishingly
        // rare at these parameters.
        let mut bad_runs = 0;
        for seed in 0..50u64 {
            let t = 1 + seed % 63;
            let (obf, mut oracle) = mk(64, t, 24, 16, seed);
            let mut clean = true;
            for i in 1..=64 {
                if probe(&obf, i, &mut oracle).unwrap() != threshold_eval(t, 64, i).unwrap() {
                    clean = false;
                }
            }
            if !clean {
                bad_runs += 1;
            }
        }
        assert_eq!(bad_runs, 0, "{bad_runs} runs had probe/eval mismatches");
    }
}
