//! The (n, m, 2) Bell scenario, canonical indexing of (outcome, setting)
//! pairs, and behaviour vectors.
//!
//! Flat layout is setting-major: the `m^n` setting tuples form consecutive
//! blocks of `2^n` outcome entries. Both tuples are ranked big-endian
//! lexicographically with party 1 most significant, so
//! `index = lex(x) * 2^n + lex(a)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Block-sum tolerance for probability and frequency vectors.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// An (n, m, 2) configuration: `n` parties, `m` settings each, binary outcomes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawScenario")]
pub struct Scenario {
    n: usize,
    m: usize,
}

#[derive(Deserialize)]
struct RawScenario {
    n: usize,
    m: usize,
}

impl TryFrom<RawScenario> for Scenario {
    type Error = Error;
    fn try_from(raw: RawScenario) -> Result<Self> {
        Scenario::new(raw.n, raw.m)
    }
}

impl Scenario {
    /// Largest supported party count; subsets are stored as `u32` masks and
    /// dense vectors of length `(2m)^n` must stay addressable.
    pub const MAX_PARTIES: usize = 16;

    pub fn new(n: usize, m: usize) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::Domain(format!(
                "scenario needs n >= 1 and m >= 1, got n={n}, m={m}"
            )));
        }
        if n > Self::MAX_PARTIES {
            return Err(Error::Domain(format!(
                "at most {} parties are supported, got {n}",
                Self::MAX_PARTIES
            )));
        }
        (2 * m)
            .checked_pow(n as u32)
            .ok_or_else(|| Error::Domain(format!("(2m)^n overflows for n={n}, m={m}")))?;
        Ok(Scenario { n, m })
    }

    pub fn parties(&self) -> usize {
        self.n
    }

    pub fn settings(&self) -> usize {
        self.m
    }

    /// Ambient dimension `d = (2m)^n`.
    pub fn dim(&self) -> usize {
        (2 * self.m).pow(self.n as u32)
    }

    /// Number of setting tuples, `m^n`.
    pub fn setting_blocks(&self) -> usize {
        self.m.pow(self.n as u32)
    }

    /// Number of outcome tuples per setting block, `2^n`.
    pub fn block_len(&self) -> usize {
        1 << self.n
    }

    /// Number of no-signalling rows, `n (m-1) (2m)^(n-1)`.
    pub fn nosig_rows(&self) -> usize {
        self.n * (self.m - 1) * (2 * self.m).pow(self.n as u32 - 1)
    }

    /// Total constraint rows `t = m^n + n (m-1) (2m)^(n-1)`.
    pub fn constraint_rows(&self) -> usize {
        self.setting_blocks() + self.nosig_rows()
    }

    /// Number of correlator keys including the empty subset, `(m+1)^n`.
    pub fn correlator_count(&self) -> usize {
        (self.m + 1).pow(self.n as u32)
    }

    /// Dimension of the kernel of the constraint matrix, `(m+1)^n - 1`.
    pub fn kernel_dim(&self) -> usize {
        self.correlator_count() - 1
    }

    /// Number of party subsets, `2^n`.
    pub fn subset_count(&self) -> usize {
        1 << self.n
    }

    pub fn check_outcomes(&self, a: &[u8]) -> Result<()> {
        if a.len() != self.n {
            return Err(Error::Domain(format!(
                "outcome tuple has length {}, expected {}",
                a.len(),
                self.n
            )));
        }
        for (i, &ai) in a.iter().enumerate() {
            if ai > 1 {
                return Err(Error::Domain(format!(
                    "outcome a{} = {ai} is not in {{0, 1}}",
                    i + 1
                )));
            }
        }
        Ok(())
    }

    pub fn check_settings(&self, x: &[usize]) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::Domain(format!(
                "setting tuple has length {}, expected {}",
                x.len(),
                self.n
            )));
        }
        for (i, &xi) in x.iter().enumerate() {
            if xi >= self.m {
                return Err(Error::Domain(format!(
                    "setting x{} = {xi} is not in 0..{}",
                    i + 1,
                    self.m
                )));
            }
        }
        Ok(())
    }

    /// Lexicographic rank of a setting tuple (party 1 most significant).
    pub fn setting_rank(&self, x: &[usize]) -> usize {
        x.iter().fold(0, |acc, &xi| acc * self.m + xi)
    }

    /// Inverse of [`Scenario::setting_rank`].
    pub fn setting_tuple(&self, rank: usize) -> Vec<usize> {
        let mut x = vec![0; self.n];
        let mut r = rank;
        for slot in x.iter_mut().rev() {
            *slot = r % self.m;
            r /= self.m;
        }
        x
    }

    /// Lexicographic rank of an outcome tuple (party 1 most significant).
    pub fn outcome_rank(&self, a: &[u8]) -> usize {
        a.iter().fold(0, |acc, &ai| (acc << 1) | ai as usize)
    }

    /// Inverse of [`Scenario::outcome_rank`].
    pub fn outcome_tuple(&self, rank: usize) -> Vec<u8> {
        (0..self.n)
            .map(|i| ((rank >> (self.n - 1 - i)) & 1) as u8)
            .collect()
    }

    /// Party-indexed bitmask of an outcome rank: bit `i-1` holds `a_i`.
    pub fn outcome_mask(&self, rank: usize) -> u32 {
        let mut mask = 0u32;
        for i in 0..self.n {
            if (rank >> (self.n - 1 - i)) & 1 == 1 {
                mask |= 1 << i;
            }
        }
        mask
    }

    /// Flat index of `(a, x)`.
    pub fn encode_index(&self, a: &[u8], x: &[usize]) -> Result<usize> {
        self.check_outcomes(a)?;
        self.check_settings(x)?;
        Ok(self.setting_rank(x) * self.block_len() + self.outcome_rank(a))
    }

    /// Inverse of [`Scenario::encode_index`].
    pub fn decode_index(&self, idx: usize) -> Result<(Vec<u8>, Vec<usize>)> {
        let dim = self.dim();
        if idx >= dim {
            return Err(Error::IndexOutOfRange { index: idx, dim });
        }
        let block = self.block_len();
        Ok((
            self.outcome_tuple(idx % block),
            self.setting_tuple(idx / block),
        ))
    }

    pub(crate) fn ensure_same(&self, other: &Scenario) -> Result<()> {
        if self != other {
            return Err(Error::ScenarioMismatch {
                expected_n: self.n,
                expected_m: self.m,
                got_n: other.n,
                got_m: other.m,
            });
        }
        Ok(())
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, 2)", self.n, self.m)
    }
}

/// A subset of parties, stored as a bitmask with party `i` (1-based) at bit `i-1`.
///
/// Subsets enumerate in mask order, which for two parties is
/// `{}, {1}, {2}, {1,2}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PartySubset(u32);

impl PartySubset {
    pub fn empty() -> Self {
        PartySubset(0)
    }

    pub fn full(n: usize) -> Self {
        PartySubset(((1u64 << n) - 1) as u32)
    }

    /// Builds a subset from 1-based party indices, which must be strictly increasing.
    pub fn new(members: &[usize], n: usize) -> Result<Self> {
        let mut mask = 0u32;
        let mut prev = 0;
        for &p in members {
            if p == 0 || p > n {
                return Err(Error::Domain(format!("party {p} is not in 1..={n}")));
            }
            if p <= prev {
                return Err(Error::Domain(format!(
                    "party subset {members:?} is not strictly increasing"
                )));
            }
            prev = p;
            mask |= 1 << (p - 1);
        }
        Ok(PartySubset(mask))
    }

    pub fn from_mask(mask: u32) -> Self {
        PartySubset(mask)
    }

    pub fn mask(&self) -> u32 {
        self.0
    }

    /// 1-based party indices in increasing order.
    pub fn members(&self) -> Vec<usize> {
        (0..32)
            .filter(|i| self.0 >> i & 1 == 1)
            .map(|i| i + 1)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    /// Membership test for a 1-based party index.
    pub fn contains(&self, party: usize) -> bool {
        party >= 1 && self.0 >> (party - 1) & 1 == 1
    }

    /// All `2^n` subsets in mask order.
    pub fn all(n: usize) -> impl Iterator<Item = PartySubset> {
        (0..1u32 << n).map(PartySubset)
    }
}

impl std::fmt::Display for PartySubset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.members().iter().map(|p| p.to_string()).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

/// What a behaviour vector is allowed to contain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    /// Nonnegative, every setting block sums to one.
    Probability,
    /// Empirical relative frequencies; same constraints as `Probability`.
    Frequency,
    /// Any real vector, e.g. an affine projection before refinement.
    Unconstrained,
}

/// A vector of settings-conditional outcome probabilities (or frequencies)
/// in canonical flat order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBehavior")]
pub struct BehaviorVector {
    scenario: Scenario,
    role: Role,
    entries: Vec<f64>,
}

#[derive(Deserialize)]
struct RawBehavior {
    scenario: Scenario,
    #[serde(default = "default_role")]
    role: Role,
    entries: Vec<f64>,
}

fn default_role() -> Role {
    Role::Unconstrained
}

impl TryFrom<RawBehavior> for BehaviorVector {
    type Error = Error;
    fn try_from(raw: RawBehavior) -> Result<Self> {
        BehaviorVector::new(raw.scenario, raw.entries, raw.role)
    }
}

impl BehaviorVector {
    pub fn new(scenario: Scenario, entries: Vec<f64>, role: Role) -> Result<Self> {
        if entries.len() != scenario.dim() {
            return Err(Error::DimensionMismatch {
                expected: scenario.dim(),
                got: entries.len(),
            });
        }
        if let Some(i) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidBehavior(format!("entry {i} is not finite")));
        }
        let v = BehaviorVector {
            scenario,
            role,
            entries,
        };
        if role != Role::Unconstrained {
            v.validate_normalized()?;
        }
        Ok(v)
    }

    /// Wraps any real vector of the right length.
    pub fn unconstrained(scenario: Scenario, entries: Vec<f64>) -> Result<Self> {
        Self::new(scenario, entries, Role::Unconstrained)
    }

    fn validate_normalized(&self) -> Result<()> {
        if let Some(i) = self.entries.iter().position(|&v| v < 0.0) {
            return Err(Error::InvalidBehavior(format!(
                "entry {i} is negative ({:e})",
                self.entries[i]
            )));
        }
        for (x, sum) in self.block_sums().into_iter().enumerate() {
            if (sum - 1.0).abs() > NORMALIZATION_TOL {
                return Err(Error::InvalidBehavior(format!(
                    "setting block {:?} sums to {sum}",
                    self.scenario.setting_tuple(x)
                )));
            }
        }
        Ok(())
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<f64> {
        self.entries
    }

    /// Re-labels the vector, validating the new role.
    pub fn with_role(self, role: Role) -> Result<Self> {
        Self::new(self.scenario, self.entries, role)
    }

    pub fn get(&self, a: &[u8], x: &[usize]) -> Result<f64> {
        Ok(self.entries[self.scenario.encode_index(a, x)?])
    }

    /// The `2^n` entries of setting block `rank`.
    pub fn block(&self, rank: usize) -> &[f64] {
        let len = self.scenario.block_len();
        &self.entries[rank * len..(rank + 1) * len]
    }

    pub fn block_sums(&self) -> Vec<f64> {
        self.entries
            .chunks(self.scenario.block_len())
            .map(|b| b.iter().sum())
            .collect()
    }

    pub fn min_entry(&self) -> f64 {
        self.entries.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Flag raised on projector outputs that left the nonnegative orthant.
    pub fn has_negative_entries(&self) -> bool {
        self.min_entry() < -NORMALIZATION_TOL
    }

    pub fn dot(&self, coefficients: &[f64]) -> f64 {
        self.entries
            .iter()
            .zip(coefficients)
            .map(|(p, c)| p * c)
            .sum()
    }

    pub fn max_abs_diff(&self, other: &BehaviorVector) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// The outcome-uniform behaviour, every entry `1/2^n`.
pub fn uniform_behavior(scenario: Scenario) -> BehaviorVector {
    let value = 1.0 / scenario.block_len() as f64;
    BehaviorVector {
        scenario,
        role: Role::Probability,
        entries: vec![value; scenario.dim()],
    }
}

/// The behaviour of a deterministic local strategy: `strategy[i][x]` is the
/// outcome party `i+1` returns for setting `x`.
pub fn deterministic_behavior(scenario: Scenario, strategy: &[Vec<u8>]) -> Result<BehaviorVector> {
    if strategy.len() != scenario.parties()
        || strategy.iter().any(|s| s.len() != scenario.settings())
    {
        return Err(Error::Domain(
            "strategy must give one outcome per party and setting".into(),
        ));
    }
    let mut entries = vec![0.0; scenario.dim()];
    for xr in 0..scenario.setting_blocks() {
        let x = scenario.setting_tuple(xr);
        let a: Vec<u8> = x
            .iter()
            .enumerate()
            .map(|(i, &xi)| strategy[i][xi])
            .collect();
        entries[scenario.encode_index(&a, &x)?] = 1.0;
    }
    BehaviorVector::new(scenario, entries, Role::Probability)
}

/// Enumerates all `2^(m n)` deterministic local strategies.
pub fn deterministic_strategies(scenario: Scenario) -> impl Iterator<Item = Vec<Vec<u8>>> {
    let (n, m) = (scenario.parties(), scenario.settings());
    let total = 1u64 << (n * m);
    (0..total).map(move |code| {
        (0..n)
            .map(|i| (0..m).map(|x| ((code >> (i * m + x)) & 1) as u8).collect())
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scn(n: usize, m: usize) -> Scenario {
        Scenario::new(n, m).unwrap()
    }

    #[test]
    fn encode_examples() {
        let s = scn(2, 2);
        assert_eq!(s.encode_index(&[0, 0], &[0, 0]).unwrap(), 0);
        assert_eq!(s.encode_index(&[1, 1], &[1, 1]).unwrap(), 15);
        assert_eq!(s.encode_index(&[0, 1], &[1, 0]).unwrap(), 9);
    }

    #[test]
    fn decode_examples() {
        let s = scn(2, 2);
        assert_eq!(s.decode_index(0).unwrap(), (vec![0, 0], vec![0, 0]));
        assert_eq!(s.decode_index(9).unwrap(), (vec![0, 1], vec![1, 0]));
        let s = scn(2, 3);
        assert_eq!(s.dim(), 36);
        assert_eq!(s.decode_index(35).unwrap(), (vec![1, 1], vec![2, 2]));
        assert!(matches!(
            s.decode_index(36),
            Err(Error::IndexOutOfRange { index: 36, dim: 36 })
        ));
    }

    #[test]
    fn encode_rejects_bad_coordinates() {
        let s = scn(2, 2);
        let err = s.encode_index(&[0, 2], &[0, 0]).unwrap_err().to_string();
        assert!(err.contains("a2"), "{err}");
        let err = s.encode_index(&[0, 0], &[0, 5]).unwrap_err().to_string();
        assert!(err.contains("x2"), "{err}");
        assert!(s.encode_index(&[0], &[0, 0]).is_err());
    }

    #[test]
    fn encode_decode_bijective() {
        for (n, m) in [(2, 2), (2, 3), (3, 2), (3, 3)] {
            let s = scn(n, m);
            for idx in 0..s.dim() {
                let (a, x) = s.decode_index(idx).unwrap();
                assert_eq!(s.encode_index(&a, &x).unwrap(), idx);
            }
        }
    }

    #[test]
    fn derived_counts() {
        let s = scn(2, 2);
        assert_eq!((s.dim(), s.constraint_rows(), s.kernel_dim()), (16, 12, 8));
        let s = scn(3, 3);
        assert_eq!((s.dim(), s.constraint_rows()), (216, 243));
        assert!(Scenario::new(0, 2).is_err());
        assert!(Scenario::new(2, 0).is_err());
    }

    #[test]
    fn uniform_examples() {
        let u = uniform_behavior(scn(2, 2));
        assert!(u.entries().iter().all(|&v| v == 0.25));
        let u = uniform_behavior(scn(3, 2));
        assert_eq!(u.entries().len(), 64);
        assert!(u.entries().iter().all(|&v| v == 0.125));
        for (n, m) in [(1, 4), (2, 3), (3, 3)] {
            assert!(uniform_behavior(scn(n, m))
                .block_sums()
                .iter()
                .all(|&s| s == 1.0));
        }
    }

    #[test]
    fn party_subsets() {
        let s = PartySubset::new(&[1, 3], 3).unwrap();
        assert_eq!(s.mask(), 0b101);
        assert_eq!(s.members(), vec![1, 3]);
        assert!(s.contains(3) && !s.contains(2));
        assert!(PartySubset::new(&[2, 1], 3).is_err());
        assert!(PartySubset::new(&[4], 3).is_err());
        let order: Vec<Vec<usize>> = PartySubset::all(2).map(|s| s.members()).collect();
        assert_eq!(order, vec![vec![], vec![1], vec![2], vec![1, 2]]);
    }

    #[test]
    fn probability_role_is_validated() {
        let s = scn(1, 1);
        assert!(BehaviorVector::new(s, vec![0.5, 0.5], Role::Probability).is_ok());
        assert!(BehaviorVector::new(s, vec![0.6, 0.5], Role::Probability).is_err());
        assert!(BehaviorVector::new(s, vec![1.5, -0.5], Role::Frequency).is_err());
        assert!(BehaviorVector::new(s, vec![1.5, -0.5], Role::Unconstrained).is_ok());
        assert!(BehaviorVector::new(s, vec![1.0], Role::Unconstrained).is_err());
    }

    #[test]
    fn deterministic_strategy_count() {
        let s = scn(2, 3);
        assert_eq!(deterministic_strategies(s).count(), 64);
        let strat = vec![vec![0, 1, 1], vec![1, 0, 0]];
        let p = deterministic_behavior(s, &strat).unwrap();
        assert_eq!(p.get(&[1, 1], &[2, 0]).unwrap(), 1.0);
        assert_eq!(p.get(&[0, 1], &[2, 0]).unwrap(), 0.0);
        assert_eq!(p.get(&[1, 0], &[2, 1]).unwrap(), 1.0);
    }
}
