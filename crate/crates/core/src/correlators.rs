//! Parity functions, per-setting correlators, uniformly-averaged marginal
//! correlators (UMCs), their coefficient vectors, and the inverse map from
//! correlators back to probabilities.
//!
//! Correlator keys give every party either "absent" or one of its `m`
//! settings, so there are `(m+1)^n` keys including the empty subset. Keys
//! are ranked lexicographically with party 1 most significant and
//! "absent" ordered before setting 0.
//!
//! The numeric kernels are generic over [`Scalar`] so the same code runs in
//! `f64` and in exact rationals.

use num_rational::Ratio;
use num_traits::{FromPrimitive, Num};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{BehaviorVector, PartySubset, Scenario};

/// Field-like scalar usable by the generic correlator kernels.
pub trait Scalar: Clone + Num + FromPrimitive + std::fmt::Debug {}
impl<T: Clone + Num + FromPrimitive + std::fmt::Debug> Scalar for T {}

/// Exact rational scalar used by tests and fixture checks.
pub type Rational = Ratio<i64>;

pub(crate) fn scalar<T: Scalar>(v: i64) -> T {
    T::from_i64(v).expect("small integers are representable")
}

/// `(-1)^(XOR of a_i over i in I)`; `+1` for the empty subset.
pub fn parity(subset: PartySubset, a: &[u8]) -> i8 {
    let ones = subset
        .members()
        .iter()
        .filter(|&&p| a.get(p - 1).copied().unwrap_or(0) == 1)
        .count();
    if ones % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Parity from party-indexed bitmasks.
#[inline]
pub(crate) fn chi(subset_mask: u32, outcome_mask: u32) -> i64 {
    if (subset_mask & outcome_mask).count_ones().is_multiple_of(2) {
        1
    } else {
        -1
    }
}

/// A correlator key: a party subset and the settings of its members.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CorrelatorKey {
    pub subset: PartySubset,
    /// Settings of the members of `subset`, in party order.
    pub settings: Vec<usize>,
}

impl CorrelatorKey {
    pub fn new(scenario: Scenario, subset: PartySubset, settings: Vec<usize>) -> Result<Self> {
        let n = scenario.parties();
        if subset.mask() >> n != 0 {
            return Err(Error::Domain(format!(
                "subset {subset} exceeds {n} parties"
            )));
        }
        if settings.len() != subset.len() {
            return Err(Error::Domain(format!(
                "subset {subset} needs {} settings, got {}",
                subset.len(),
                settings.len()
            )));
        }
        if let Some(&x) = settings.iter().find(|&&x| x >= scenario.settings()) {
            return Err(Error::Domain(format!(
                "setting {x} is not in 0..{}",
                scenario.settings()
            )));
        }
        Ok(CorrelatorKey { subset, settings })
    }

    pub fn empty() -> Self {
        CorrelatorKey {
            subset: PartySubset::empty(),
            settings: Vec::new(),
        }
    }

    /// Position in the canonical key order.
    pub fn rank(&self, scenario: Scenario) -> usize {
        let base = scenario.settings() + 1;
        let mut it = self.settings.iter();
        (1..=scenario.parties()).fold(0, |acc, p| {
            let digit = if self.subset.contains(p) {
                it.next().expect("validated") + 1
            } else {
                0
            };
            acc * base + digit
        })
    }

    pub fn from_rank(scenario: Scenario, rank: usize) -> Self {
        let base = scenario.settings() + 1;
        let n = scenario.parties();
        let mut digits = vec![0; n];
        let mut r = rank;
        for d in digits.iter_mut().rev() {
            *d = r % base;
            r /= base;
        }
        let mut mask = 0u32;
        let mut settings = Vec::new();
        for (i, &d) in digits.iter().enumerate() {
            if d > 0 {
                mask |= 1 << i;
                settings.push(d - 1);
            }
        }
        CorrelatorKey {
            subset: PartySubset::from_mask(mask),
            settings,
        }
    }

    /// Key obtained by restricting a full setting tuple to `subset`.
    pub fn restrict(subset: PartySubset, x: &[usize]) -> Self {
        let settings = subset.members().iter().map(|&p| x[p - 1]).collect();
        CorrelatorKey { subset, settings }
    }
}

impl std::fmt::Display for CorrelatorKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "C{}{:?}", self.subset, self.settings)
    }
}

/// Rank of the key `(subset, x restricted to subset)` without allocating.
#[inline]
pub(crate) fn restricted_rank(scenario: Scenario, subset_mask: u32, x: &[usize]) -> usize {
    let base = scenario.settings() + 1;
    x.iter().enumerate().fold(0, |acc, (i, &xi)| {
        let digit = if subset_mask >> i & 1 == 1 { xi + 1 } else { 0 };
        acc * base + digit
    })
}

/// `C^I_x = sum_a chi_I(a) v(a|x)`, laid out as `x_rank * 2^n + subset_mask`.
pub fn settingwise_values<T: Scalar>(scenario: Scenario, v: &[T]) -> Vec<T> {
    let block = scenario.block_len();
    let masks: Vec<u32> = (0..block).map(|a| scenario.outcome_mask(a)).collect();
    let mut out = Vec::with_capacity(scenario.dim());
    for xr in 0..scenario.setting_blocks() {
        let entries = &v[xr * block..(xr + 1) * block];
        for subset in 0..block as u32 {
            let mut acc = T::zero();
            for (a, p) in entries.iter().enumerate() {
                if chi(subset, masks[a]) == 1 {
                    acc = acc + p.clone();
                } else {
                    acc = acc - p.clone();
                }
            }
            out.push(acc);
        }
    }
    out
}

/// Averages settingwise correlators over the settings of absent parties.
///
/// With `weights = None` the average is uniform (the UMC). Otherwise each
/// setting tuple `x` (by rank) contributes with weight `weights[x]`.
pub fn average_settingwise<T: Scalar>(
    scenario: Scenario,
    settingwise: &[T],
    weights: Option<&[T]>,
) -> Vec<T> {
    let keys = scenario.correlator_count();
    let block = scenario.block_len();
    let mut acc = vec![T::zero(); keys];
    let mut norm = vec![T::zero(); keys];
    for xr in 0..scenario.setting_blocks() {
        let x = scenario.setting_tuple(xr);
        let w = weights.map_or_else(T::one, |w| w[xr].clone());
        for subset in 0..block as u32 {
            let k = restricted_rank(scenario, subset, &x);
            acc[k] = acc[k].clone() + w.clone() * settingwise[xr * block + subset as usize].clone();
            norm[k] = norm[k].clone() + w.clone();
        }
    }
    acc.into_iter().zip(norm).map(|(a, z)| a / z).collect()
}

/// UMC values of `v` in canonical key order.
pub fn umc_values<T: Scalar>(scenario: Scenario, v: &[T]) -> Vec<T> {
    average_settingwise(scenario, &settingwise_values(scenario, v), None)
}

/// `p(a|x) = 2^-n sum_I chi_I(a) C[I, x_I]` for a dense key-ordered table.
pub fn reconstruct_values<T: Scalar>(scenario: Scenario, table: &[T]) -> Vec<T> {
    let block = scenario.block_len();
    let masks: Vec<u32> = (0..block).map(|a| scenario.outcome_mask(a)).collect();
    let scale: T = scalar(block as i64);
    let mut out = Vec::with_capacity(scenario.dim());
    for xr in 0..scenario.setting_blocks() {
        let x = scenario.setting_tuple(xr);
        let column: Vec<T> = (0..block as u32)
            .map(|s| table[restricted_rank(scenario, s, &x)].clone())
            .collect();
        for &amask in &masks {
            let mut acc = T::zero();
            for (s, c) in column.iter().enumerate() {
                if chi(s as u32, amask) == 1 {
                    acc = acc + c.clone();
                } else {
                    acc = acc - c.clone();
                }
            }
            out.push(acc / scale.clone());
        }
    }
    out
}

/// Per-setting correlators `C^I_x` for every subset and setting tuple.
#[derive(Debug, Clone, PartialEq)]
pub struct SettingwiseCorrelators {
    scenario: Scenario,
    values: Vec<f64>,
}

impl SettingwiseCorrelators {
    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    /// Values laid out as `x_rank * 2^n + subset_mask`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, subset: PartySubset, x: &[usize]) -> Result<f64> {
        self.scenario.check_settings(x)?;
        if subset.mask() >> self.scenario.parties() != 0 {
            return Err(Error::Domain(format!("subset {subset} out of range")));
        }
        Ok(self.values
            [self.scenario.setting_rank(x) * self.scenario.block_len() + subset.mask() as usize])
    }
}

pub fn settingwise_correlators(v: &BehaviorVector) -> SettingwiseCorrelators {
    let scenario = v.scenario();
    SettingwiseCorrelators {
        scenario,
        values: settingwise_values(scenario, v.entries()),
    }
}

/// A complete table of correlator values over all `(m+1)^n` keys.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelatorTable {
    scenario: Scenario,
    values: Vec<f64>,
}

impl CorrelatorTable {
    /// Wraps a dense, key-ordered value vector.
    pub fn from_dense(scenario: Scenario, values: Vec<f64>) -> Result<Self> {
        if values.len() != scenario.correlator_count() {
            return Err(Error::DimensionMismatch {
                expected: scenario.correlator_count(),
                got: values.len(),
            });
        }
        Ok(CorrelatorTable { scenario, values })
    }

    /// Builds a table from explicit entries; every key must appear exactly once.
    pub fn from_entries(
        scenario: Scenario,
        entries: impl IntoIterator<Item = (CorrelatorKey, f64)>,
    ) -> Result<Self> {
        let count = scenario.correlator_count();
        let mut values = vec![None; count];
        for (key, value) in entries {
            let key = CorrelatorKey::new(scenario, key.subset, key.settings)?;
            let slot = &mut values[key.rank(scenario)];
            if slot.is_some() {
                return Err(Error::DuplicateKey(key.to_string()));
            }
            *slot = Some(value);
        }
        let missing: Vec<String> = values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_none())
            .map(|(r, _)| CorrelatorKey::from_rank(scenario, r).to_string())
            .collect();
        if !missing.is_empty() {
            return Err(Error::IncompleteTable(missing));
        }
        Ok(CorrelatorTable {
            scenario,
            values: values.into_iter().map(|v| v.expect("checked")).collect(),
        })
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, subset: PartySubset, settings: &[usize]) -> Result<f64> {
        let key = CorrelatorKey::new(self.scenario, subset, settings.to_vec())?;
        Ok(self.values[key.rank(self.scenario)])
    }

    pub fn iter(&self) -> impl Iterator<Item = (CorrelatorKey, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(|(r, &v)| (CorrelatorKey::from_rank(self.scenario, r), v))
    }
}

#[derive(Serialize, Deserialize)]
struct TableEntryJson {
    #[serde(rename = "I")]
    subset: Vec<usize>,
    #[serde(rename = "xI")]
    settings: Vec<usize>,
    value: f64,
}

#[derive(Serialize, Deserialize)]
struct TableJson {
    scenario: Scenario,
    entries: Vec<TableEntryJson>,
}

impl Serialize for CorrelatorTable {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        TableJson {
            scenario: self.scenario,
            entries: self
                .iter()
                .map(|(k, value)| TableEntryJson {
                    subset: k.subset.members(),
                    settings: k.settings,
                    value,
                })
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for CorrelatorTable {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let raw = TableJson::deserialize(deserializer)?;
        let n = raw.scenario.parties();
        let entries = raw
            .entries
            .into_iter()
            .map(|e| {
                let subset = PartySubset::new(&e.subset, n)?;
                Ok((
                    CorrelatorKey::new(raw.scenario, subset, e.settings)?,
                    e.value,
                ))
            })
            .collect::<Result<Vec<_>>>()
            .map_err(serde::de::Error::custom)?;
        CorrelatorTable::from_entries(raw.scenario, entries).map_err(serde::de::Error::custom)
    }
}

/// Uniformly-averaged marginal correlators of `v`, including the empty key.
pub fn umc(v: &BehaviorVector) -> CorrelatorTable {
    let scenario = v.scenario();
    CorrelatorTable {
        scenario,
        values: umc_values(scenario, v.entries()),
    }
}

/// The coefficient vector `c` with `c . v = UMC[I, x_I](v)` for every `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct UmcCoefficientVector {
    pub scenario: Scenario,
    pub key: CorrelatorKey,
    pub entries: Vec<f64>,
}

impl UmcCoefficientVector {
    /// Integer numerators over the common denominator `m^(n-|I|)`.
    pub fn scaled_integers(&self) -> (Vec<i64>, i64) {
        umc_coefficient_integers(self.scenario, &self.key)
    }
}

fn umc_coefficient_integers(scenario: Scenario, key: &CorrelatorKey) -> (Vec<i64>, i64) {
    let n = scenario.parties();
    let denom = (scenario.settings() as i64).pow((n - key.subset.len()) as u32);
    let block = scenario.block_len();
    let mut out = vec![0i64; scenario.dim()];
    for xr in 0..scenario.setting_blocks() {
        let x = scenario.setting_tuple(xr);
        if CorrelatorKey::restrict(key.subset, &x).settings != key.settings {
            continue;
        }
        for a in 0..block {
            out[xr * block + a] = chi(key.subset.mask(), scenario.outcome_mask(a));
        }
    }
    (out, denom)
}

pub fn umc_coefficient_vector(
    scenario: Scenario,
    subset: PartySubset,
    settings: &[usize],
) -> Result<UmcCoefficientVector> {
    let key = CorrelatorKey::new(scenario, subset, settings.to_vec())?;
    let (ints, denom) = umc_coefficient_integers(scenario, &key);
    Ok(UmcCoefficientVector {
        scenario,
        key,
        entries: ints.iter().map(|&c| c as f64 / denom as f64).collect(),
    })
}

/// Every UMC coefficient vector in key order (the empty key first).
pub fn all_umc_coefficient_vectors(scenario: Scenario) -> Vec<UmcCoefficientVector> {
    (0..scenario.correlator_count())
        .map(|r| {
            let key = CorrelatorKey::from_rank(scenario, r);
            umc_coefficient_vector(scenario, key.subset, &key.settings).expect("valid key")
        })
        .collect()
}

/// Inverse map from a complete correlator table to probabilities.
pub fn probabilities_from_correlators(table: &CorrelatorTable) -> BehaviorVector {
    let scenario = table.scenario();
    BehaviorVector::unconstrained(scenario, reconstruct_values(scenario, table.values()))
        .expect("reconstruction has dimension d")
}
