//! Projections of behaviour vectors onto the no-signalling affine hull.
//!
//! `project_l2` and `project_weighted` use the closed-form correlator
//! pipeline. `project_direct` and `project_weighted_direct` go through an
//! explicit kernel basis and serve as independent oracles.

mod maps;
mod refine;

pub use maps::{build_pipeline_maps, PipelineMaps, RationalMatrix};
pub use refine::{estimate_ml, ml_objective, project_nonneg, MlOptions, NonnegOptions, LOG_FLOOR};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::constraints::ConstraintSystem;
use crate::correlators::{average_settingwise, reconstruct_values, settingwise_values};
use crate::error::{Error, Result};
use crate::scenario::{uniform_behavior, BehaviorVector, Scenario};

/// Largest Gram-matrix condition number accepted by the direct projectors.
pub const MAX_GRAM_CONDITION: f64 = 1e12;

/// Positive weight per setting tuple, indexed by setting rank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWeights", into = "RawWeights")]
pub struct SettingsWeights {
    scenario: Scenario,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawWeights {
    scenario: Scenario,
    weights: Vec<f64>,
}

impl TryFrom<RawWeights> for SettingsWeights {
    type Error = Error;
    fn try_from(raw: RawWeights) -> Result<Self> {
        SettingsWeights::new(raw.scenario, raw.weights)
    }
}

impl From<SettingsWeights> for RawWeights {
    fn from(w: SettingsWeights) -> Self {
        RawWeights {
            scenario: w.scenario,
            weights: w.weights,
        }
    }
}

impl SettingsWeights {
    pub fn new(scenario: Scenario, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != scenario.setting_blocks() {
            return Err(Error::DimensionMismatch {
                expected: scenario.setting_blocks(),
                got: weights.len(),
            });
        }
        if let Some((x, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w > 0.0))
        {
            return Err(Error::Domain(format!(
                "weight for setting {:?} must be positive, got {w}",
                scenario.setting_tuple(x)
            )));
        }
        Ok(SettingsWeights { scenario, weights })
    }

    pub fn uniform(scenario: Scenario) -> Self {
        let k = scenario.setting_blocks();
        SettingsWeights {
            scenario,
            weights: vec![1.0 / k as f64; k],
        }
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// The diagonal of `D`: each weight repeated over its outcome block.
    pub fn diagonal(&self) -> Vec<f64> {
        let block = self.scenario.block_len();
        self.weights
            .iter()
            .flat_map(|&w| std::iter::repeat_n(w, block))
            .collect()
    }

    /// `<u, v>_D`.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        let block = self.scenario.block_len();
        u.iter()
            .zip(v)
            .enumerate()
            .map(|(i, (a, b))| self.weights[i / block] * a * b)
            .sum()
    }
}

fn pin_and_reconstruct(scenario: Scenario, mut table: Vec<f64>) -> Vec<f64> {
    // The empty-subset entry fixes normalisation; pinning it makes the map
    // affine and lands on the hull for any input.
    table[0] = 1.0;
    reconstruct_values(scenario, &table)
}

/// Euclidean projection onto the affine hull via `T3 T2 T1`.
pub fn project_l2(v: &BehaviorVector) -> BehaviorVector {
    let s = v.scenario();
    let table = average_settingwise(s, &settingwise_values(s, v.entries()), None);
    BehaviorVector::unconstrained(s, pin_and_reconstruct(s, table)).expect("dimension d")
}

/// `D`-weighted projection via weighted averaging of settingwise correlators.
pub fn project_weighted(v: &BehaviorVector, weights: &SettingsWeights) -> Result<BehaviorVector> {
    let s = v.scenario();
    s.ensure_same(&weights.scenario())?;
    let table = average_settingwise(
        s,
        &settingwise_values(s, v.entries()),
        Some(weights.weights()),
    );
    BehaviorVector::unconstrained(s, pin_and_reconstruct(s, table))
}

fn ill_conditioned(gram: &DMatrix<f64>) -> Option<f64> {
    let sv = gram.singular_values();
    let max = sv.max();
    let min = sv.min();
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    (condition > MAX_GRAM_CONDITION).then_some(condition)
}

/// `d + B (B^T D B)^-1 B^T D (v - d)` with `D = diag(dweights)`.
fn kernel_projection(
    v: &BehaviorVector,
    system: &ConstraintSystem,
    dweights: Option<&[f64]>,
) -> Result<BehaviorVector> {
    let s = v.scenario();
    s.ensure_same(&system.scenario())?;
    let b = system.kernel_basis()?;
    let base = uniform_behavior(s);
    let mut diff = DVector::from_iterator(
        s.dim(),
        v.entries().iter().zip(base.entries()).map(|(a, c)| a - c),
    );
    let db = match dweights {
        Some(w) => {
            for (x, wi) in diff.iter_mut().zip(w) {
                *x *= wi;
            }
            let mut db = b.clone();
            for (i, &wi) in w.iter().enumerate() {
                db.row_mut(i).scale_mut(wi);
            }
            db
        }
        None => b.clone(),
    };
    let gram = b.transpose() * &db;
    if let Some(condition) = ill_conditioned(&gram) {
        return Err(Error::IllConditioned { condition });
    }
    let rhs = b.transpose() * diff;
    let z = gram
        .cholesky()
        .ok_or(Error::IllConditioned {
            condition: f64::INFINITY,
        })?
        .solve(&rhs);
    let p = b * z;
    let entries = p.iter().zip(base.entries()).map(|(a, c)| a + c).collect();
    BehaviorVector::unconstrained(s, entries)
}

/// `Pi_ker (v - d) + d` with an explicit kernel basis `B`.
pub fn project_direct(v: &BehaviorVector, system: &ConstraintSystem) -> Result<BehaviorVector> {
    kernel_projection(v, system, None)
}

/// `d + B (B^T D B)^-1 B^T D (v - d)`.
pub fn project_weighted_direct(
    v: &BehaviorVector,
    weights: &SettingsWeights,
    system: &ConstraintSystem,
) -> Result<BehaviorVector> {
    v.scenario().ensure_same(&weights.scenario())?;
    kernel_projection(v, system, Some(&weights.diagonal()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::build_constraint_system;
    use crate::correlators::{all_umc_coefficient_vectors, umc};
    use crate::scenario::{deterministic_behavior, Role};

    fn scn(n: usize, m: usize) -> Scenario {
        Scenario::new(n, m).unwrap()
    }

    fn wobbly(s: Scenario, seed: usize) -> BehaviorVector {
        let raw: Vec<f64> = (0..s.dim())
            .map(|i| 0.5 + (((i + 3) * (seed + 11) * 2654435761usize) % 1000) as f64 / 1000.0)
            .collect();
        let block = s.block_len();
        let mut e = raw.clone();
        for xr in 0..s.setting_blocks() {
            let sum: f64 = raw[xr * block..(xr + 1) * block].iter().sum();
            for v in &mut e[xr * block..(xr + 1) * block] {
                *v /= sum;
            }
        }
        BehaviorVector::new(s, e, Role::Frequency).unwrap()
    }

    #[test]
    fn weights_validation() {
        let s = scn(2, 2);
        assert!(SettingsWeights::new(s, vec![1.0, 0.0, 1.0, 1.0]).is_err());
        assert!(SettingsWeights::new(s, vec![1.0; 3]).is_err());
        let w = SettingsWeights::new(s, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(w.diagonal()[4..8], [2.0; 4]);
    }

    #[test]
    fn l2_output_is_on_hull_and_preserves_umcs() {
        for (n, m) in [(2, 2), (2, 3), (3, 2)] {
            let s = scn(n, m);
            let sys = build_constraint_system(s);
            let v = wobbly(s, n * m);
            let p = project_l2(&v);
            assert!(sys.residual(&p).unwrap().max_abs() < 1e-12);
            let (a, b) = (umc(&v), umc(&p));
            for (x, y) in a.values().iter().zip(b.values()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn l2_fixes_local_points() {
        let s = scn(2, 3);
        let p = deterministic_behavior(s, &[vec![0, 1, 1], vec![1, 0, 1]]).unwrap();
        assert!(project_l2(&p).max_abs_diff(&p) < 1e-12);
    }

    #[test]
    fn l2_handles_unnormalised_input() {
        let s = scn(2, 2);
        let v = BehaviorVector::unconstrained(s, (0..16).map(|i| i as f64).collect()).unwrap();
        let sys = build_constraint_system(s);
        let p = project_l2(&v);
        assert!(sys.residual(&p).unwrap().max_abs() < 1e-12);
        assert!(project_direct(&v, &sys).unwrap().max_abs_diff(&p) < 1e-10);
    }

    #[test]
    fn direct_matches_pipeline() {
        for (n, m) in [(2, 2), (2, 3), (3, 2)] {
            let s = scn(n, m);
            let sys = build_constraint_system(s);
            for seed in 0..5 {
                let v = wobbly(s, seed);
                let d = project_direct(&v, &sys).unwrap();
                assert!(d.max_abs_diff(&project_l2(&v)) < 1e-10);
            }
        }
    }

    #[test]
    fn weighted_paths_agree_and_preserve_d_inner_products() {
        let s = scn(2, 3);
        let sys = build_constraint_system(s);
        let w = SettingsWeights::new(s, (1..=9).map(|i| i as f64).collect()).unwrap();
        let v = wobbly(s, 4);
        let closed = project_weighted(&v, &w).unwrap();
        let direct = project_weighted_direct(&v, &w, &sys).unwrap();
        assert!(closed.max_abs_diff(&direct) < 1e-8);
        for c in all_umc_coefficient_vectors(s) {
            let lhs = w.inner(&c.entries, closed.entries());
            let rhs = w.inner(&c.entries, v.entries());
            assert!((lhs - rhs).abs() < 1e-10, "{}", c.key);
        }
    }

    #[test]
    fn uniform_weights_reduce_to_l2() {
        let s = scn(2, 2);
        let v = wobbly(s, 9);
        let p = project_weighted(&v, &SettingsWeights::uniform(s)).unwrap();
        assert!(p.max_abs_diff(&project_l2(&v)) < 1e-12);
    }
}
