#![allow(dead_code)]

use nsbell::scenario::{deterministic_behavior, uniform_behavior};
use nsbell::{BehaviorVector, Role, Scenario};
use rand::Rng;

pub fn scn(n: usize, m: usize) -> Scenario {
    Scenario::new(n, m).unwrap()
}

/// TABLE1 as long-format CSV.
pub fn table1_csv() -> String {
    let mut s = String::from("x1,x2,a1,a2,count\n");
    for (xr, row) in nsbell::data::TABLE1.iter().enumerate() {
        for (ar, c) in row.iter().enumerate() {
            s += &format!("{},{},{},{},{}\n", xr >> 1, xr & 1, ar >> 1, ar & 1, c);
        }
    }
    s
}

pub fn random_strategy<R: Rng>(s: Scenario, rng: &mut R) -> Vec<Vec<u8>> {
    (0..s.parties())
        .map(|_| {
            (0..s.settings())
                .map(|_| rng.random_range(0..2u8))
                .collect()
        })
        .collect()
}

/// A random convex mixture of `k` deterministic local strategies.
pub fn random_local<R: Rng>(s: Scenario, rng: &mut R, k: usize) -> BehaviorVector {
    let weights: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let mut e = vec![0.0; s.dim()];
    for w in weights {
        let d = deterministic_behavior(s, &random_strategy(s, rng)).unwrap();
        for (x, v) in e.iter_mut().zip(d.entries()) {
            *x += w / total * v;
        }
    }
    BehaviorVector::new(s, e, Role::Probability).unwrap()
}

/// A strictly positive local behaviour: a local mixture blended with noise.
pub fn random_positive_local<R: Rng>(s: Scenario, rng: &mut R) -> BehaviorVector {
    let l = random_local(s, rng, 4);
    let t = rng.random_range(0.2..0.8);
    let e = l
        .entries()
        .iter()
        .zip(uniform_behavior(s).entries())
        .map(|(a, b)| (1.0 - t) * a + t * b)
        .collect();
    BehaviorVector::new(s, e, Role::Probability).unwrap()
}

/// A local behaviour with independent per-block noise of size `eps`,
/// renormalised per block.
pub fn weakly_signalling<R: Rng>(s: Scenario, rng: &mut R, eps: f64) -> BehaviorVector {
    let base = random_positive_local(s, rng);
    let block = s.block_len();
    let mut e: Vec<f64> = base
        .entries()
        .iter()
        .map(|v| v + eps * rng.random_range(0.0..1.0))
        .collect();
    for chunk in e.chunks_mut(block) {
        let sum: f64 = chunk.iter().sum();
        chunk.iter_mut().for_each(|v| *v /= sum);
    }
    BehaviorVector::new(s, e, Role::Frequency).unwrap()
}

/// Uniform entries in [0,1], blocks renormalised.
pub fn random_frequencies<R: Rng>(s: Scenario, rng: &mut R) -> BehaviorVector {
    let block = s.block_len();
    let mut e: Vec<f64> = (0..s.dim()).map(|_| rng.random_range(0.0..1.0)).collect();
    for chunk in e.chunks_mut(block) {
        let sum: f64 = chunk.iter().sum();
        chunk.iter_mut().for_each(|v| *v /= sum);
    }
    BehaviorVector::new(s, e, Role::Frequency).unwrap()
}

/// The (2,2,2) PR box.
pub fn pr_box() -> BehaviorVector {
    let s = scn(2, 2);
    let mut e = vec![0.0; 16];
    for xr in 0..4 {
        let x = s.setting_tuple(xr);
        for a in 0..2u8 {
            for b in 0..2u8 {
                if (a ^ b) as usize == x[0] * x[1] {
                    e[s.encode_index(&[a, b], &x).unwrap()] = 0.5;
                }
            }
        }
    }
    BehaviorVector::new(s, e, Role::Probability).unwrap()
}

/// Party 1 outputs party 2's setting: maximally signalling, and its
/// Euclidean projection onto the affine hull has negative entries.
pub fn copy_signalling() -> BehaviorVector {
    let s = scn(2, 2);
    let mut e = vec![0.0; 16];
    for xr in 0..4 {
        let x = s.setting_tuple(xr);
        e[s.encode_index(&[x[1] as u8, 0], &x).unwrap()] = 1.0;
    }
    BehaviorVector::new(s, e, Role::Frequency).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Exhaustive active-set QP oracle: the Euclidean projection of `v` onto
/// `{p : A_eq p = b, p >= 0}` found by trying every set of coordinates
/// forced to zero and keeping the best feasible candidate.
pub fn active_set_oracle(v: &BehaviorVector) -> Vec<f64> {
    use nalgebra::{DMatrix, DVector};
    let s = v.scenario();
    let d = s.dim();
    assert!(d <= 20, "exhaustive oracle is for small instances");
    let sys = nsbell::constraints::build_constraint_system(s);
    let b = sys.kernel_basis().unwrap().clone();
    let base = uniform_behavior(s);
    let base_v = DVector::from_column_slice(base.entries());
    let z0 = b.transpose() * (DVector::from_column_slice(v.entries()) - &base_v);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u32..(1 << d) {
        let idx: Vec<usize> = (0..d).filter(|i| mask >> i & 1 == 1).collect();
        let z = if idx.is_empty() {
            z0.clone()
        } else {
            let bs = DMatrix::from_fn(idx.len(), b.ncols(), |r, c| b[(idx[r], c)]);
            let rhs = DVector::from_fn(idx.len(), |r, _| -base_v[idx[r]]);
            let resid = &bs * &z0 - &rhs;
            let gram = &bs * bs.transpose();
            let Ok(pinv) = gram.pseudo_inverse(1e-10) else {
                continue;
            };
            let z = &z0 - bs.transpose() * (pinv * resid);
            if (&bs * &z - &rhs).amax() > 1e-9 {
                continue;
            }
            z
        };
        let p = &base_v + &b * z;
        if p.iter().any(|&x| x < -1e-9) {
            continue;
        }
        let dist: f64 = p
            .iter()
            .zip(v.entries())
            .map(|(a, c)| (a - c).powi(2))
            .sum();
        if best.as_ref().is_none_or(|(bd, _)| dist < *bd - 1e-15) {
            best = Some((dist, p.iter().copied().collect()));
        }
    }
    best.expect("the polytope is nonempty").1
}
