//! Iterative refinements: the nonnegative least-squares projection and the
//! maximum-likelihood estimate over the no-signalling polytope.

use crate::constraints::ConstraintSystem;
use crate::error::{Error, Result};
use crate::scenario::{BehaviorVector, Role};

use super::{project_l2, SettingsWeights};

/// Probabilities are floored at this value inside logarithms.
pub const LOG_FLOOR: f64 = 1e-12;

/// Dykstra stopping rule.
#[derive(Debug, Clone, Copy)]
pub struct NonnegOptions {
    pub tolerance: f64,
    pub max_sweeps: usize,
}

impl Default for NonnegOptions {
    fn default() -> Self {
        NonnegOptions {
            tolerance: 1e-12,
            max_sweeps: 100_000,
        }
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0, |acc, (x, y)| acc.max((x - y).abs()))
}

fn hull(v: &BehaviorVector, entries: &[f64]) -> Vec<f64> {
    let w = BehaviorVector::unconstrained(v.scenario(), entries.to_vec()).expect("dimension d");
    project_l2(&w).into_entries()
}

fn finish(
    v: &BehaviorVector,
    system: &ConstraintSystem,
    mut p: Vec<f64>,
    gap: f64,
    iterations: usize,
) -> Result<BehaviorVector> {
    if p.iter().any(|&x| x < -1e-10) {
        return Err(Error::NoConvergence { iterations, gap });
    }
    for x in &mut p {
        *x = x.max(0.0);
    }
    let out = BehaviorVector::unconstrained(v.scenario(), p)?;
    if system.residual(&out)?.max_abs() > 1e-9 {
        return Err(Error::NoConvergence { iterations, gap });
    }
    // Clamping can move block sums by a few ulps; only relabel when it is
    // still a valid probability vector.
    Ok(out.clone().with_role(Role::Probability).unwrap_or(out))
}

/// Closest point of the no-signalling polytope in Euclidean norm.
pub fn project_nonneg(v: &BehaviorVector, system: &ConstraintSystem) -> Result<BehaviorVector> {
    project_nonneg_with(v, system, NonnegOptions::default())
}

pub fn project_nonneg_with(
    v: &BehaviorVector,
    system: &ConstraintSystem,
    opts: NonnegOptions,
) -> Result<BehaviorVector> {
    v.scenario().ensure_same(&system.scenario())?;
    let first = project_l2(v).into_entries();
    if first.iter().all(|&x| x >= 0.0) {
        return finish(v, system, first, 0.0, 0);
    }

    // Dykstra between the affine hull and the orthant.
    let d = first.len();
    let mut x = v.entries().to_vec();
    let mut p = vec![0.0; d];
    let mut q = vec![0.0; d];
    let mut y_prev = first;
    let mut gap = f64::INFINITY;
    for sweep in 1..=opts.max_sweeps {
        let shifted: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a + b).collect();
        let y = hull(v, &shifted);
        for i in 0..d {
            p[i] = shifted[i] - y[i];
        }
        let x_new: Vec<f64> = y.iter().zip(&q).map(|(a, b)| (a + b).max(0.0)).collect();
        for i in 0..d {
            q[i] = y[i] + q[i] - x_new[i];
        }
        gap = max_abs_diff(&x_new, &x)
            .max(max_abs_diff(&y, &y_prev))
            .max(max_abs_diff(&y, &x_new));
        x = x_new;
        y_prev = y;
        if gap < opts.tolerance {
            return finish(v, system, y_prev, gap, sweep);
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_sweeps,
        gap,
    })
}

/// `sum_x pi(x) sum_a f(a|x) log2 max(p(a|x), LOG_FLOOR)`.
pub fn ml_objective(f: &BehaviorVector, pi: &SettingsWeights, p: &BehaviorVector) -> Result<f64> {
    let s = f.scenario();
    s.ensure_same(&pi.scenario())?;
    s.ensure_same(&p.scenario())?;
    Ok(objective(
        s.block_len(),
        f.entries(),
        pi.weights(),
        p.entries(),
    ))
}

fn objective(block: usize, f: &[f64], pi: &[f64], p: &[f64]) -> f64 {
    f.iter()
        .zip(p)
        .enumerate()
        .filter(|(_, (fi, _))| **fi != 0.0)
        .map(|(i, (fi, pi_))| pi[i / block] * fi * pi_.max(LOG_FLOOR).log2())
        .sum()
}

/// Projected-gradient settings.
#[derive(Debug, Clone, Copy)]
pub struct MlOptions {
    pub max_iterations: usize,
    /// Stop once an accepted step moves no entry by more than this.
    pub step_tolerance: f64,
    /// Stop once an accepted step raises the objective by less than this.
    pub objective_tolerance: f64,
}

impl Default for MlOptions {
    fn default() -> Self {
        MlOptions {
            max_iterations: 50_000,
            step_tolerance: 1e-12,
            objective_tolerance: 1e-15,
        }
    }
}

/// Maximum-likelihood no-signalling estimate.
pub fn estimate_ml(
    f: &BehaviorVector,
    pi: &SettingsWeights,
    system: &ConstraintSystem,
) -> Result<BehaviorVector> {
    estimate_ml_with(f, pi, system, MlOptions::default())
}

pub fn estimate_ml_with(
    f: &BehaviorVector,
    pi: &SettingsWeights,
    system: &ConstraintSystem,
    opts: MlOptions,
) -> Result<BehaviorVector> {
    let s = f.scenario();
    s.ensure_same(&pi.scenario())?;
    s.ensure_same(&system.scenario())?;
    let block = s.block_len();
    let w = pi.weights();
    let grad = |p: &[f64]| -> Vec<f64> {
        f.entries()
            .iter()
            .zip(p)
            .enumerate()
            .map(|(i, (fi, pi_))| w[i / block] * fi / (pi_.max(LOG_FLOOR) * std::f64::consts::LN_2))
            .collect()
    };
    let feasible = |e: Vec<f64>| -> Result<Vec<f64>> {
        let b = BehaviorVector::unconstrained(s, e)?;
        Ok(project_nonneg(&b, system)?.into_entries())
    };

    let mut p = feasible(f.entries().to_vec())?;
    let mut obj = objective(block, f.entries(), w, &p);
    let mut g = grad(&p);
    let mut step = 1.0;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut gradient_norm = f64::INFINITY;

    for _ in 0..opts.max_iterations {
        if let Some((p_old, g_old)) = &prev {
            // Barzilai-Borwein initial step for ascent.
            let (mut ss, mut sy) = (0.0, 0.0);
            for i in 0..p.len() {
                let ds = p[i] - p_old[i];
                let dy = g[i] - g_old[i];
                ss += ds * ds;
                sy += ds * dy;
            }
            if sy < 0.0 && ss > 0.0 {
                step = (ss / -sy).clamp(1e-12, 1e12);
            } else {
                step = (step * 2.0).min(1e12);
            }
        }
        let mut t = step;
        let accepted = loop {
            let trial: Vec<f64> = p.iter().zip(&g).map(|(a, b)| a + t * b).collect();
            let cand = feasible(trial)?;
            let cand_obj = objective(block, f.entries(), w, &cand);
            let ascent: f64 = cand
                .iter()
                .zip(&p)
                .zip(&g)
                .map(|((c, a), b)| (c - a) * b)
                .sum();
            if cand_obj >= obj + 1e-4 * ascent && cand_obj >= obj {
                break Some((cand, cand_obj));
            }
            t *= 0.5;
            if t < 1e-20 {
                break None;
            }
        };
        let Some((cand, cand_obj)) = accepted else {
            // No ascent step exists at this resolution: stationary.
            return finish(f, system, p, 0.0, 0);
        };
        let moved = max_abs_diff(&cand, &p);
        gradient_norm = moved / t;
        let gain = cand_obj - obj;
        prev = Some((std::mem::replace(&mut p, cand), std::mem::take(&mut g)));
        g = grad(&p);
        obj = cand_obj;
        step = t;
        if moved < opts.step_tolerance || gain < opts.objective_tolerance {
            return finish(f, system, p, moved, 0);
        }
    }
    Err(Error::MlNoConvergence {
        iterations: opts.max_iterations,
        objective: obj,
        gradient_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::build_constraint_system;
    use crate::scenario::{deterministic_behavior, uniform_behavior, Scenario};

    fn scn(n: usize, m: usize) -> Scenario {
        Scenario::new(n, m).unwrap()
    }

    /// Party 1 copies party 2's setting into its outcome: maximal signalling.
    fn signalling(s: Scenario) -> BehaviorVector {
        let mut e = vec![0.0; s.dim()];
        for xr in 0..s.setting_blocks() {
            let x = s.setting_tuple(xr);
            let a = [x[1] as u8, 0];
            e[s.encode_index(&a, &x).unwrap()] = 1.0;
        }
        BehaviorVector::new(s, e, Role::Frequency).unwrap()
    }

    #[test]
    fn nonneg_is_identity_on_positive_projection() {
        let s = scn(2, 2);
        let sys = build_constraint_system(s);
        let u = uniform_behavior(s);
        let p = project_nonneg(&u, &sys).unwrap();
        assert_eq!(p.role(), Role::Probability);
        assert!(p.max_abs_diff(&u) < 1e-15);
    }

    #[test]
    fn nonneg_repairs_negative_projection() {
        let s = scn(2, 2);
        let sys = build_constraint_system(s);
        let v = signalling(s);
        assert!(project_l2(&v).has_negative_entries());
        let p = project_nonneg(&v, &sys).unwrap();
        assert!(p.min_entry() >= 0.0);
        assert!(sys.residual(&p).unwrap().max_abs() < 1e-10);
        let l2 = project_l2(&v);
        let dist = |a: &BehaviorVector| {
            a.entries()
                .iter()
                .zip(v.entries())
                .map(|(x, y)| (x - y).powi(2))
                .sum::<f64>()
        };
        assert!(dist(&p) >= dist(&l2));
    }

    #[test]
    fn ml_returns_positive_no_signalling_input() {
        let s = scn(2, 2);
        let sys = build_constraint_system(s);
        let a = deterministic_behavior(s, &[vec![0, 1], vec![1, 1]]).unwrap();
        let mix: Vec<f64> = a
            .entries()
            .iter()
            .zip(uniform_behavior(s).entries())
            .map(|(x, y)| 0.3 * x + 0.7 * y)
            .collect();
        let f = BehaviorVector::new(s, mix, Role::Frequency).unwrap();
        let pi = SettingsWeights::uniform(s);
        let p = estimate_ml(&f, &pi, &sys).unwrap();
        assert!(p.max_abs_diff(&f) < 1e-6);
    }

    #[test]
    fn ml_with_zero_entry_is_finite() {
        let s = scn(2, 2);
        let sys = build_constraint_system(s);
        let mut e = uniform_behavior(s).into_entries();
        e[0] = 0.0;
        e[1] = 0.5;
        let f = BehaviorVector::new(s, e, Role::Frequency).unwrap();
        let pi = SettingsWeights::uniform(s);
        let p = estimate_ml(&f, &pi, &sys).unwrap();
        assert!(p.entries().iter().all(|x| x.is_finite()));
        let start = project_nonneg(&f, &sys).unwrap();
        assert!(ml_objective(&f, &pi, &p).unwrap() >= ml_objective(&f, &pi, &start).unwrap());
    }
}
