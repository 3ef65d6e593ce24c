//! Bell expressions, canonicalisation onto UMC coefficients, evaluation,
//! and the built-in inequality library.
//!
//! Outcome `0` maps to `+1` and outcome `1` to `-1` throughout.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::correlators::{reconstruct_values, scalar, umc_values, CorrelatorKey, Rational, Scalar};
use crate::error::{Error, Result};
use crate::projection::project_l2;
use crate::scenario::{
    deterministic_behavior, deterministic_strategies, BehaviorVector, PartySubset, Scenario,
};

/// Two expressions are treated as the same functional on the affine hull
/// when their canonical coefficients differ by no more than this.
pub const AGREEMENT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Local behaviours satisfy `value <= bound`.
    Le,
    /// Local behaviours satisfy `value >= bound`.
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbTerm {
    pub a: Vec<u8>,
    pub x: Vec<usize>,
    pub coef: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrTerm {
    pub key: CorrelatorKey,
    pub coef: f64,
}

/// A linear Bell functional with a bound. Probability terms give `gamma`,
/// correlator terms give `beta` over UMCs; either or both may be present.
#[derive(Debug, Clone, PartialEq)]
pub struct BellExpression {
    scenario: Scenario,
    name: Option<String>,
    prob_terms: Option<Vec<ProbTerm>>,
    corr_terms: Option<Vec<CorrTerm>>,
    bound: f64,
    direction: Direction,
}

/// `beta[key] = 2^-n sum_a sum_{x_rest} gamma(a,x) chi_I(a)`, key-ordered.
pub fn canonical_beta<T: Scalar>(scenario: Scenario, gamma: &[T]) -> Vec<T> {
    let n = scenario.parties();
    let m = scenario.settings() as i64;
    let two_n: T = scalar(scenario.block_len() as i64);
    umc_values(scenario, gamma)
        .into_iter()
        .enumerate()
        .map(|(r, c)| {
            let free = n - CorrelatorKey::from_rank(scenario, r).subset.len();
            c * scalar::<T>(m.pow(free as u32)) / two_n.clone()
        })
        .collect()
}

/// `gamma'(a,x) = sum_I beta[I, x_I] chi_I(a) / m^(n-|I|)`.
pub fn expand_beta<T: Scalar>(scenario: Scenario, beta: &[T]) -> Vec<T> {
    let n = scenario.parties();
    let m = scenario.settings() as i64;
    let two_n: T = scalar(scenario.block_len() as i64);
    let scaled: Vec<T> = beta
        .iter()
        .enumerate()
        .map(|(r, b)| {
            let free = n - CorrelatorKey::from_rank(scenario, r).subset.len();
            b.clone() / scalar::<T>(m.pow(free as u32))
        })
        .collect();
    reconstruct_values(scenario, &scaled)
        .into_iter()
        .map(|v| v * two_n.clone())
        .collect()
}

/// Small-denominator rational equal to `x` as an `f64`, if one exists.
pub fn exact_rational(x: f64) -> Option<Rational> {
    if !x.is_finite() {
        return None;
    }
    (1..=1024i64).find_map(|q| {
        let p = (x * q as f64).round();
        (p.abs() < 1e15 && p / q as f64 == x).then(|| Rational::new(p as i64, q))
    })
}

impl BellExpression {
    pub fn new(
        scenario: Scenario,
        prob_terms: Option<Vec<ProbTerm>>,
        corr_terms: Option<Vec<CorrTerm>>,
        bound: f64,
        direction: Direction,
    ) -> Result<Self> {
        if prob_terms.is_none() && corr_terms.is_none() {
            return Err(Error::Schema("expression has no terms".into()));
        }
        if !bound.is_finite() {
            return Err(Error::Schema(format!("bound must be finite, got {bound}")));
        }
        let expr = BellExpression {
            scenario,
            name: None,
            prob_terms,
            corr_terms,
            bound,
            direction,
        };
        let gamma = expr.raw_gamma()?;
        let beta = expr.corr_beta()?;
        if let (Some(g), Some(b)) = (gamma, beta) {
            let from_g = canonical_beta(scenario, &g);
            let worst = from_g
                .iter()
                .zip(&b)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            if worst > AGREEMENT_TOL {
                return Err(Error::Schema(format!(
                    "probability and correlator terms disagree on no-signalling behaviours (max coefficient gap {worst:.3e})"
                )));
            }
        }
        Ok(expr)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn prob_terms(&self) -> Option<&[ProbTerm]> {
        self.prob_terms.as_deref()
    }

    pub fn corr_terms(&self) -> Option<&[CorrTerm]> {
        self.corr_terms.as_deref()
    }

    /// Dense `gamma` from the probability terms.
    fn raw_gamma(&self) -> Result<Option<Vec<f64>>> {
        let Some(terms) = &self.prob_terms else {
            return Ok(None);
        };
        let mut gamma = vec![0.0; self.scenario.dim()];
        let mut seen = vec![false; self.scenario.dim()];
        for t in terms {
            let idx = self.scenario.encode_index(&t.a, &t.x)?;
            if std::mem::replace(&mut seen[idx], true) {
                return Err(Error::DuplicateKey(format!("p({:?}|{:?})", t.a, t.x)));
            }
            check_coef(t.coef)?;
            gamma[idx] = t.coef;
        }
        Ok(Some(gamma))
    }

    /// Dense `beta` from the correlator terms.
    fn corr_beta(&self) -> Result<Option<Vec<f64>>> {
        let Some(terms) = &self.corr_terms else {
            return Ok(None);
        };
        let s = self.scenario;
        let mut beta = vec![0.0; s.correlator_count()];
        let mut seen = vec![false; s.correlator_count()];
        for t in terms {
            let key = CorrelatorKey::new(s, t.key.subset, t.key.settings.clone())?;
            let r = key.rank(s);
            if std::mem::replace(&mut seen[r], true) {
                return Err(Error::DuplicateKey(key.to_string()));
            }
            check_coef(t.coef)?;
            beta[r] = t.coef;
        }
        Ok(Some(beta))
    }

    /// The coefficient vector applied by [`evaluate_raw`]: `gamma` when
    /// probability terms exist, the UMC expansion of `beta` otherwise.
    pub fn gamma(&self) -> Vec<f64> {
        match self.raw_gamma().expect("validated") {
            Some(g) => g,
            None => expand_beta(
                self.scenario,
                &self.corr_beta().expect("validated").expect("present"),
            ),
        }
    }
}

fn check_coef(c: f64) -> Result<()> {
    if c.is_finite() {
        Ok(())
    } else {
        Err(Error::Schema(format!(
            "coefficient must be finite, got {c}"
        )))
    }
}

/// A Bell functional rewritten over UMCs.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalForm {
    pub scenario: Scenario,
    pub name: Option<String>,
    /// Key-ordered `beta`; index 0 is the empty-subset constant.
    pub beta: Vec<f64>,
    /// Expanded `gamma'` over (a, x) in flat order.
    pub gamma: Vec<f64>,
    pub bound: f64,
    pub direction: Direction,
}

fn to_f64(r: &Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Canonical form. Coefficients are computed in exact rationals whenever
/// the input coefficients allow it, so thirds come out as clean `f64`s.
pub fn canonicalize(expr: &BellExpression) -> CanonicalForm {
    let s = expr.scenario;
    let (beta, gamma) = match canonical_exact(expr) {
        Some((b, g)) => (
            b.iter().map(to_f64).collect(),
            g.iter().map(to_f64).collect(),
        ),
        None => {
            let beta = match expr.raw_gamma().expect("validated") {
                Some(g) => canonical_beta(s, &g),
                None => expr.corr_beta().expect("validated").expect("present"),
            };
            let gamma = expand_beta(s, &beta);
            (beta, gamma)
        }
    };
    CanonicalForm {
        scenario: s,
        name: expr.name.clone(),
        beta,
        gamma,
        bound: expr.bound,
        direction: expr.direction,
    }
}

/// Exact `(beta, gamma')`, if every coefficient of `expr` is a small rational.
pub fn canonical_exact(expr: &BellExpression) -> Option<(Vec<Rational>, Vec<Rational>)> {
    let s = expr.scenario;
    let beta = match expr.raw_gamma().expect("validated") {
        Some(g) => {
            let g: Option<Vec<Rational>> = g.into_iter().map(exact_rational).collect();
            canonical_beta(s, &g?)
        }
        None => {
            let b = expr.corr_beta().expect("validated").expect("present");
            b.into_iter()
                .map(exact_rational)
                .collect::<Option<Vec<_>>>()?
        }
    };
    let gamma = expand_beta(s, &beta);
    Some((beta, gamma))
}

impl CanonicalForm {
    pub fn beta_for(&self, subset: PartySubset, settings: &[usize]) -> Result<f64> {
        let key = CorrelatorKey::new(self.scenario, subset, settings.to_vec())?;
        Ok(self.beta[key.rank(self.scenario)])
    }

    /// `gamma'` restricted to one setting block.
    pub fn block(&self, x: &[usize]) -> Result<&[f64]> {
        self.scenario.check_settings(x)?;
        let b = self.scenario.block_len();
        let r = self.scenario.setting_rank(x);
        Ok(&self.gamma[r * b..(r + 1) * b])
    }

    /// Moves the empty-subset constant into the bound. Equivalent on
    /// normalised inputs.
    pub fn fold_constant(&self) -> CanonicalForm {
        let mut out = self.clone();
        let c = out.beta[0];
        out.beta[0] = 0.0;
        out.bound -= c;
        out.gamma = expand_beta(self.scenario, &out.beta);
        out
    }

    /// Multiplies functional and bound by `k > 0`.
    pub fn scaled(&self, k: f64) -> CanonicalForm {
        assert!(k > 0.0, "scale must be positive");
        let mut out = self.clone();
        out.beta.iter_mut().for_each(|b| *b *= k);
        out.gamma.iter_mut().for_each(|g| *g *= k);
        out.bound *= k;
        out
    }

    pub fn value(&self, v: &BehaviorVector) -> Result<f64> {
        self.scenario.ensure_same(&v.scenario())?;
        Ok(v.dot(&self.gamma))
    }

    /// Back to an expression carrying both term kinds.
    pub fn to_expression(&self) -> BellExpression {
        let s = self.scenario;
        let corr = self
            .beta
            .iter()
            .enumerate()
            .filter(|(_, b)| **b != 0.0)
            .map(|(r, &coef)| CorrTerm {
                key: CorrelatorKey::from_rank(s, r),
                coef,
            })
            .collect();
        let prob = self
            .gamma
            .iter()
            .enumerate()
            .filter(|(_, g)| **g != 0.0)
            .map(|(i, &coef)| {
                let (a, x) = s.decode_index(i).expect("in range");
                ProbTerm { a, x, coef }
            })
            .collect();
        BellExpression {
            scenario: s,
            name: self.name.clone(),
            prob_terms: Some(prob),
            corr_terms: Some(corr),
            bound: self.bound,
            direction: self.direction,
        }
    }
}

/// Result of comparing a Bell value with its bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Evaluation {
    pub value: f64,
    pub bound: f64,
    pub direction: Direction,
    pub violated: bool,
    /// Positive when violated: `value - bound` for `le`, `bound - value` for `ge`.
    pub margin: f64,
}

fn judge(value: f64, bound: f64, direction: Direction) -> Evaluation {
    let margin = match direction {
        Direction::Le => value - bound,
        Direction::Ge => bound - value,
    };
    Evaluation {
        value,
        bound,
        direction,
        violated: margin > 0.0,
        margin,
    }
}

/// Canonical value of `expr` on `v`.
pub fn evaluate(expr: &BellExpression, v: &BehaviorVector) -> Result<Evaluation> {
    evaluate_canonical(&canonicalize(expr), v)
}

pub fn evaluate_canonical(form: &CanonicalForm, v: &BehaviorVector) -> Result<Evaluation> {
    Ok(judge(form.value(v)?, form.bound, form.direction))
}

/// Value of `expr` as written, without canonicalisation.
pub fn evaluate_raw(expr: &BellExpression, v: &BehaviorVector) -> Result<Evaluation> {
    expr.scenario.ensure_same(&v.scenario())?;
    Ok(judge(v.dot(&expr.gamma()), expr.bound, expr.direction))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InvarianceReport {
    pub value_raw: f64,
    pub value_projected: f64,
    pub difference: f64,
}

/// Evaluates `expr` as written on `v` and on `project_l2(v)`.
pub fn invariance_check(expr: &BellExpression, v: &BehaviorVector) -> Result<InvarianceReport> {
    let value_raw = evaluate_raw(expr, v)?.value;
    let value_projected = evaluate_raw(expr, &project_l2(v))?.value;
    Ok(InvarianceReport {
        value_raw,
        value_projected,
        difference: (value_raw - value_projected).abs(),
    })
}

/// Optimum of `gamma . p` over deterministic local strategies (max for
/// `le`, min for `ge`) and a strategy attaining it.
pub fn local_bound(form: &CanonicalForm) -> (f64, Vec<Vec<u8>>) {
    let s = form.scenario;
    let mut best: Option<(f64, Vec<Vec<u8>>)> = None;
    for strat in deterministic_strategies(s) {
        let p = deterministic_behavior(s, &strat).expect("valid strategy");
        let v = p.dot(&form.gamma);
        let better = match (&best, form.direction) {
            (None, _) => true,
            (Some((b, _)), Direction::Le) => v > *b,
            (Some((b, _)), Direction::Ge) => v < *b,
        };
        if better {
            best = Some((v, strat));
        }
    }
    best.expect("at least one strategy")
}

/// The built-in inequality family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Builtin {
    Chsh,
    Mermin,
    Tilted { alpha: f64, beta: f64 },
    I3322,
    LosrGtnl,
}

impl FromStr for Builtin {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chsh" => Ok(Builtin::Chsh),
            "mermin" => Ok(Builtin::Mermin),
            "tilted" => Ok(Builtin::Tilted {
                alpha: 1.0,
                beta: 0.0,
            }),
            "i3322" => Ok(Builtin::I3322),
            "losr_gtnl" => Ok(Builtin::LosrGtnl),
            other => Err(Error::Domain(format!(
                "unknown expression '{other}' (expected chsh, mermin, tilted, i3322 or losr_gtnl)"
            ))),
        }
    }
}

impl fmt::Display for Builtin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Builtin::Chsh => write!(f, "chsh"),
            Builtin::Mermin => write!(f, "mermin"),
            Builtin::Tilted { alpha, beta } => write!(f, "tilted(alpha={alpha}, beta={beta})"),
            Builtin::I3322 => write!(f, "i3322"),
            Builtin::LosrGtnl => write!(f, "losr_gtnl"),
        }
    }
}

fn corr(s: Scenario, members: &[usize], settings: &[usize], coef: f64) -> CorrTerm {
    let subset = PartySubset::new(members, s.parties()).expect("built-in subset");
    CorrTerm {
        key: CorrelatorKey::new(s, subset, settings.to_vec()).expect("built-in key"),
        coef,
    }
}

/// Builds a built-in expression in correlator form.
pub fn builtin(which: Builtin) -> Result<BellExpression> {
    let (s, terms, bound) = match which {
        Builtin::Chsh => {
            let s = Scenario::new(2, 2)?;
            let t = vec![
                corr(s, &[1, 2], &[0, 0], 1.0),
                corr(s, &[1, 2], &[0, 1], 1.0),
                corr(s, &[1, 2], &[1, 0], 1.0),
                corr(s, &[1, 2], &[1, 1], -1.0),
            ];
            (s, t, 2.0)
        }
        Builtin::Mermin => {
            let s = Scenario::new(3, 2)?;
            let t = vec![
                corr(s, &[1, 2, 3], &[0, 0, 1], 1.0),
                corr(s, &[1, 2, 3], &[0, 1, 0], 1.0),
                corr(s, &[1, 2, 3], &[1, 0, 0], 1.0),
                corr(s, &[1, 2, 3], &[1, 1, 1], -1.0),
            ];
            (s, t, 2.0)
        }
        Builtin::Tilted { alpha, beta } => {
            if !(alpha.is_finite() && alpha >= 1.0 && beta.is_finite() && beta >= 0.0) {
                return Err(Error::Domain(format!(
                    "tilted needs alpha >= 1 and beta >= 0, got alpha={alpha}, beta={beta}"
                )));
            }
            let s = Scenario::new(2, 2)?;
            let mut t = Vec::new();
            if beta != 0.0 {
                t.push(corr(s, &[1], &[0], beta));
            }
            for x in 0..2 {
                for y in 0..2 {
                    let sign = if x * y == 1 { -1.0 } else { 1.0 };
                    t.push(corr(s, &[1, 2], &[x, y], alpha.powi(1 - x as i32) * sign));
                }
            }
            (s, t, beta + 2.0 * alpha)
        }
        Builtin::I3322 => {
            let s = Scenario::new(2, 3)?;
            let mut t = vec![
                corr(s, &[1], &[0], 1.0),
                corr(s, &[1], &[1], 1.0),
                corr(s, &[2], &[0], -1.0),
                corr(s, &[2], &[1], -1.0),
            ];
            for (x, y, c) in [
                (0, 0, 1.0),
                (0, 1, 1.0),
                (1, 0, 1.0),
                (1, 1, 1.0),
                (2, 0, 1.0),
                (2, 1, -1.0),
                (0, 2, 1.0),
                (1, 2, -1.0),
            ] {
                t.push(corr(s, &[1, 2], &[x, y], c));
            }
            (s, t, 4.0)
        }
        Builtin::LosrGtnl => {
            let s = Scenario::new(3, 2)?;
            let t = vec![
                corr(s, &[1, 2], &[0, 0], 1.0),
                corr(s, &[1, 2], &[0, 1], 1.0),
                corr(s, &[1, 2, 3], &[1, 0, 1], 1.0),
                corr(s, &[1, 2, 3], &[1, 1, 1], -1.0),
                corr(s, &[1, 3], &[0, 0], 2.0),
            ];
            (s, t, 4.0)
        }
    };
    Ok(
        BellExpression::new(s, None, Some(terms), bound, Direction::Le)?
            .with_name(which.to_string()),
    )
}

/// I3322 in its probability form, with each single-party marginal expanded
/// as the uniform average over the other party's settings.
pub fn i3322_probability_form() -> BellExpression {
    let s = Scenario::new(2, 3).expect("valid");
    let mut gamma = vec![0.0; s.dim()];
    let mut add = |a: [u8; 2], x: [usize; 2], c: f64| {
        gamma[s.encode_index(&a, &x).expect("valid")] += c;
    };
    for other in 0..3 {
        for b in 0..2 {
            add([0, b], [0, other], -1.0 / 3.0);
            add([b, 0], [other, 0], -2.0 / 3.0);
            add([b, 0], [other, 1], -1.0 / 3.0);
        }
    }
    for (x, y, c) in [
        (0, 0, 1.0),
        (1, 0, 1.0),
        (2, 0, 1.0),
        (0, 1, 1.0),
        (1, 1, 1.0),
        (2, 1, -1.0),
        (0, 2, 1.0),
        (1, 2, -1.0),
    ] {
        add([0, 0], [x, y], c);
    }
    let terms = gamma
        .iter()
        .enumerate()
        .filter(|(_, g)| **g != 0.0)
        .map(|(i, &coef)| {
            let (a, x) = s.decode_index(i).expect("in range");
            ProbTerm { a, x, coef }
        })
        .collect();
    BellExpression::new(s, Some(terms), None, 0.0, Direction::Le)
        .expect("valid")
        .with_name("i3322_prob")
}

// JSON interchange.

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum CoefJson {
    Number(f64),
    Text(String),
}

impl CoefJson {
    fn value(&self) -> Result<f64> {
        match self {
            CoefJson::Number(x) => Ok(*x),
            CoefJson::Text(t) => parse_coef(t),
        }
    }

    fn from_value(x: f64) -> Self {
        // Rationals whose binary expansion is not finite are written as
        // "p/q" so that they read back to the same f64.
        match exact_rational(x) {
            Some(r) if !(*r.denom() as u64).is_power_of_two() => {
                CoefJson::Text(format!("{}/{}", r.numer(), r.denom()))
            }
            _ => CoefJson::Number(x),
        }
    }
}

/// Parses `"3"`, `"-0.25"` or `"1/3"`.
pub fn parse_coef(text: &str) -> Result<f64> {
    let t = text.trim();
    let bad = || Error::Schema(format!("invalid coefficient '{text}'"));
    let v = match t.split_once('/') {
        Some((p, q)) => {
            let p: f64 = p.trim().parse().map_err(|_| bad())?;
            let q: f64 = q.trim().parse().map_err(|_| bad())?;
            if q == 0.0 {
                return Err(bad());
            }
            p / q
        }
        None => t.parse().map_err(|_| bad())?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad())
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum TermJson {
    Prob {
        a: Vec<u8>,
        x: Vec<usize>,
        coef: CoefJson,
    },
    Corr {
        #[serde(rename = "I")]
        subset: Vec<usize>,
        #[serde(rename = "xI")]
        settings: Vec<usize>,
        coef: CoefJson,
    },
}

#[derive(Debug, Serialize, Deserialize)]
struct ExpressionJson {
    scenario: Scenario,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    terms: Vec<TermJson>,
    bound: CoefJson,
    direction: Direction,
}

impl Serialize for BellExpression {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        let mut terms = Vec::new();
        for t in self.corr_terms.iter().flatten() {
            terms.push(TermJson::Corr {
                subset: t.key.subset.members(),
                settings: t.key.settings.clone(),
                coef: CoefJson::from_value(t.coef),
            });
        }
        for t in self.prob_terms.iter().flatten() {
            terms.push(TermJson::Prob {
                a: t.a.clone(),
                x: t.x.clone(),
                coef: CoefJson::from_value(t.coef),
            });
        }
        ExpressionJson {
            scenario: self.scenario,
            name: self.name.clone(),
            terms,
            bound: CoefJson::from_value(self.bound),
            direction: self.direction,
        }
        .serialize(serializer)
    }
}

impl TryFrom<ExpressionJson> for BellExpression {
    type Error = Error;
    fn try_from(raw: ExpressionJson) -> Result<Self> {
        let s = raw.scenario;
        let mut prob = Vec::new();
        let mut corr = Vec::new();
        for t in raw.terms {
            match t {
                TermJson::Prob { a, x, coef } => {
                    s.check_outcomes(&a)?;
                    s.check_settings(&x)?;
                    prob.push(ProbTerm {
                        a,
                        x,
                        coef: coef.value()?,
                    });
                }
                TermJson::Corr {
                    subset,
                    settings,
                    coef,
                } => {
                    let subset = PartySubset::new(&subset, s.parties())?;
                    corr.push(CorrTerm {
                        key: CorrelatorKey::new(s, subset, settings)?,
                        coef: coef.value()?,
                    });
                }
            }
        }
        let expr = BellExpression::new(
            s,
            (!prob.is_empty()).then_some(prob),
            (!corr.is_empty()).then_some(corr),
            raw.bound.value()?,
            raw.direction,
        )?;
        Ok(match raw.name {
            Some(n) => expr.with_name(n),
            None => expr,
        })
    }
}

impl<'de> Deserialize<'de> for BellExpression {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let raw = ExpressionJson::deserialize(deserializer)?;
        BellExpression::try_from(raw).map_err(serde::de::Error::custom)
    }
}

impl Serialize for CanonicalForm {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        self.to_expression().serialize(serializer)
    }
}
