//! The sparse equality system `A_eq p = b` encoding no-signalling and
//! normalisation, residual diagnostics, and a numerical kernel basis.

use std::io::Write;
use std::sync::OnceLock;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::scenario::{BehaviorVector, Scenario};

/// Singular values below this fraction of the largest one count as zero.
pub const KERNEL_REL_THRESHOLD: f64 = 1e-9;

/// Minimum ratio between the smallest retained and the largest discarded
/// singular value for the rank decision to be accepted.
const MIN_SINGULAR_GAP: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    NoSignalling,
    Normalization,
}

/// Identifies which equality a row encodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RowLabel {
    /// Party `party` (1-based) must not influence the others' marginal when
    /// switching from setting 0 to `setting`, in context `(outcomes, settings)`
    /// of the remaining parties.
    NoSignalling {
        party: usize,
        setting: usize,
        outcomes: Vec<u8>,
        settings: Vec<usize>,
    },
    Normalization {
        settings: Vec<usize>,
    },
}

impl std::fmt::Display for RowLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RowLabel::NoSignalling {
                party,
                setting,
                outcomes,
                settings,
            } => write!(
                f,
                "ns[party {party}, setting 0 vs {setting}, others a={outcomes:?} x={settings:?}]"
            ),
            RowLabel::Normalization { settings } => write!(f, "norm[x={settings:?}]"),
        }
    }
}

/// One row of `A_eq` with integer coefficients.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseRow {
    pub support: Vec<(usize, i32)>,
    pub kind: RowKind,
    pub label: RowLabel,
}

impl SparseRow {
    pub fn dot(&self, v: &[f64]) -> f64 {
        self.support.iter().map(|&(j, c)| c as f64 * v[j]).sum()
    }

    /// Dense copy of the row.
    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for &(j, c) in &self.support {
            out[j] = c as f64;
        }
        out
    }
}

fn insert_at<T: Copy>(rest: &[T], pos: usize, value: T) -> Vec<T> {
    let mut out = Vec::with_capacity(rest.len() + 1);
    out.extend_from_slice(&rest[..pos]);
    out.push(value);
    out.extend_from_slice(&rest[pos..]);
    out
}

/// The no-signalling row comparing setting 0 with setting `r` of party `i`
/// (1-based) in the context `(a_rest, x_rest)` of the other parties.
pub fn nosig_row(
    scenario: Scenario,
    i: usize,
    r: usize,
    a_rest: &[u8],
    x_rest: &[usize],
) -> Result<SparseRow> {
    let n = scenario.parties();
    if i == 0 || i > n {
        return Err(Error::Domain(format!("party {i} is not in 1..={n}")));
    }
    if r == 0 {
        return Err(Error::Domain(
            "setting r = 0 is the reference setting; a row comparing it to itself is trivial"
                .into(),
        ));
    }
    if r >= scenario.settings() {
        return Err(Error::Domain(format!(
            "setting r = {r} is not in 1..{}",
            scenario.settings()
        )));
    }
    if a_rest.len() != n - 1 || x_rest.len() != n - 1 {
        return Err(Error::Domain(format!(
            "context tuples must have length {}",
            n - 1
        )));
    }
    let mut support = Vec::with_capacity(4);
    for (xi, coef) in [(0, 1), (r, -1)] {
        let x = insert_at(x_rest, i - 1, xi);
        for ai in 0..2u8 {
            let a = insert_at(a_rest, i - 1, ai);
            support.push((scenario.encode_index(&a, &x)?, coef));
        }
    }
    support.sort_unstable();
    Ok(SparseRow {
        support,
        kind: RowKind::NoSignalling,
        label: RowLabel::NoSignalling {
            party: i,
            setting: r,
            outcomes: a_rest.to_vec(),
            settings: x_rest.to_vec(),
        },
    })
}

/// The normalisation row of setting tuple `x`.
pub fn norm_row(scenario: Scenario, x: &[usize]) -> Result<SparseRow> {
    scenario.check_settings(x)?;
    let start = scenario.setting_rank(x) * scenario.block_len();
    Ok(SparseRow {
        support: (start..start + scenario.block_len())
            .map(|j| (j, 1))
            .collect(),
        kind: RowKind::Normalization,
        label: RowLabel::Normalization {
            settings: x.to_vec(),
        },
    })
}

/// Constraint residuals split by row kind.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub nosig: Vec<f64>,
    pub norm: Vec<f64>,
    pub nosig_max: f64,
    pub norm_max: f64,
}

impl Residual {
    pub fn max_abs(&self) -> f64 {
        self.nosig_max.max(self.norm_max)
    }
}

/// `A_eq` and `b` for one scenario, rows ordered no-signalling first.
#[derive(Debug)]
pub struct ConstraintSystem {
    scenario: Scenario,
    rows: Vec<SparseRow>,
    rhs: Vec<f64>,
    kernel: OnceLock<DMatrix<f64>>,
}

impl Clone for ConstraintSystem {
    fn clone(&self) -> Self {
        let kernel = OnceLock::new();
        if let Some(k) = self.kernel.get() {
            let _ = kernel.set(k.clone());
        }
        ConstraintSystem {
            scenario: self.scenario,
            rows: self.rows.clone(),
            rhs: self.rhs.clone(),
            kernel,
        }
    }
}

/// Enumerates every no-signalling row and then every normalisation row.
pub fn build_constraint_system(scenario: Scenario) -> ConstraintSystem {
    let n = scenario.parties();
    let m = scenario.settings();
    let mut rows = Vec::with_capacity(scenario.constraint_rows());
    if n >= 1 {
        let rest_scn = (n > 1).then(|| Scenario::new(n - 1, m).expect("valid sub-scenario"));
        for i in 1..=n {
            for r in 1..m {
                match rest_scn {
                    Some(rest) => {
                        for xr in 0..rest.setting_blocks() {
                            let x_rest = rest.setting_tuple(xr);
                            for ar in 0..rest.block_len() {
                                let a_rest = rest.outcome_tuple(ar);
                                rows.push(
                                    nosig_row(scenario, i, r, &a_rest, &x_rest)
                                        .expect("enumerated labels are valid"),
                                );
                            }
                        }
                    }
                    None => rows.push(nosig_row(scenario, i, r, &[], &[]).expect("valid")),
                }
            }
        }
    }
    let nosig = rows.len();
    for xr in 0..scenario.setting_blocks() {
        rows.push(norm_row(scenario, &scenario.setting_tuple(xr)).expect("valid"));
    }
    let mut rhs = vec![0.0; nosig];
    rhs.resize(rows.len(), 1.0);
    ConstraintSystem {
        scenario,
        rows,
        rhs,
        kernel: OnceLock::new(),
    }
}

impl ConstraintSystem {
    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    pub fn rows(&self) -> &[SparseRow] {
        &self.rows
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn nosig_rows(&self) -> &[SparseRow] {
        &self.rows[..self.scenario.nosig_rows()]
    }

    pub fn norm_rows(&self) -> &[SparseRow] {
        &self.rows[self.scenario.nosig_rows()..]
    }

    /// Dense `t x d` copy of `A_eq`.
    pub fn dense(&self) -> DMatrix<f64> {
        let d = self.scenario.dim();
        let mut a = DMatrix::zeros(self.rows.len(), d);
        for (r, row) in self.rows.iter().enumerate() {
            for &(j, c) in &row.support {
                a[(r, j)] = c as f64;
            }
        }
        a
    }

    /// `A_eq v - b`, split by row kind, with the infinity norm of each part.
    pub fn residual(&self, v: &BehaviorVector) -> Result<Residual> {
        self.scenario.ensure_same(&v.scenario())?;
        let entries = v.entries();
        let k = self.scenario.nosig_rows();
        let all: Vec<f64> = self
            .rows
            .iter()
            .zip(&self.rhs)
            .map(|(row, b)| row.dot(entries) - b)
            .collect();
        let inf = |xs: &[f64]| xs.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
        let (nosig, norm) = all.split_at(k);
        Ok(Residual {
            nosig_max: inf(nosig),
            norm_max: inf(norm),
            nosig: nosig.to_vec(),
            norm: norm.to_vec(),
        })
    }

    fn singular_spectrum(&self) -> (Vec<f64>, DMatrix<f64>) {
        let d = self.scenario.dim();
        let t = self.rows.len();
        // Zero padding keeps the singular values and yields a full d x d V.
        let mut a = DMatrix::zeros(t.max(d), d);
        a.view_mut((0, 0), (t, d)).copy_from(&self.dense());
        let svd = a.svd(false, true);
        let v_t = svd.v_t.expect("requested V^T");
        (svd.singular_values.iter().copied().collect(), v_t)
    }

    /// Numerical rank of `A_eq`.
    pub fn rank(&self) -> usize {
        let (sv, _) = self.singular_spectrum();
        let max = sv.iter().copied().fold(0.0, f64::max);
        sv.iter()
            .filter(|&&s| s > KERNEL_REL_THRESHOLD * max)
            .count()
    }

    /// Orthonormal columns spanning `ker(A_eq)`, computed once and cached.
    pub fn kernel_basis(&self) -> Result<&DMatrix<f64>> {
        if let Some(k) = self.kernel.get() {
            return Ok(k);
        }
        let basis = self.compute_kernel()?;
        let _ = self.kernel.set(basis);
        Ok(self.kernel.get().expect("just set"))
    }

    fn compute_kernel(&self) -> Result<DMatrix<f64>> {
        let d = self.scenario.dim();
        let (sv, v_t) = self.singular_spectrum();
        let mut order: Vec<usize> = (0..sv.len()).collect();
        order.sort_by(|&i, &j| sv[j].total_cmp(&sv[i]));
        let max = sv[order[0]];
        let cut = KERNEL_REL_THRESHOLD * max;
        let rank = order.iter().filter(|&&i| sv[i] > cut).count();
        if rank > 0 && rank < order.len() {
            let gap = sv[order[rank - 1]] / sv[order[rank]].max(f64::MIN_POSITIVE);
            if gap < MIN_SINGULAR_GAP {
                return Err(Error::RankInstability { gap });
            }
        }
        let null: Vec<usize> = order[rank..].to_vec();
        let mut basis = DMatrix::zeros(d, null.len());
        for (c, &i) in null.iter().enumerate() {
            for j in 0..d {
                basis[(j, c)] = v_t[(i, j)];
            }
        }
        Ok(basis)
    }

    /// Coordinate-format dump: `row col coeff` lines, then a `# rhs` section.
    pub fn write_coo<W: Write>(&self, mut out: W) -> Result<()> {
        for (r, row) in self.rows.iter().enumerate() {
            for &(j, c) in &row.support {
                writeln!(out, "{r} {j} {c}")?;
            }
        }
        writeln!(out, "# rhs")?;
        for (r, b) in self.rhs.iter().enumerate() {
            writeln!(out, "{r} {b}")?;
        }
        Ok(())
    }
}
