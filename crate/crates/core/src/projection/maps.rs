//! Exact matrix representations of the three pipeline maps.

use crate::correlators::{average_settingwise, reconstruct_values, settingwise_values, Rational};
use crate::scenario::Scenario;

/// Dense row-major matrix over exact rationals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RationalMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Rational>,
}

impl RationalMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        RationalMatrix {
            rows,
            cols,
            data: vec![Rational::from_integer(0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = Rational::from_integer(1);
        }
        m
    }

    /// Builds the matrix of a linear map from its action on unit vectors.
    pub fn from_columns<F>(rows: usize, cols: usize, map: F) -> Self
    where
        F: Fn(&[Rational]) -> Vec<Rational>,
    {
        let mut m = Self::zeros(rows, cols);
        let mut unit = vec![Rational::from_integer(0); cols];
        for j in 0..cols {
            unit[j] = Rational::from_integer(1);
            let col = map(&unit);
            assert_eq!(col.len(), rows, "map output has the wrong length");
            for (i, v) in col.into_iter().enumerate() {
                m.data[i * cols + j] = v;
            }
            unit[j] = Rational::from_integer(0);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> Rational {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[Rational] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn mul(&self, rhs: &RationalMatrix) -> RationalMatrix {
        assert_eq!(self.cols, rhs.rows, "inner dimensions differ");
        let zero = Rational::from_integer(0);
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == zero {
                    continue;
                }
                for j in 0..rhs.cols {
                    let b = rhs.data[k * rhs.cols + j];
                    if b != zero {
                        out.data[i * rhs.cols + j] += a * b;
                    }
                }
            }
        }
        out
    }

    /// Row vector times matrix.
    pub fn left_mul(&self, v: &[Rational]) -> Vec<Rational> {
        assert_eq!(v.len(), self.rows);
        let mut out = vec![Rational::from_integer(0); self.cols];
        for (i, &vi) in v.iter().enumerate() {
            if vi == Rational::from_integer(0) {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += vi * a;
            }
        }
        out
    }

    pub fn to_f64(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.rows, self.cols, |i, j| {
            let r = self.get(i, j);
            *r.numer() as f64 / *r.denom() as f64
        })
    }
}

/// `T1` (probabilities to settingwise correlators), `T2` (averaging) and
/// `T3` (correlators back to probabilities).
#[derive(Debug, Clone)]
pub struct PipelineMaps {
    pub scenario: Scenario,
    pub t1: RationalMatrix,
    pub t2: RationalMatrix,
    pub t3: RationalMatrix,
}

impl PipelineMaps {
    /// `T3 T2 T1`.
    pub fn composite(&self) -> RationalMatrix {
        self.t3.mul(&self.t2.mul(&self.t1))
    }
}

pub fn build_pipeline_maps(scenario: Scenario) -> PipelineMaps {
    let d = scenario.dim();
    let k = scenario.correlator_count();
    PipelineMaps {
        scenario,
        t1: RationalMatrix::from_columns(d, d, |e| settingwise_values(scenario, e)),
        t2: RationalMatrix::from_columns(k, d, |e| average_settingwise(scenario, e, None)),
        t3: RationalMatrix::from_columns(d, k, |e| reconstruct_values(scenario, e)),
    }
}
