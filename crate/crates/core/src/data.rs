//! Count tables: CSV ingestion, frequencies and settings distribution,
//! signalling diagnostics, and synthetic drift data.

use std::io::{BufRead, BufReader, Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::Serialize;

use crate::constraints::{ConstraintSystem, RowLabel};
use crate::error::{Error, Result};
use crate::projection::{project_l2, SettingsWeights};
use crate::scenario::{uniform_behavior, BehaviorVector, Role, Scenario};

/// Counts `N(a|x)` in flat behaviour order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountTable {
    scenario: Scenario,
    counts: Vec<u64>,
}

/// The published (2,2,2) dataset: rows `xy = 00, 01, 10, 11`, columns
/// `ab = 00, 01, 10, 11`.
pub const TABLE1: [[u64; 4]; 4] = [
    [3166, 1851, 2043, 1243520],
    [3637, 1338, 13544, 1230633],
    [3992, 13752, 1226, 1230686],
    [357, 17648, 16841, 1215766],
];

pub fn table1() -> CountTable {
    CountTable::from_counts(
        Scenario::new(2, 2).expect("valid"),
        TABLE1.iter().flatten().copied().collect(),
    )
    .expect("16 entries")
}

impl CountTable {
    pub fn from_counts(scenario: Scenario, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != scenario.dim() {
            return Err(Error::DimensionMismatch {
                expected: scenario.dim(),
                got: counts.len(),
            });
        }
        Ok(CountTable { scenario, counts })
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn get(&self, a: &[u8], x: &[usize]) -> Result<u64> {
        Ok(self.counts[self.scenario.encode_index(a, x)?])
    }

    /// `N(x)` by setting rank.
    pub fn setting_totals(&self) -> Vec<u64> {
        self.counts
            .chunks(self.scenario.block_len())
            .map(|b| b.iter().sum())
            .collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Long-format CSV with a header, one row per `(x, a)` including zeros.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let s = self.scenario;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(header(s)).map_err(csv_error)?;
        for (idx, c) in self.counts.iter().enumerate() {
            let (a, x) = s.decode_index(idx)?;
            let mut rec: Vec<String> = x.iter().map(|v| v.to_string()).collect();
            rec.extend(a.iter().map(|v| v.to_string()));
            rec.push(c.to_string());
            w.write_record(&rec).map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn header(s: Scenario) -> Vec<String> {
    let n = s.parties();
    (1..=n)
        .map(|i| format!("x{i}"))
        .chain((1..=n).map(|i| format!("a{i}")))
        .chain(std::iter::once("count".to_string()))
        .collect()
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse {
            line,
            message: format!("{other:?}"),
        },
    }
}

/// Reads `x1,..,xn,a1,..,an,count` rows; absent rows count as zero.
pub fn load_counts<R: Read>(source: R, scenario: Scenario) -> Result<CountTable> {
    let n = scenario.parties();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(source);
    let expected = header(scenario);
    let got: Vec<String> = reader
        .headers()
        .map_err(csv_error)?
        .iter()
        .map(str::to_string)
        .collect();
    if got != expected {
        return Err(Error::Parse {
            line: 1,
            message: format!(
                "expected header {}, got {}",
                expected.join(","),
                got.join(",")
            ),
        });
    }
    let mut counts = vec![0u64; scenario.dim()];
    let mut seen = vec![false; scenario.dim()];
    for rec in reader.records() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let bad = |message: String| Error::Parse { line, message };
        if rec.len() != 2 * n + 1 {
            return Err(bad(format!(
                "expected {} fields, got {}",
                2 * n + 1,
                rec.len()
            )));
        }
        let field = |i: usize| -> Result<i64> {
            rec[i]
                .parse::<i64>()
                .map_err(|_| bad(format!("field {} ('{}') is not an integer", i + 1, &rec[i])))
        };
        let mut x = Vec::with_capacity(n);
        let mut a = Vec::with_capacity(n);
        for i in 0..n {
            let v = field(i)?;
            if v < 0 || v as usize >= scenario.settings() {
                return Err(bad(format!(
                    "x{} = {v} is not in 0..{}",
                    i + 1,
                    scenario.settings()
                )));
            }
            x.push(v as usize);
        }
        for i in 0..n {
            let v = field(n + i)?;
            if !(0..=1).contains(&v) {
                return Err(bad(format!(
                    "a{} = {v} is not an outcome in {{0,1}}",
                    i + 1
                )));
            }
            a.push(v as u8);
        }
        let c = field(2 * n)?;
        if c < 0 {
            return Err(bad(format!("negative count {c}")));
        }
        let idx = scenario.encode_index(&a, &x)?;
        if std::mem::replace(&mut seen[idx], true) {
            return Err(Error::DuplicateKey(format!(
                "line {line}: N(a={a:?}|x={x:?}) given twice"
            )));
        }
        counts[idx] = c as u64;
    }
    CountTable::from_counts(scenario, counts)
}

/// Reads a (2,2,2) grid: four rows in setting order `00, 01, 10, 11`, each
/// holding four counts for `ab = 00, 01, 10, 11`. An optional leading row
/// label must match the setting; non-numeric header lines and `#` comments
/// are skipped.
pub fn load_grid222<R: Read>(source: R) -> Result<CountTable> {
    let labels = ["00", "01", "10", "11"];
    let mut counts = Vec::with_capacity(16);
    let mut row = 0;
    for (i, line) in BufReader::new(source).lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = t
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|f| !f.is_empty())
            .collect();
        let numeric = |f: &str| f.parse::<u64>().is_ok();
        let values = match fields.len() {
            4 => &fields[..],
            5 => {
                let is_label = labels.contains(&fields[0]) || numeric(fields[0]);
                if counts.is_empty() && !is_label {
                    continue;
                }
                if row < 4 && fields[0] != labels[row] {
                    return Err(Error::Parse {
                        line: lineno,
                        message: format!(
                            "row label '{}' where '{}' was expected",
                            fields[0], labels[row]
                        ),
                    });
                }
                &fields[1..]
            }
            _ => &fields[..],
        };
        if !values.iter().all(|f| numeric(f)) {
            if counts.is_empty() && fields.iter().any(|f| f.parse::<i64>().is_err()) {
                continue;
            }
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected four nonnegative counts, got '{t}'"),
            });
        }
        if values.len() != 4 {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected four counts, got {}", values.len()),
            });
        }
        if row == 4 {
            return Err(Error::Parse {
                line: lineno,
                message: "more than four setting rows".into(),
            });
        }
        counts.extend(values.iter().map(|f| f.parse::<u64>().expect("checked")));
        row += 1;
    }
    if row != 4 {
        return Err(Error::Parse {
            line: 0,
            message: format!("expected four setting rows, got {row}"),
        });
    }
    CountTable::from_counts(Scenario::new(2, 2)?, counts)
}

/// `f(a|x) = N(a,x)/N(x)` and `pi(x) = N(x)/N`.
pub fn frequencies(table: &CountTable) -> Result<(BehaviorVector, SettingsWeights)> {
    let s = table.scenario;
    let totals = table.setting_totals();
    if let Some(xr) = totals.iter().position(|&t| t == 0) {
        return Err(Error::InvalidBehavior(format!(
            "no trials recorded for setting {:?}",
            s.setting_tuple(xr)
        )));
    }
    let block = s.block_len();
    let f = table
        .counts
        .iter()
        .enumerate()
        .map(|(i, &c)| c as f64 / totals[i / block] as f64)
        .collect();
    let n = table.total() as f64;
    let pi = totals.iter().map(|&t| t as f64 / n).collect();
    Ok((
        BehaviorVector::new(s, f, Role::Frequency)?,
        SettingsWeights::new(s, pi)?,
    ))
}

/// Marginal probability that the parties in `parties` (1-based, increasing)
/// return `outcomes` at the full setting tuple `x`.
pub fn marginal(
    v: &BehaviorVector,
    parties: &[usize],
    outcomes: &[u8],
    x: &[usize],
) -> Result<f64> {
    let s = v.scenario();
    s.check_settings(x)?;
    if parties.len() != outcomes.len() {
        return Err(Error::Domain(
            "one outcome per listed party is required".into(),
        ));
    }
    let block = v.block(s.setting_rank(x));
    Ok((0..s.block_len())
        .filter(|&ar| {
            let a = s.outcome_tuple(ar);
            parties.iter().zip(outcomes).all(|(&p, &o)| a[p - 1] == o)
        })
        .map(|ar| block[ar])
        .sum())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowResidual {
    pub label: String,
    /// Party whose setting changes.
    pub party: usize,
    /// The setting compared against setting 0.
    pub setting: usize,
    /// Outcomes of the other parties, in party order.
    pub outcomes: Vec<u8>,
    /// Settings of the other parties, in party order.
    pub settings: Vec<usize>,
    /// Marginal of the other parties with `party` at setting 0.
    pub marginal_at_zero: f64,
    /// Marginal of the other parties with `party` at `setting`.
    pub marginal_at_setting: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignallingReport {
    pub rows: Vec<RowResidual>,
    pub max_abs: f64,
    pub mean_abs: f64,
    /// Row with the largest `|residual|`; `None` when there are no rows.
    pub worst: Option<RowResidual>,
}

/// Residual of every no-signalling row, with the marginals it compares.
pub fn signalling_report(
    f: &BehaviorVector,
    system: &ConstraintSystem,
) -> Result<SignallingReport> {
    let s = f.scenario();
    s.ensure_same(&system.scenario())?;
    let mut rows = Vec::with_capacity(system.nosig_rows().len());
    for row in system.nosig_rows() {
        let RowLabel::NoSignalling {
            party,
            setting,
            outcomes,
            settings,
        } = &row.label
        else {
            continue;
        };
        let others: Vec<usize> = (1..=s.parties()).filter(|p| p != party).collect();
        let full = |xi: usize| {
            let mut x = settings.clone();
            x.insert(party - 1, xi);
            x
        };
        let marginal_at_zero = marginal(f, &others, outcomes, &full(0))?;
        let marginal_at_setting = marginal(f, &others, outcomes, &full(*setting))?;
        rows.push(RowResidual {
            label: row.label.to_string(),
            party: *party,
            setting: *setting,
            outcomes: outcomes.clone(),
            settings: settings.clone(),
            marginal_at_zero,
            marginal_at_setting,
            residual: row.dot(f.entries()),
        });
    }
    let max_abs = rows.iter().map(|r| r.residual.abs()).fold(0.0, f64::max);
    let mean_abs = if rows.is_empty() {
        0.0
    } else {
        rows.iter().map(|r| r.residual.abs()).sum::<f64>() / rows.len() as f64
    };
    let worst = rows
        .iter()
        .max_by(|a, b| a.residual.abs().total_cmp(&b.residual.abs()))
        .cloned();
    Ok(SignallingReport {
        rows,
        max_abs,
        mean_abs,
        worst,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriftMode {
    /// Counts are `round(sum_b N_b p_b(a|x))`.
    Expected,
    /// Each block is a multinomial draw.
    Sampled,
}

#[derive(Debug, Clone)]
pub struct DriftConfig {
    /// `N(x)` by setting rank.
    pub trials_per_setting: Vec<u64>,
    pub drift: f64,
    pub blocks: usize,
    pub seed: u64,
    pub mode: DriftMode,
}

impl DriftConfig {
    pub fn uniform(scenario: Scenario, trials: u64) -> Self {
        DriftConfig {
            trials_per_setting: vec![trials; scenario.setting_blocks()],
            drift: 0.0,
            blocks: 1,
            seed: 0,
            mode: DriftMode::Expected,
        }
    }
}

/// Seed-derived direction orthogonal to the kernel with zero block sums,
/// scaled to unit infinity norm. `None` when no such direction exists.
pub fn drift_direction(scenario: Scenario, seed: u64) -> Option<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let block = scenario.block_len();
    let mut w: Vec<f64> = (0..scenario.dim())
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    for chunk in w.chunks_mut(block) {
        let mean = chunk.iter().sum::<f64>() / block as f64;
        chunk.iter_mut().for_each(|v| *v -= mean);
    }
    // With zero block sums, project_l2(d + w) - d is the kernel part of w.
    let d = uniform_behavior(scenario);
    let shifted: Vec<f64> = w.iter().zip(d.entries()).map(|(a, b)| a + b).collect();
    let proj = project_l2(&BehaviorVector::unconstrained(scenario, shifted).expect("dim d"));
    let u: Vec<f64> = w
        .iter()
        .zip(proj.entries())
        .zip(d.entries())
        .map(|((wi, pi), di)| wi - (pi - di))
        .collect();
    let norm = u.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    (norm > 1e-9).then(|| u.into_iter().map(|v| v / norm).collect())
}

/// Synthetic counts from `base` with a linear drift along a signalling
/// direction across `blocks` sequential blocks per setting.
pub fn generate_drift_counts(
    base: &BehaviorVector,
    system: &ConstraintSystem,
    config: &DriftConfig,
) -> Result<CountTable> {
    let s = base.scenario();
    s.ensure_same(&system.scenario())?;
    if config.trials_per_setting.len() != s.setting_blocks() {
        return Err(Error::DimensionMismatch {
            expected: s.setting_blocks(),
            got: config.trials_per_setting.len(),
        });
    }
    if config.blocks == 0 {
        return Err(Error::Domain("blocks must be at least 1".into()));
    }
    if !config.drift.is_finite() {
        return Err(Error::Domain(format!(
            "drift must be finite, got {}",
            config.drift
        )));
    }
    if base.has_negative_entries()
        || base
            .block_sums()
            .iter()
            .any(|b| (b - 1.0).abs() > crate::scenario::NORMALIZATION_TOL)
    {
        return Err(Error::InvalidBehavior(
            "base must be a probability vector".into(),
        ));
    }
    let res = system.residual(base)?;
    if res.max_abs() > 1e-9 {
        return Err(Error::InvalidBehavior(format!(
            "base is signalling (constraint residual {:.3e})",
            res.max_abs()
        )));
    }
    let direction = if config.drift == 0.0 {
        vec![0.0; s.dim()]
    } else {
        drift_direction(s, config.seed).ok_or_else(|| {
            Error::Domain(format!(
                "scenario {s} admits no signalling direction; drift must be 0"
            ))
        })?
    };

    let block = s.block_len();
    let mut block_probs = Vec::with_capacity(config.blocks);
    for b in 0..config.blocks {
        let scale = config.drift * (b as f64 / config.blocks as f64 - 0.5);
        let mut p: Vec<f64> = base
            .entries()
            .iter()
            .zip(&direction)
            .map(|(v, u)| v + scale * u)
            .collect();
        for (i, v) in p.iter_mut().enumerate() {
            if !(-1e-12..=1.0 + 1e-12).contains(v) {
                let (a, x) = s.decode_index(i)?;
                return Err(Error::Domain(format!(
                    "drift {} pushes p(a={a:?}|x={x:?}) to {v:.6} in block {b}",
                    config.drift
                )));
            }
            *v = v.clamp(0.0, 1.0);
        }
        block_probs.push(p);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut counts = vec![0u64; s.dim()];
    for (xr, &total) in config.trials_per_setting.iter().enumerate() {
        let per = total / config.blocks as u64;
        let extra = (total % config.blocks as u64) as usize;
        let range = xr * block..(xr + 1) * block;
        match config.mode {
            DriftMode::Expected => {
                for (c, i) in range.clone().enumerate() {
                    let mean: f64 = (0..config.blocks)
                        .map(|b| (per + (b < extra) as u64) as f64 * block_probs[b][i])
                        .sum();
                    counts[xr * block + c] = mean.round() as u64;
                }
            }
            DriftMode::Sampled => {
                for (b, probs) in block_probs.iter().enumerate() {
                    let n_b = per + (b < extra) as u64;
                    let draw = multinomial(&mut rng, n_b, &probs[range.clone()])?;
                    for (c, k) in draw.into_iter().enumerate() {
                        counts[xr * block + c] += k;
                    }
                }
            }
        }
    }
    CountTable::from_counts(s, counts)
}

fn multinomial<R: Rng>(rng: &mut R, trials: u64, probs: &[f64]) -> Result<Vec<u64>> {
    let mut out = vec![0u64; probs.len()];
    let mut left = trials;
    let mut mass: f64 = probs.iter().sum();
    for (i, &p) in probs.iter().enumerate() {
        if left == 0 {
            break;
        }
        if i + 1 == probs.len() {
            out[i] = left;
            break;
        }
        let q = if mass > 0.0 {
            (p / mass).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let k = Binomial::new(left, q)
            .map_err(|e| Error::Domain(format!("binomial({left}, {q}): {e}")))?
            .sample(rng);
        out[i] = k;
        left -= k;
        mass -= p;
    }
    Ok(out)
}
