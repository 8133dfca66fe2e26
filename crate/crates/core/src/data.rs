//! Survival datasets: synthetic generators, CSV ingestion, splitting and standardization.

use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_distr::{Distribution, Exp, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{KanAftError, Result};

/// Right-censored observations `(T_i, delta_i, z_i)` stored column-wise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalDataset {
    pub times: Vec<f64>,
    pub events: Vec<bool>,
    /// One row per record.
    pub covariates: Vec<Vec<f64>>,
    pub covariate_names: Vec<String>,
}

impl SurvivalDataset {
    pub fn new(
        times: Vec<f64>,
        events: Vec<bool>,
        covariates: Vec<Vec<f64>>,
        covariate_names: Vec<String>,
    ) -> Result<Self> {
        let n = times.len();
        if events.len() != n || covariates.len() != n {
            return Err(KanAftError::Shape {
                expected: n,
                got: events.len().min(covariates.len()),
            });
        }
        if let Some(t) = times.iter().find(|t| !(**t > 0.0) || !t.is_finite()) {
            return Err(KanAftError::Domain(format!(
                "observed times must be positive and finite, got {t}"
            )));
        }
        let p = covariate_names.len();
        if let Some(row) = covariates.iter().find(|r| r.len() != p) {
            return Err(KanAftError::Shape {
                expected: p,
                got: row.len(),
            });
        }
        Ok(SurvivalDataset {
            times,
            events,
            covariates,
            covariate_names,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn n_covariates(&self) -> usize {
        self.covariate_names.len()
    }

    pub fn n_events(&self) -> usize {
        self.events.iter().filter(|e| **e).count()
    }

    pub fn censoring_fraction(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        1.0 - self.n_events() as f64 / self.len() as f64
    }

    /// Fails unless at least one record has an observed event.
    pub fn require_events(&self) -> Result<()> {
        if self.n_events() == 0 {
            return Err(KanAftError::Degenerate(
                "dataset has no uncensored records".into(),
            ));
        }
        Ok(())
    }

    pub fn subset(&self, idx: &[usize]) -> SurvivalDataset {
        SurvivalDataset {
            times: idx.iter().map(|&i| self.times[i]).collect(),
            events: idx.iter().map(|&i| self.events[i]).collect(),
            covariates: idx.iter().map(|&i| self.covariates[i].clone()).collect(),
            covariate_names: self.covariate_names.clone(),
        }
    }

    /// Writes `time,event,<covariates>` with full-precision numbers.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["time".to_string(), "event".to_string()];
        header.extend(self.covariate_names.iter().cloned());
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut row = vec![
                self.times[i].to_string(),
                if self.events[i] { "1" } else { "0" }.to_string(),
            ];
            row.extend(self.covariates[i].iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Truth {
    Linear,
    Nonlinear,
}

impl std::str::FromStr for Truth {
    type Err = KanAftError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Truth::Linear),
            "nonlinear" | "non-linear" => Ok(Truth::Nonlinear),
            other => Err(KanAftError::Config(format!(
                "unknown truth '{other}' (expected linear or nonlinear)"
            ))),
        }
    }
}

impl Truth {
    /// Noise-free log event time for a covariate triple.
    pub fn log_time(self, z: &[f64]) -> f64 {
        match self {
            Truth::Linear => 0.5 * z[0] - 0.3 * z[1] + z[2],
            Truth::Nonlinear => 0.5 * z[0] * z[0] + 0.3 * z[1].exp() + 0.8 * z[2].sin(),
        }
    }
}

/// Synthetic generator settings. Censoring times are exponential with mean `censor_mean`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub n: usize,
    pub truth: Truth,
    pub censor_mean: f64,
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec::new(Truth::Linear, 1000, 0)
    }
}

impl SyntheticSpec {
    pub fn new(truth: Truth, n: usize, seed: u64) -> Self {
        SyntheticSpec {
            n,
            truth,
            censor_mean: 10.0,
            noise_sd: 0.5,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(KanAftError::Config("synthetic n must be at least 2".into()));
        }
        if !(self.censor_mean > 0.0) || !(self.noise_sd > 0.0) {
            return Err(KanAftError::Config(
                "censoring mean and noise sd must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Draws `n` records: `z ~ N(0, I_3)`, `log T' = f(z) + N(0, sd^2)`, `C ~ Exp(mean)`,
/// `T = min(T', C)`, `delta = [T' <= C]`.
pub fn generate(spec: &SyntheticSpec) -> Result<SurvivalDataset> {
    spec.validate()?;
    let mut rng = rand::rngs::StdRng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_sd)
        .map_err(|e| KanAftError::Config(format!("noise distribution: {e}")))?;
    let censor = Exp::new(1.0 / spec.censor_mean)
        .map_err(|e| KanAftError::Config(format!("censoring distribution: {e}")))?;
    let mut times = Vec::with_capacity(spec.n);
    let mut events = Vec::with_capacity(spec.n);
    let mut covariates = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let z: Vec<f64> = (0..3).map(|_| StandardNormal.sample(&mut rng)).collect();
        let eps: f64 = noise.sample(&mut rng);
        let c: f64 = censor.sample(&mut rng);
        let latent = (spec.truth.log_time(&z) + eps).exp();
        let event = latent <= c;
        let t = if event { latent } else { c };
        if !(t > 0.0) || !t.is_finite() {
            return Err(KanAftError::NumericGuard(format!(
                "generated a non-positive or non-finite time {t}"
            )));
        }
        times.push(t);
        events.push(event);
        covariates.push(z);
    }
    SurvivalDataset::new(
        times,
        events,
        covariates,
        vec!["z1".into(), "z2".into(), "z3".into()],
    )
}

pub fn generate_linear(spec: &SyntheticSpec) -> Result<SurvivalDataset> {
    if spec.truth != Truth::Linear {
        return Err(KanAftError::Config("generate_linear needs truth = linear".into()));
    }
    generate(spec)
}

pub fn generate_nonlinear(spec: &SyntheticSpec) -> Result<SurvivalDataset> {
    if spec.truth != Truth::Nonlinear {
        return Err(KanAftError::Config(
            "generate_nonlinear needs truth = nonlinear".into(),
        ));
    }
    generate(spec)
}

/// Column mapping for a survival CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CsvSchema {
    pub time_column: String,
    pub event_column: String,
    /// Empty means every column other than time and event.
    pub covariate_columns: Vec<String>,
    pub event_true_values: BTreeSet<String>,
    pub delimiter: char,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            time_column: "time".into(),
            event_column: "event".into(),
            covariate_columns: Vec::new(),
            event_true_values: ["1", "true", "TRUE", "True", "dead", "event", "yes"]
                .into_iter()
                .map(String::from)
                .collect(),
            delimiter: ',',
        }
    }
}

/// A loaded dataset plus the number of rows skipped for missing values.
#[derive(Debug, Clone)]
pub struct LoadedCsv {
    pub dataset: SurvivalDataset,
    pub dropped_rows: usize,
}

fn is_missing(cell: &str) -> bool {
    let c = cell.trim();
    c.is_empty() || c.eq_ignore_ascii_case("na") || c.eq_ignore_ascii_case("nan")
}

pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<LoadedCsv> {
    let file = std::fs::File::open(path)?;
    read_csv(file, schema)
}

pub fn read_csv<R: Read>(reader: R, schema: &CsvSchema) -> Result<LoadedCsv> {
    if !schema.delimiter.is_ascii() {
        return Err(KanAftError::Config("CSV delimiter must be ASCII".into()));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter as u8)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
    let find = |name: &str| -> Result<usize> {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| KanAftError::Schema(format!("column '{name}' not found in header")))
    };
    let time_idx = find(&schema.time_column)?;
    let event_idx = find(&schema.event_column)?;
    if schema.time_column == schema.event_column {
        return Err(KanAftError::Schema("time and event columns must differ".into()));
    }
    let names: Vec<String> = if schema.covariate_columns.is_empty() {
        header
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != time_idx && *i != event_idx)
            .map(|(_, h)| h.clone())
            .collect()
    } else {
        schema.covariate_columns.clone()
    };
    if names.is_empty() {
        return Err(KanAftError::Schema("no covariate columns selected".into()));
    }
    if names
        .iter()
        .any(|n| *n == schema.time_column || *n == schema.event_column)
    {
        return Err(KanAftError::Schema(
            "covariate columns must not include the time or event column".into(),
        ));
    }
    let cov_idx: Vec<usize> = names.iter().map(|n| find(n)).collect::<Result<_>>()?;

    let mut times = Vec::new();
    let mut events = Vec::new();
    let mut covariates = Vec::new();
    let mut dropped = 0;
    for (row_no, record) in rdr.records().enumerate() {
        let record = record?;
        // header is line 1
        let line = record.position().map_or(row_no + 2, |p| p.line() as usize);
        let cell = |i: usize| record.get(i).unwrap_or("");
        let selected = std::iter::once(time_idx)
            .chain(std::iter::once(event_idx))
            .chain(cov_idx.iter().copied());
        if selected.clone().any(|i| is_missing(cell(i))) {
            dropped += 1;
            continue;
        }
        let t: f64 = cell(time_idx).parse().map_err(|_| KanAftError::Parse {
            line,
            message: format!("time value '{}' is not a number", cell(time_idx)),
        })?;
        if !(t > 0.0) || !t.is_finite() {
            return Err(KanAftError::Parse {
                line,
                message: format!("time must be positive, got {t}"),
            });
        }
        let event = schema.event_true_values.contains(cell(event_idx));
        let row = cov_idx
            .iter()
            .zip(&names)
            .map(|(&i, name)| {
                cell(i).parse::<f64>().map_err(|_| KanAftError::Parse {
                    line,
                    message: format!("covariate '{name}' value '{}' is not a number", cell(i)),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        times.push(t);
        events.push(event);
        covariates.push(row);
    }
    if times.is_empty() {
        return Err(KanAftError::EmptyDataset(
            "no usable rows after dropping missing values".into(),
        ));
    }
    Ok(LoadedCsv {
        dataset: SurvivalDataset::new(times, events, covariates, names)?,
        dropped_rows: dropped,
    })
}

/// Seeded random train/test split. Reshuffles (up to 10 attempts) until both sides hold an event.
pub fn split(
    data: &SurvivalDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(SurvivalDataset, SurvivalDataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(KanAftError::Config(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let n = data.len();
    let n_test = ((n as f64) * test_fraction).round() as usize;
    if n_test == 0 || n_test >= n {
        return Err(KanAftError::Degenerate(format!(
            "cannot split {n} records with test fraction {test_fraction}"
        )));
    }
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    for _ in 0..10 {
        idx.shuffle(&mut rng);
        let (test_idx, train_idx) = idx.split_at(n_test);
        let has_event = |ix: &[usize]| ix.iter().any(|&i| data.events[i]);
        if has_event(train_idx) && has_event(test_idx) {
            let mut train_idx = train_idx.to_vec();
            let mut test_idx = test_idx.to_vec();
            train_idx.sort_unstable();
            test_idx.sort_unstable();
            return Ok((data.subset(&train_idx), data.subset(&test_idx)));
        }
    }
    Err(KanAftError::Degenerate(
        "could not find a split with uncensored records on both sides".into(),
    ))
}

/// Per-covariate z-score statistics estimated on a training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationStats {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    /// `true` where the covariate had zero variance and passes through unchanged.
    pub passthrough: Vec<bool>,
}

impl StandardizationStats {
    /// Mean and population standard deviation of every column.
    pub fn fit(covariates: &[Vec<f64>]) -> Result<Self> {
        if covariates.len() < 2 {
            return Err(KanAftError::Degenerate(
                "standardization needs at least two records".into(),
            ));
        }
        let p = covariates[0].len();
        let n = covariates.len() as f64;
        let mut means = vec![0.0; p];
        for row in covariates {
            for (m, v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut vars = vec![0.0; p];
        for row in covariates {
            for ((s, v), m) in vars.iter_mut().zip(row).zip(&means) {
                *s += (v - m) * (v - m);
            }
        }
        let mut sds = Vec::with_capacity(p);
        let mut passthrough = Vec::with_capacity(p);
        for (j, var) in vars.iter().enumerate() {
            let sd = (var / n).sqrt();
            if sd > 1e-12 * (1.0 + means[j].abs()) {
                sds.push(sd);
                passthrough.push(false);
            } else {
                means[j] = 0.0;
                sds.push(1.0);
                passthrough.push(true);
            }
        }
        Ok(StandardizationStats {
            means,
            sds,
            passthrough,
        })
    }

    pub fn identity(p: usize) -> Self {
        StandardizationStats {
            means: vec![0.0; p],
            sds: vec![1.0; p],
            passthrough: vec![false; p],
        }
    }

    pub fn apply_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.means.iter().zip(&self.sds))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn apply(&self, data: &SurvivalDataset) -> SurvivalDataset {
        SurvivalDataset {
            covariates: data.covariates.iter().map(|r| self.apply_row(r)).collect(),
            ..data.clone()
        }
    }
}

/// Z-scores both splits with training statistics.
pub fn standardize(
    train: &SurvivalDataset,
    test: &SurvivalDataset,
) -> Result<(SurvivalDataset, SurvivalDataset, StandardizationStats)> {
    let stats = StandardizationStats::fit(&train.covariates)?;
    Ok((stats.apply(train), stats.apply(test), stats))
}
