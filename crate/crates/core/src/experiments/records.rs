use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gnc::fit_estimate;
use crate::metrics::MarginReport;

/// Bumped whenever a column is added, removed or changes meaning.
pub const SCHEMA_VERSION: u32 = 1;

/// One network (or, for a G&C cell that accepted nothing, one placeholder
/// row with `fitted = false` and empty metrics).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub schema: u32,
    pub study: String,
    pub cell: usize,
    /// `sgd` or `gnc`.
    pub algorithm: String,
    /// Starting point of SGD: `prior` or `gnc`. Always `prior` for G&C.
    pub init: String,
    pub arch: String,
    pub params: usize,
    pub prior: String,
    pub dataset: String,
    /// `a-b` with the +1 class first.
    pub pair: String,
    pub n_train: usize,
    pub replicate: usize,
    pub subset_seed: u64,
    pub seed: u64,
    /// Index of the network within its cell.
    pub net: usize,
    /// G&C draw index of this network.
    pub draw: Option<u64>,
    /// G&C draws examined by the whole cell (`M`).
    pub cell_draws: Option<u64>,
    pub cell_target: usize,
    /// The cell stopped short of `cell_target` networks.
    pub censored: bool,
    pub epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub fitted: bool,
    pub g_min: f64,
    pub lip_est: f64,
    pub frob_prod: f64,
    pub lip_loss: f64,
    pub wn_loss: f64,
    pub train_acc: f64,
    pub test_acc: f64,
    pub degenerate: bool,
}

impl FitRecord {
    pub fn set_metrics(&mut self, m: &MarginReport) {
        self.g_min = m.g_min;
        self.lip_est = m.lipschitz_estimate;
        self.frob_prod = m.frobenius_product;
        self.lip_loss = m.lipschitz_normalized_train_loss;
        self.wn_loss = m.weight_normalized_train_loss;
        self.train_acc = m.train_accuracy;
        self.test_acc = m.test_accuracy;
        self.degenerate = m.degenerate;
    }

    pub fn clear_metrics(&mut self) {
        for v in [
            &mut self.g_min,
            &mut self.lip_est,
            &mut self.frob_prod,
            &mut self.lip_loss,
            &mut self.wn_loss,
            &mut self.train_acc,
            &mut self.test_acc,
        ] {
            *v = f64::NAN;
        }
        self.degenerate = false;
    }

    fn group_key(&self) -> (usize, &str, Option<usize>) {
        (self.cell, &self.init, self.epochs)
    }
}

/// Per-cell aggregate. Accuracy and loss means use fitted records only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub schema: u32,
    pub study: String,
    pub cell: usize,
    pub algorithm: String,
    pub init: String,
    pub arch: String,
    pub params: usize,
    pub prior: String,
    pub dataset: String,
    pub pair: String,
    pub n_train: usize,
    pub replicate: usize,
    pub epochs: Option<usize>,
    pub records: usize,
    pub fitted: usize,
    pub target: usize,
    pub mean_test_acc: f64,
    /// Sample standard deviation; NaN below two fitted records.
    pub std_test_acc: f64,
    pub mean_train_acc: f64,
    pub mean_lip_loss: f64,
    pub mean_wn_loss: f64,
    pub mean_g_min: f64,
    pub draws: Option<u64>,
    pub rejected: Option<u64>,
    pub p_hat: Option<f64>,
    pub neg_log2: Option<f64>,
    pub std_err: Option<f64>,
    pub upper_bound_only: Option<bool>,
    pub censored: bool,
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return f64::NAN;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

/// Groups records by `(cell, init, epochs)` in order of first appearance and
/// aggregates each group. A pure function of its input.
pub fn summarize(records: &[FitRecord]) -> Vec<SummaryRow> {
    let mut groups: Vec<Vec<&FitRecord>> = Vec::new();
    let mut index: std::collections::HashMap<(usize, &str, Option<usize>), usize> = Default::default();
    for r in records {
        let slot = *index.entry(r.group_key()).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[slot].push(r);
    }
    groups
        .into_iter()
        .map(|g| {
            let first = g[0];
            let fitted: Vec<&FitRecord> = g.iter().copied().filter(|r| r.fitted).collect();
            let col = |f: fn(&FitRecord) -> f64| fitted.iter().map(|r| f(r)).collect::<Vec<f64>>();
            let test = col(|r| r.test_acc);
            let is_gnc = first.algorithm == "gnc";
            let est = first
                .cell_draws
                .filter(|_| is_gnc)
                .map(|draws| fit_estimate(fitted.len(), draws, first.censored));
            SummaryRow {
                schema: SCHEMA_VERSION,
                study: first.study.clone(),
                cell: first.cell,
                algorithm: first.algorithm.clone(),
                init: first.init.clone(),
                arch: first.arch.clone(),
                params: first.params,
                prior: first.prior.clone(),
                dataset: first.dataset.clone(),
                pair: first.pair.clone(),
                n_train: first.n_train,
                replicate: first.replicate,
                epochs: first.epochs,
                records: g.len(),
                fitted: fitted.len(),
                target: first.cell_target,
                mean_test_acc: mean(&test),
                std_test_acc: sample_std(&test),
                mean_train_acc: mean(&col(|r| r.train_acc)),
                mean_lip_loss: mean(&col(|r| r.lip_loss)),
                mean_wn_loss: mean(&col(|r| r.wn_loss)),
                mean_g_min: mean(&col(|r| r.g_min)),
                draws: est.map(|e| e.draws),
                rejected: est.map(|e| e.draws - e.accepted as u64),
                p_hat: est.map(|e| e.p_hat),
                neg_log2: est.map(|e| e.neg_log2),
                std_err: est.map(|e| e.std_err),
                upper_bound_only: est.map(|e| e.upper_bound_only),
                censored: g.iter().any(|r| r.censored),
            }
        })
        .collect()
}

pub fn write_csv<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("csv output", e))?;
    Ok(())
}

pub fn read_csv<T: for<'de> Deserialize<'de>, R: Read>(input: R) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub fn write_csv_file<T: Serialize>(rows: &[T], path: &Path) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(rows, std::io::BufWriter::new(f))
}

pub fn read_records(path: &Path) -> Result<Vec<FitRecord>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let records: Vec<FitRecord> = read_csv(std::io::BufReader::new(f))?;
    if let Some(r) = records.iter().find(|r| r.schema != SCHEMA_VERSION) {
        return Err(Error::Config(format!(
            "{} has schema version {}, expected {SCHEMA_VERSION}",
            path.display(),
            r.schema
        )));
    }
    Ok(records)
}
