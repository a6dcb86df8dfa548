use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::records::{FitRecord, SCHEMA_VERSION};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossMetric {
    #[default]
    Lipschitz,
    Weight,
}

impl LossMetric {
    pub fn name(&self) -> &'static str {
        match self {
            LossMetric::Lipschitz => "lipschitz",
            LossMetric::Weight => "weight",
        }
    }

    pub fn value(&self, r: &FitRecord) -> f64 {
        match self {
            LossMetric::Lipschitz => r.lip_loss,
            LossMetric::Weight => r.wn_loss,
        }
    }
}

impl fmt::Display for LossMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lipschitz" | "lip" => Ok(LossMetric::Lipschitz),
            "weight" | "wn" => Ok(LossMetric::Weight),
            _ => Err(Error::InvalidArgument(format!("unknown loss metric '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinSpec {
    pub loss: LossMetric,
    pub loss_bins: usize,
    pub acc_bins: usize,
    /// Loss range; the observed range over the usable records when unset.
    pub range: Option<(f64, f64)>,
}

impl Default for BinSpec {
    fn default() -> Self {
        BinSpec {
            loss: LossMetric::Lipschitz,
            loss_bins: 30,
            acc_bins: 20,
            range: None,
        }
    }
}

/// One `(loss bin, accuracy bin)` cell of one population. `bin_count` and
/// `bin_mean_acc` describe the whole loss bin; an empty loss bin has an
/// empty `bin_mean_acc`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistRow {
    pub schema: u32,
    pub study: String,
    pub algorithm: String,
    pub init: String,
    pub arch: String,
    pub prior: String,
    pub pair: String,
    pub n_train: usize,
    pub epochs: Option<usize>,
    pub loss_metric: String,
    pub loss_bin: usize,
    pub loss_lo: f64,
    pub loss_hi: f64,
    pub acc_bin: usize,
    pub acc_lo: f64,
    pub acc_hi: f64,
    pub count: usize,
    pub bin_count: usize,
    pub bin_mean_acc: Option<f64>,
}

/// Edges `e_0 = lo < ... < e_k = hi`, evenly spaced in log10.
pub fn log_edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let (a, b) = (lo.log10(), hi.log10());
    let mut edges: Vec<f64> = (0..=bins)
        .map(|k| 10f64.powf(a + (b - a) * k as f64 / bins as f64))
        .collect();
    edges[0] = lo;
    edges[bins] = hi;
    edges
}

/// Bin `k` holds `[e_k, e_{k+1})`; the last bin also holds `hi`.
pub fn bin_index(edges: &[f64], v: f64) -> usize {
    let bins = edges.len() - 1;
    edges[1..bins].partition_point(|&e| e <= v)
}

fn usable(r: &FitRecord, metric: LossMetric) -> bool {
    let v = metric.value(r);
    r.fitted && !r.degenerate && v.is_finite() && v > 0.0 && r.test_acc.is_finite()
}

type PopKey = (String, String, String, String, String, String, usize, Option<usize>);

fn pop_key(r: &FitRecord) -> PopKey {
    (
        r.study.clone(),
        r.algorithm.clone(),
        r.init.clone(),
        r.arch.clone(),
        r.prior.clone(),
        r.pair.clone(),
        r.n_train,
        r.epochs,
    )
}

/// 2-D counts over (log-loss bin x test-accuracy bin) per population, with
/// the conditional mean test accuracy of each loss bin. All populations
/// share one set of loss edges. Records that are unfitted, degenerate or
/// have a non-positive loss are skipped.
pub fn bin_loss_accuracy(records: &[FitRecord], spec: &BinSpec) -> Result<Vec<HistRow>> {
    if spec.loss_bins == 0 || spec.acc_bins == 0 {
        return Err(Error::InvalidArgument("bin counts must be positive".into()));
    }
    let used: Vec<&FitRecord> = records.iter().filter(|r| usable(r, spec.loss)).collect();
    let (lo, hi) = match spec.range {
        Some((lo, hi)) if lo > 0.0 && hi >= lo => (lo, hi),
        Some((lo, hi)) => {
            return Err(Error::InvalidArgument(format!("bad loss range [{lo}, {hi}]")));
        }
        None if used.is_empty() => return Ok(Vec::new()),
        None => used.iter().map(|r| spec.loss.value(r)).fold((f64::INFINITY, 0.0f64), |(a, b), v| {
            (a.min(v), b.max(v))
        }),
    };
    let edges = log_edges(lo, hi, spec.loss_bins);

    let mut order: Vec<PopKey> = Vec::new();
    let mut pops: HashMap<PopKey, Vec<&FitRecord>> = HashMap::new();
    for r in &used {
        let v = spec.loss.value(r);
        if v < lo || v > hi {
            continue;
        }
        let k = pop_key(r);
        if !pops.contains_key(&k) {
            order.push(k.clone());
        }
        pops.entry(k).or_default().push(r);
    }

    let na = spec.acc_bins;
    let mut rows = Vec::new();
    for key in order {
        let members = &pops[&key];
        let mut counts = vec![vec![0usize; na]; spec.loss_bins];
        let mut accs: Vec<Vec<f64>> = vec![Vec::new(); spec.loss_bins];
        for r in members {
            let lb = bin_index(&edges, spec.loss.value(r));
            let ab = ((r.test_acc * na as f64) as usize).min(na - 1);
            counts[lb][ab] += 1;
            accs[lb].push(r.test_acc);
        }
        let (study, algorithm, init, arch, prior, pair, n_train, epochs) = key;
        for lb in 0..spec.loss_bins {
            let bin_count = accs[lb].len();
            let bin_mean_acc = (bin_count > 0).then(|| accs[lb].iter().sum::<f64>() / bin_count as f64);
            for ab in 0..na {
                rows.push(HistRow {
                    schema: SCHEMA_VERSION,
                    study: study.clone(),
                    algorithm: algorithm.clone(),
                    init: init.clone(),
                    arch: arch.clone(),
                    prior: prior.clone(),
                    pair: pair.clone(),
                    n_train,
                    epochs,
                    loss_metric: spec.loss.name().into(),
                    loss_bin: lb,
                    loss_lo: edges[lb],
                    loss_hi: edges[lb + 1],
                    acc_bin: ab,
                    acc_lo: ab as f64 / na as f64,
                    acc_hi: (ab + 1) as f64 / na as f64,
                    count: counts[lb][ab],
                    bin_count,
                    bin_mean_acc,
                });
            }
        }
    }
    Ok(rows)
}
