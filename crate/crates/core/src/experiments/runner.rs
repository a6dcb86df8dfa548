use std::collections::HashMap;
use std::path::PathBuf;

use rayon::prelude::*;

use super::plan::{Algorithm, Cell, Study, SweepPlan};
use super::records::{FitRecord, SCHEMA_VERSION};
use crate::data::{build_binary_task, load_cifar10, load_mnist, synthetic_pool, BinaryTask, DatasetKind, ImagePool};
use crate::error::{Error, Result};
use crate::gnc::{guess_and_check, GncOptions};
use crate::metrics::margin_report;
use crate::nn::NetworkSpec;
use crate::prior::{derive_seed, sample_weights, SeedPlan};
use crate::sgd::{train_with_checkpoints, SgdConfig};

const TAG_SHUFFLE: u64 = 0x53;
const TAG_FROM_GNC: u64 = 0x47;
const TAG_POOL: u64 = 0x50;

/// Directory the plan's dataset is read from.
pub fn data_dir(plan: &SweepPlan) -> PathBuf {
    let s = &plan.config.sweep;
    let specific = match plan.dataset {
        DatasetKind::Mnist => s.mnist_dir.clone(),
        DatasetKind::Cifar10 => s.cifar_dir.clone(),
        DatasetKind::Synthetic => None,
    };
    s.data_dir
        .clone()
        .or(specific)
        .unwrap_or_else(|| crate::data::default_data_dir(plan.dataset.name()))
}

pub fn load_pool(plan: &SweepPlan) -> Result<ImagePool> {
    match plan.dataset {
        DatasetKind::Mnist => load_mnist(&data_dir(plan)),
        DatasetKind::Cifar10 => load_cifar10(&data_dir(plan)),
        DatasetKind::Synthetic => {
            let s = &plan.config.synthetic;
            Ok(synthetic_pool(
                s.train_per_class,
                s.test_per_class,
                s.separation,
                derive_seed(plan.config.sweep.seed, &[TAG_POOL]),
            ))
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SweepOutput {
    pub records: Vec<FitRecord>,
    /// Indices of cells that stopped short of their target.
    pub censored_cells: Vec<usize>,
}

impl SweepOutput {
    pub fn any_censored(&self) -> bool {
        !self.censored_cells.is_empty()
    }
}

pub fn run_prior_sweep(plan: &SweepPlan, pool: &ImagePool) -> Result<SweepOutput> {
    expect_study(plan, Study::Prior)?;
    run_sweep(plan, pool)
}

pub fn run_width_sweep(plan: &SweepPlan, pool: &ImagePool) -> Result<SweepOutput> {
    expect_study(plan, Study::Width)?;
    run_sweep(plan, pool)
}

pub fn run_depth_sweep(plan: &SweepPlan, pool: &ImagePool) -> Result<SweepOutput> {
    expect_study(plan, Study::Depth)?;
    run_sweep(plan, pool)
}

/// G&C pools, each accepted network then used as an SGD initialization.
/// Emits the G&C record (before) and an `init = gnc` SGD record (after)
/// with the same `net` index.
pub fn run_sgd_from_gnc(plan: &SweepPlan, pool: &ImagePool) -> Result<SweepOutput> {
    expect_study(plan, Study::SgdFromGnc)?;
    run_sweep(plan, pool)
}

/// SGD runs with one record per checkpoint epoch for every run that ends
/// fitted.
pub fn run_epoch_trajectory(plan: &SweepPlan, pool: &ImagePool) -> Result<SweepOutput> {
    expect_study(plan, Study::Trajectory)?;
    run_sweep(plan, pool)
}

fn expect_study(plan: &SweepPlan, study: Study) -> Result<()> {
    if plan.study() != study {
        return Err(Error::Config(format!("plan is a {} study, not {study}", plan.study())));
    }
    Ok(())
}

/// Runs every cell in plan order. A cell that stops short of its target is
/// reported in `censored_cells` and the sweep continues.
pub fn run_sweep(plan: &SweepPlan, pool: &ImagePool) -> Result<SweepOutput> {
    let threads = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.config.gnc.workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let mut tasks: HashMap<((u8, u8), usize, u64), BinaryTask> = HashMap::new();
    let mut out = SweepOutput::default();
    for cell in &plan.cells {
        let k = &cell.key;
        let task_key = (k.pair, k.n, cell.subset_seed);
        if let std::collections::hash_map::Entry::Vacant(e) = tasks.entry(task_key) {
            e.insert(build_binary_task(pool, k.pair, k.n, cell.subset_seed)?);
        }
        let task = &tasks[&task_key];
        let spec = k.arch.build(task.input_shape())?;
        log::info!("cell {}/{}: {}", cell.index + 1, plan.cells.len(), k);
        let (records, censored) = threads.install(|| run_cell(plan, cell, &spec, task))?;
        if censored {
            log::warn!("cell {} ({}) is censored", cell.index, k);
            out.censored_cells.push(cell.index);
        }
        out.records.extend(records);
    }
    Ok(out)
}

fn base_record(plan: &SweepPlan, cell: &Cell, spec: &NetworkSpec, task: &BinaryTask) -> FitRecord {
    let k = &cell.key;
    FitRecord {
        schema: SCHEMA_VERSION,
        study: plan.study().name().into(),
        cell: cell.index,
        algorithm: k.algorithm.name().into(),
        init: "prior".into(),
        arch: k.arch.to_string(),
        params: spec.count_params(),
        prior: k.prior.to_string(),
        dataset: plan.dataset.name().into(),
        pair: format!("{}-{}", task.class_pair.0, task.class_pair.1),
        n_train: k.n,
        replicate: k.replicate,
        subset_seed: cell.subset_seed,
        seed: cell.seed,
        net: 0,
        draw: None,
        cell_draws: None,
        cell_target: plan.networks_per_cell(),
        censored: false,
        epochs: None,
        learning_rate: None,
        fitted: false,
        g_min: f64::NAN,
        lip_est: f64::NAN,
        frob_prod: f64::NAN,
        lip_loss: f64::NAN,
        wn_loss: f64::NAN,
        train_acc: f64::NAN,
        test_acc: f64::NAN,
        degenerate: false,
    }
}

fn sgd_config(plan: &SweepPlan, cell: &Cell, shuffle_seed: u64) -> SgdConfig {
    SgdConfig {
        learning_rate: plan.learning_rate(&cell.key.prior),
        epochs: plan.config.sgd.epochs,
        batch_size: plan.config.sgd.batch_size,
        shuffle_seed,
    }
}

fn run_cell(plan: &SweepPlan, cell: &Cell, spec: &NetworkSpec, task: &BinaryTask) -> Result<(Vec<FitRecord>, bool)> {
    let target = plan.networks_per_cell();
    if target == 0 {
        return Ok((Vec::new(), false));
    }
    match cell.key.algorithm {
        Algorithm::Gnc => gnc_cell(plan, cell, spec, task),
        Algorithm::Sgd => sgd_cell(plan, cell, spec, task),
    }
}

fn gnc_cell(plan: &SweepPlan, cell: &Cell, spec: &NetworkSpec, task: &BinaryTask) -> Result<(Vec<FitRecord>, bool)> {
    let target = plan.networks_per_cell();
    let result = guess_and_check(
        spec,
        &cell.key.prior,
        task,
        target,
        plan.budget(cell.key.n),
        &SeedPlan::new(cell.seed),
        GncOptions { workers: plan.config.gnc.workers },
    )?;
    let censored = result.censored();
    let mut base = base_record(plan, cell, spec, task);
    base.cell_draws = Some(result.guesses_used);
    base.censored = censored;
    if result.accepted.is_empty() {
        return Ok((vec![base], censored));
    }
    let from_gnc = plan.study() == Study::SgdFromGnc;
    let per_net: Vec<Vec<FitRecord>> = result
        .accepted
        .par_iter()
        .enumerate()
        .map(|(j, (draw, params))| {
            let mut r = base.clone();
            r.net = j;
            r.draw = Some(*draw);
            r.fitted = true;
            r.set_metrics(&margin_report(spec, params, task)?);
            let mut rows = vec![r];
            if from_gnc {
                let cfg = sgd_config(plan, cell, derive_seed(cell.seed, &[TAG_FROM_GNC, j as u64]));
                let out = train_with_checkpoints(spec, params, task, &cfg, &[])?;
                let mut after = base.clone();
                after.algorithm = Algorithm::Sgd.name().into();
                after.init = "gnc".into();
                after.net = j;
                after.draw = Some(*draw);
                after.cell_draws = None;
                after.epochs = Some(cfg.epochs);
                after.learning_rate = Some(cfg.learning_rate);
                after.fitted = out.fitted;
                if out.aborted.is_none() {
                    after.set_metrics(&margin_report(spec, &out.params, task)?);
                }
                rows.push(after);
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    let (mut gnc, mut sgd) = (Vec::new(), Vec::new());
    for mut rows in per_net {
        if rows.len() == 2 {
            sgd.push(rows.pop().expect("two rows"));
        }
        gnc.extend(rows);
    }
    gnc.extend(sgd);
    Ok((gnc, censored))
}

struct Attempt {
    rows: Vec<FitRecord>,
    fitted: bool,
}

fn sgd_cell(plan: &SweepPlan, cell: &Cell, spec: &NetworkSpec, task: &BinaryTask) -> Result<(Vec<FitRecord>, bool)> {
    let target = plan.networks_per_cell();
    let max_attempts = plan.max_attempts().max(target);
    let trajectory = plan.study() == Study::Trajectory;
    let checkpoints = if trajectory { plan.config.sgd.checkpoints.clone() } else { Vec::new() };
    let seeds = SeedPlan::new(cell.seed);
    let base = base_record(plan, cell, spec, task);

    let attempt = |j: usize| -> Result<Attempt> {
        let init = sample_weights(spec, &cell.key.prior, &seeds, j as u64);
        let cfg = sgd_config(plan, cell, derive_seed(cell.seed, &[TAG_SHUFFLE, j as u64]));
        let out = train_with_checkpoints(spec, &init, task, &cfg, &checkpoints)?;
        let mut r = base.clone();
        r.net = j;
        r.learning_rate = Some(cfg.learning_rate);
        if trajectory {
            let mut rows = Vec::new();
            if out.fitted {
                for (epoch, params) in &out.snapshots {
                    let mut s = r.clone();
                    let m = margin_report(spec, params, task)?;
                    s.epochs = Some(*epoch);
                    s.fitted = m.train_accuracy == 1.0;
                    s.set_metrics(&m);
                    rows.push(s);
                }
            }
            return Ok(Attempt { rows, fitted: out.fitted });
        }
        r.epochs = Some(cfg.epochs);
        r.fitted = out.fitted;
        if out.aborted.is_none() {
            r.set_metrics(&margin_report(spec, &out.params, task)?);
        }
        Ok(Attempt { rows: vec![r], fitted: out.fitted })
    };

    // Attempts run in parallel batches but are consumed in index order, so
    // the kept set does not depend on the worker count.
    let mut rows = Vec::new();
    let mut fitted = 0;
    let mut next = 0;
    'outer: while fitted < target && next < max_attempts {
        let end = (next + (target - fitted)).min(max_attempts);
        let batch: Vec<Attempt> = (next..end).into_par_iter().map(attempt).collect::<Result<_>>()?;
        for a in batch {
            rows.extend(a.rows);
            fitted += a.fitted as usize;
            if fitted == target {
                break 'outer;
            }
        }
        next = end;
    }
    let censored = fitted < target;
    for r in &mut rows {
        r.censored = censored;
    }
    Ok((rows, censored))
}

/// Mean test accuracy over fitted records matching `filter`; NaN if none.
pub fn mean_test_accuracy<F: Fn(&FitRecord) -> bool>(records: &[FitRecord], filter: F) -> f64 {
    let v: Vec<f64> = records.iter().filter(|r| r.fitted && filter(r)).map(|r| r.test_acc).collect();
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}
