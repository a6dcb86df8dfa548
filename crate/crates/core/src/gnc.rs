//! Guess-and-Check: rejection sampling of interpolating networks.
//!
//! Draws are evaluated in parallel in index-ordered chunks. Acceptance is a
//! pure function of the draw index, and the reducer walks each chunk in index
//! order, so the accepted list and the draw count `M` never depend on the
//! worker count. Draws speculatively evaluated past the N-th acceptance are
//! discarded.

use std::time::Instant;

use rayon::prelude::*;

use crate::data::{BinaryTask, Sample};
use crate::error::{Error, Result};
use crate::nn::{Evaluator, NetworkSpec, ParameterSet};
use crate::prior::{fill_weights, sample_weights, Prior, SeedPlan};

const CHUNK: u64 = 2048;

/// True iff `y * g(x) > 0` for every sample; stops at the first miss.
pub(crate) fn fits_all(eval: &mut Evaluator<'_>, params: &ParameterSet, samples: &[Sample]) -> Result<bool> {
    for s in samples {
        if s.y * eval.margin(params, s.x.data())? <= 0.0 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Strict zero-training-error predicate; a tie `g = 0` counts as an error.
pub fn zero_train_error(spec: &NetworkSpec, params: &ParameterSet, task: &BinaryTask) -> Result<bool> {
    params.check(spec)?;
    fits_all(&mut Evaluator::new(spec), params, &task.train)
}

#[derive(Debug, Clone)]
pub struct GncResult {
    /// `(draw_index, parameters)` in increasing draw order.
    pub accepted: Vec<(u64, ParameterSet)>,
    /// Draws examined: index of the N-th acceptance plus one, or the whole
    /// budget when fewer than N were found.
    pub guesses_used: u64,
    pub target: usize,
    pub budget: u64,
}

impl GncResult {
    /// Fewer than `target` networks were found within the budget.
    pub fn censored(&self) -> bool {
        self.accepted.len() < self.target
    }

    pub fn rejected(&self) -> u64 {
        self.guesses_used - self.accepted.len() as u64
    }
}

/// Default draw budget for a pool of networks on `n` training points.
pub fn default_budget(n: usize) -> u64 {
    1u64 << (n + 6).min(62)
}

#[derive(Debug, Clone, Copy)]
pub struct GncOptions {
    pub workers: usize,
}

impl Default for GncOptions {
    fn default() -> Self {
        GncOptions { workers: 1 }
    }
}

pub fn guess_and_check(
    spec: &NetworkSpec,
    prior: &Prior,
    task: &BinaryTask,
    target: usize,
    budget: u64,
    plan: &SeedPlan,
    options: GncOptions,
) -> Result<GncResult> {
    if target == 0 {
        return Err(Error::InvalidArgument("target count must be at least 1".into()));
    }
    if budget < target as u64 {
        return Err(Error::InvalidArgument(format!("budget {budget} is below the target {target}")));
    }
    if task.train.is_empty() {
        return Err(Error::InvalidArgument("task has no training points".into()));
    }
    if task.input_shape() != spec.input_shape() {
        return Err(Error::Shape {
            layer: 0,
            kind: "input".into(),
            expected: spec.input_shape().to_vec(),
            got: task.input_shape().to_vec(),
        });
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.workers.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;

    let started = Instant::now();
    let mut accepted_idx: Vec<u64> = Vec::with_capacity(target);
    let mut next = 0u64;
    let mut guesses_used = budget;
    let mut last_report = Instant::now();
    while next < budget {
        let end = (next + CHUNK * options.workers.max(1) as u64).min(budget);
        let mut hits: Vec<u64> = pool.install(|| {
            (next..end)
                .into_par_iter()
                .map_init(
                    || (Evaluator::new(spec), ParameterSet::zeros(spec)),
                    |(eval, params), k| {
                        fill_weights(spec, prior, plan, k, params);
                        fits_all(eval, params, &task.train).map(|ok| ok.then_some(k))
                    },
                )
                .filter_map(|r| r.transpose())
                .collect::<Result<Vec<u64>>>()
        })?;
        hits.sort_unstable();
        let need = target - accepted_idx.len();
        if hits.len() >= need {
            accepted_idx.extend_from_slice(&hits[..need]);
            guesses_used = accepted_idx[target - 1] + 1;
            break;
        }
        accepted_idx.extend(hits);
        next = end;
        if last_report.elapsed().as_secs() >= 10 {
            let secs = started.elapsed().as_secs_f64();
            log::info!(
                "gnc {}: {} draws, {} accepted, {:.0} guesses/s",
                spec.name(),
                next,
                accepted_idx.len(),
                next as f64 / secs
            );
            last_report = Instant::now();
        }
    }
    let accepted = accepted_idx
        .into_iter()
        .map(|k| (k, sample_weights(spec, prior, plan, k)))
        .collect();
    Ok(GncResult {
        accepted,
        guesses_used,
        target,
        budget,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitEstimate {
    pub accepted: usize,
    pub draws: u64,
    /// `N / M`; with zero acceptances, the one-sided 95% upper bound.
    pub p_hat: f64,
    /// `-log2(p_hat)`; a lower bound when `upper_bound_only`.
    pub neg_log2: f64,
    /// Standard error of `neg_log2` in bits from the negative-binomial
    /// variance of `M`; NaN when `upper_bound_only`.
    pub std_err: f64,
    pub censored: bool,
    pub upper_bound_only: bool,
}

pub fn estimate_fit_probability(result: &GncResult) -> FitEstimate {
    fit_estimate(result.accepted.len(), result.guesses_used, result.censored())
}

pub fn fit_estimate(accepted: usize, draws: u64, censored: bool) -> FitEstimate {
    if accepted == 0 || draws == 0 {
        let p_upper = if draws == 0 {
            1.0
        } else {
            1.0 - 0.05f64.powf(1.0 / draws as f64)
        };
        return FitEstimate {
            accepted,
            draws,
            p_hat: p_upper,
            neg_log2: -p_upper.log2(),
            std_err: f64::NAN,
            censored: true,
            upper_bound_only: true,
        };
    }
    let p = accepted as f64 / draws as f64;
    FitEstimate {
        accepted,
        draws,
        p_hat: p,
        neg_log2: -p.log2(),
        std_err: ((1.0 - p) / accepted as f64).sqrt() / std::f64::consts::LN_2,
        censored,
        upper_bound_only: false,
    }
}

/// Bits needed by a uniformly random labelling to fit `n` points.
pub fn random_function_bits(n: usize) -> f64 {
    n as f64
}
