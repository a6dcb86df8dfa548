//! Scale-invariant comparison quantities for interpolating networks.
//!
//! The Lipschitz-normalized margin divides `g(W, x)` by the largest input
//! gradient norm observed over train and test points, a data-based lower
//! bound on the Lipschitz constant of `g`. The weight-normalized margin
//! divides by the product of the layers' weight Frobenius norms instead,
//! which upper-bounds that constant.

use crate::data::{BinaryTask, Sample};
use crate::error::{Error, Result};
use crate::nn::{logit_difference, Evaluator, NetworkSpec, ParameterSet};
use crate::sgd::logistic_loss;
use crate::tensor::Tensor;

/// Logit difference `f_+1(x) - f_-1(x)`.
pub fn margin(spec: &NetworkSpec, params: &ParameterSet, x: &Tensor) -> Result<f64> {
    let logits = crate::nn::forward(spec, params, x)?;
    logit_difference(logits.data())
}

/// `max_z ||grad_x g(W, z)||_2` over `points`. Errors on an empty set and
/// returns [`Error::Degenerate`] when every gradient vanishes.
pub fn lipschitz_estimate<'a, I>(spec: &NetworkSpec, params: &ParameterSet, points: I) -> Result<f64>
where
    I: IntoIterator<Item = &'a Tensor>,
{
    params.check(spec)?;
    let mut eval = Evaluator::new(spec);
    let mut best: Option<f64> = None;
    for x in points {
        let (_, grad) = eval.input_gradient(params, x.data())?;
        let norm = l2(&grad);
        best = Some(best.map_or(norm, |b| b.max(norm)));
    }
    match best {
        None => Err(Error::InvalidArgument("Lipschitz estimate needs at least one point".into())),
        Some(b) if b > 0.0 => Ok(b),
        Some(_) => Err(Error::Degenerate("all input gradients vanish".into())),
    }
}

/// Mean logistic loss of `g / L` over `samples`, for a fixed normalizer `L`.
pub fn normalized_loss(spec: &NetworkSpec, params: &ParameterSet, samples: &[Sample], normalizer: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no samples".into()));
    }
    let mut eval = Evaluator::new(spec);
    let mut total = 0.0;
    for s in samples {
        total += logistic_loss(eval.margin(params, s.x.data())? / normalizer, s.y);
    }
    Ok(total / samples.len() as f64)
}

/// Mean training logistic loss of the Lipschitz-normalized margin, with the
/// normalizer estimated once over train and test.
pub fn lipschitz_normalized_loss(spec: &NetworkSpec, params: &ParameterSet, task: &BinaryTask) -> Result<f64> {
    let lip = lipschitz_estimate(spec, params, task.union().map(|s| &s.x))?;
    normalized_loss(spec, params, &task.train, lip)
}

/// Mean training logistic loss of `g / prod_l ||W_l||_F` (biases excluded).
pub fn weight_normalized_loss(spec: &NetworkSpec, params: &ParameterSet, task: &BinaryTask) -> Result<f64> {
    params.check(spec)?;
    if let Some(k) = params.layers().iter().position(|l| l.weight.norm2() == 0.0) {
        return Err(Error::Degenerate(format!("layer {k} has zero weights")));
    }
    normalized_loss(spec, params, &task.train, params.frobenius_product())
}

/// Fraction of samples with `y g > 0`; ties count as errors.
pub fn accuracy(spec: &NetworkSpec, params: &ParameterSet, samples: &[Sample]) -> Result<f64> {
    if samples.is_empty() {
        return Ok(0.0);
    }
    params.check(spec)?;
    let mut eval = Evaluator::new(spec);
    let mut correct = 0usize;
    for s in samples {
        if s.y * eval.margin(params, s.x.data())? > 0.0 {
            correct += 1;
        }
    }
    Ok(correct as f64 / samples.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginReport {
    /// `g(W, x_i)` for every training point, in task order.
    pub train_margins: Vec<f64>,
    /// `min_i y_i g(W, x_i)`.
    pub g_min: f64,
    /// Largest input-gradient norm over train and test; 0 when degenerate.
    pub lipschitz_estimate: f64,
    pub frobenius_product: f64,
    /// NaN when degenerate.
    pub lipschitz_normalized_train_loss: f64,
    /// NaN when some layer has all-zero weights.
    pub weight_normalized_train_loss: f64,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    /// Constant network: normalized quantities are undefined.
    pub degenerate: bool,
}

/// All metrics for one network in a single pass over train and test.
pub fn margin_report(spec: &NetworkSpec, params: &ParameterSet, task: &BinaryTask) -> Result<MarginReport> {
    params.check(spec)?;
    let mut eval = Evaluator::new(spec);
    let mut lip = 0.0f64;
    let mut train_margins = Vec::with_capacity(task.train.len());
    let mut train_correct = 0usize;
    for s in &task.train {
        let (g, grad) = eval.input_gradient(params, s.x.data())?;
        lip = lip.max(l2(&grad));
        train_margins.push(g);
        if s.y * g > 0.0 {
            train_correct += 1;
        }
    }
    let mut test_correct = 0usize;
    for s in &task.test {
        let (g, grad) = eval.input_gradient(params, s.x.data())?;
        lip = lip.max(l2(&grad));
        if s.y * g > 0.0 {
            test_correct += 1;
        }
    }
    let frob = params.frobenius_product();
    let mean_loss = |norm: f64| {
        train_margins
            .iter()
            .zip(&task.train)
            .map(|(g, s)| logistic_loss(g / norm, s.y))
            .sum::<f64>()
            / task.train.len().max(1) as f64
    };
    let degenerate = !(lip > 0.0);
    let any_zero_layer = params.layers().iter().any(|l| l.weight.norm2() == 0.0);
    Ok(MarginReport {
        g_min: train_margins
            .iter()
            .zip(&task.train)
            .map(|(g, s)| s.y * g)
            .fold(f64::INFINITY, f64::min),
        lipschitz_estimate: lip,
        frobenius_product: frob,
        lipschitz_normalized_train_loss: if degenerate { f64::NAN } else { mean_loss(lip) },
        weight_normalized_train_loss: if any_zero_layer { f64::NAN } else { mean_loss(frob) },
        train_accuracy: ratio(train_correct, task.train.len()),
        test_accuracy: ratio(test_correct, task.test.len()),
        degenerate,
        train_margins,
    })
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synthetic_task;
    use crate::nn::LayerKind;

    fn linear(w: [f64; 2], b: f64) -> (NetworkSpec, ParameterSet) {
        let spec = NetworkSpec::new("lin", vec![2], vec![LayerKind::Dense { out_features: 2 }]).unwrap();
        // g = (w0 - 0) x0 + (w1 - 0) x1 + b
        let params = ParameterSet::from_flat(&spec, &[w[0], w[1], 0.0, 0.0, b, 0.0]).unwrap();
        (spec, params)
    }

    #[test]
    fn margin_is_logit_difference() {
        let spec = NetworkSpec::new("id", vec![2], vec![]).unwrap();
        let p = ParameterSet::zeros(&spec);
        assert_eq!(margin(&spec, &p, &Tensor::from_vec(vec![2.0, 0.5])).unwrap(), 1.5);
        assert_eq!(margin(&spec, &p, &Tensor::from_vec(vec![0.5, 0.5])).unwrap(), 0.0);
    }

    #[test]
    fn linear_lipschitz_is_weight_norm() {
        let (spec, p) = linear([3.0, 4.0], 1.0);
        let pts = [Tensor::from_vec(vec![1.0, 2.0]), Tensor::from_vec(vec![-7.0, 0.1])];
        assert_eq!(lipschitz_estimate(&spec, &p, &pts).unwrap(), 5.0);
        assert!(lipschitz_estimate(&spec, &p, &[]).is_err());
    }

    #[test]
    fn linear_normalized_margin_is_signed_distance() {
        let (spec, p) = linear([3.0, 4.0], -5.0);
        let task = synthetic_task(2, 2, 1.0, 0).unwrap();
        let lip = lipschitz_estimate(&spec, &p, task.union().map(|s| &s.x)).unwrap();
        for s in &task.train {
            let x = s.x.data();
            let dist = (3.0 * x[0] + 4.0 * x[1] - 5.0) / 5.0;
            assert!((margin(&spec, &p, &s.x).unwrap() / lip - dist).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_network_is_degenerate() {
        let (spec, p) = linear([0.0, 0.0], 1.0);
        let task = synthetic_task(2, 2, 1.0, 0).unwrap();
        assert!(matches!(lipschitz_normalized_loss(&spec, &p, &task), Err(Error::Degenerate(_))));
        assert!(weight_normalized_loss(&spec, &p, &task).is_err());
        let r = margin_report(&spec, &p, &task).unwrap();
        assert!(r.degenerate && r.lipschitz_normalized_train_loss.is_nan());
    }

    #[test]
    fn accuracy_conventions() {
        let task = synthetic_task(6, 2, 8.0, 2).unwrap();
        let (spec, p) = linear([1.0, 0.0], 0.0);
        let fits = task.train.iter().all(|s| s.y * s.x.data()[0] > 0.0);
        if fits {
            assert_eq!(accuracy(&spec, &p, &task.train).unwrap(), 1.0);
            let (_, flipped) = linear([-1.0, 0.0], 0.0);
            assert_eq!(accuracy(&spec, &flipped, &task.train).unwrap(), 0.0);
        }
        let (_, zero) = linear([0.0, 0.0], 0.0);
        assert_eq!(accuracy(&spec, &zero, &task.train).unwrap(), 0.0);
    }

    #[test]
    fn single_output_direction_matches_weight_normalization() {
        // One-layer net with a single nonzero logit row: ||W||_F equals the
        // input-gradient norm, so both normalizations coincide.
        let (spec, p) = linear([0.6, -0.8], 0.3);
        let task = synthetic_task(4, 4, 2.0, 5).unwrap();
        let a = lipschitz_normalized_loss(&spec, &p, &task).unwrap();
        let b = weight_normalized_loss(&spec, &p, &task).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn two_point_analytic_loss() {
        // rho = (+1, +1) for both points gives ln(1 + e^-1).
        let (spec, p) = linear([1.0, 0.0], 0.0);
        let task = BinaryTask {
            class_pair: (0, 1),
            train: vec![
                Sample { x: Tensor::from_vec(vec![1.0, 0.0]), y: 1.0 },
                Sample { x: Tensor::from_vec(vec![-1.0, 3.0]), y: -1.0 },
            ],
            test: vec![],
            subset_seed: 0,
        };
        let l = lipschitz_normalized_loss(&spec, &p, &task).unwrap();
        assert!((l - (1.0 + (-1f64).exp()).ln()).abs() < 1e-15);
        assert!((l - 0.3133).abs() < 1e-4);
    }
}
