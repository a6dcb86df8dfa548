//! Network topology, parameters, forward evaluation and gradients.

mod eval;
mod params;
mod spec;

pub use eval::{Evaluator, LossKind};
pub(crate) use eval::logit_difference;
pub use params::{LayerParams, ParameterSet};
pub use spec::{LayerKind, NetworkSpec, ParamShape, KERNEL, POOL};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

fn check_shape(spec: &NetworkSpec, input: &Tensor) -> Result<()> {
    if input.shape() != spec.input_shape() {
        return Err(Error::Shape {
            layer: 0,
            kind: "input".into(),
            expected: spec.input_shape().to_vec(),
            got: input.shape().to_vec(),
        });
    }
    Ok(())
}

/// Logits of the network at `input`.
pub fn forward(spec: &NetworkSpec, params: &ParameterSet, input: &Tensor) -> Result<Tensor> {
    check_shape(spec, input)?;
    params.check(spec)?;
    let mut eval = Evaluator::new(spec);
    let out = eval.forward(params, input.data())?.to_vec();
    let shape = spec
        .layers()
        .len()
        .checked_sub(1)
        .map(|l| spec.output_shape(l).to_vec())
        .unwrap_or_else(|| spec.input_shape().to_vec());
    Tensor::new(shape, out)
}

/// Mean gradient of the batch loss with respect to every weight and bias.
pub fn grad_params(
    spec: &NetworkSpec,
    params: &ParameterSet,
    batch: &[(Tensor, f64)],
    loss: LossKind,
) -> Result<ParameterSet> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    params.check(spec)?;
    let mut eval = Evaluator::new(spec);
    let mut grads = ParameterSet::zeros(spec);
    let weight = 1.0 / batch.len() as f64;
    for (x, y) in batch {
        check_shape(spec, x)?;
        eval.accumulate_gradient(params, x.data(), *y, loss, weight, &mut grads)?;
    }
    Ok(grads)
}

/// Gradient of the logit difference `g` with respect to the input.
pub fn grad_input(spec: &NetworkSpec, params: &ParameterSet, input: &Tensor) -> Result<Tensor> {
    check_shape(spec, input)?;
    params.check(spec)?;
    let mut eval = Evaluator::new(spec);
    let (_, grad) = eval.input_gradient(params, input.data())?;
    Tensor::new(input.shape().to_vec(), grad)
}
