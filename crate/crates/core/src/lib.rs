//! Populations of zero-training-error networks produced two ways, by SGD
//! training and by prior rejection sampling (guess-and-check), and the
//! scale-invariant metrics used to compare them.
//!
//! Module map:
//!
//! - [`tensor`], [`nn`]: dense `f64` tensors, LeNet-style layers, forward
//!   evaluation and reverse-mode gradients w.r.t. parameters and inputs.
//! - [`arch`]: LeNet and MLP builders at the published widths and depths.
//! - [`prior`]: weight priors and the counter-addressed seed contract.
//! - [`data`]: MNIST IDX / CIFAR-10 readers and balanced class-pair tasks.
//! - [`sgd`]: plain mini-batch SGD on the logistic loss.
//! - [`gnc`]: guess-and-check sampling and fit-probability estimates.
//! - [`metrics`]: margins, Lipschitz- and weight-normalized losses.
//! - [`experiments`]: sweep plans, CSV records, summaries and histograms.
//! - [`cli`]: the `gnclab` command.

pub mod arch;
pub mod cli;
pub mod data;
pub mod error;
pub mod experiments;
pub mod gnc;
pub mod metrics;
pub mod nn;
pub mod prior;
pub mod sgd;
pub mod tensor;

pub use error::{Error, ParseError, Result};
pub use tensor::Tensor;
