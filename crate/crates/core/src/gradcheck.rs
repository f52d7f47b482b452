//! Central finite-difference check of analytic gradients.

use alloc::vec::Vec;

use crate::autodiff::{Graph, NodeId};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Relative error used throughout: `|a - n| / max(1e-8, |a| + |n|)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

/// Compares the gradient from [`Graph::backward`] with central differences
/// `(f(x + eps) - f(x - eps)) / 2 eps` for every coordinate of every input,
/// returning the largest relative error.
///
/// `function` receives a fresh graph and the ids of `inputs` registered as
/// trainable leaves, and must return a scalar node.
pub fn finite_difference_check<F>(function: F, inputs: &[Tensor], epsilon: f64) -> Result<f64>
where
    F: Fn(&mut Graph, &[NodeId]) -> Result<NodeId>,
{
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::InvalidArgument(alloc::format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let evaluate = |values: &[Tensor]| -> Result<f64> {
        let mut graph = Graph::new();
        let ids: Vec<NodeId> = values.iter().map(|t| graph.constant(t.clone())).collect();
        let out = function(&mut graph, &ids)?;
        scalar_of(&graph, out)
    };

    let mut graph = Graph::new();
    let ids: Vec<NodeId> = inputs.iter().map(|t| graph.param(t.clone())).collect();
    let out = function(&mut graph, &ids)?;
    scalar_of(&graph, out)?;
    graph.backward(out)?;

    let mut worst = 0.0f64;
    let mut probe: Vec<Tensor> = inputs.to_vec();
    for (k, &id) in ids.iter().enumerate() {
        let analytic = graph.grad(id).expect("inputs are trainable").to_vec();
        for (coord, &a) in analytic.iter().enumerate() {
            let original = inputs[k].values()[coord];
            probe[k].values_mut()[coord] = original + epsilon;
            let plus = evaluate(&probe)?;
            probe[k].values_mut()[coord] = original - epsilon;
            let minus = evaluate(&probe)?;
            probe[k].values_mut()[coord] = original;
            let numeric = (plus - minus) / (2.0 * epsilon);
            worst = worst.max(relative_error(a, numeric));
        }
    }
    Ok(worst)
}

fn scalar_of(graph: &Graph, id: NodeId) -> Result<f64> {
    let value = graph.value(id);
    if value.numel() != 1 {
        return Err(Error::NonScalarLoss(value.shape().to_vec()));
    }
    Ok(value.values()[0])
}
