//! Finite-difference verification of backward rules.

use super::graph::{Graph, NodeId};
use super::tensor::Tensor;
use crate::error::Result;

/// Relative errors are taken against `max(|autodiff|, |numeric|, ERROR_FLOOR)`
/// so that near-zero gradients are compared absolutely.
pub const ERROR_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// Largest relative error seen in each parameter tensor.
    pub per_param: Vec<f64>,
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Compares autodiff gradients of a scalar-valued graph against central
/// differences with the given `step`.
///
/// `build` receives fresh leaf nodes holding `params` (in order) and must
/// return a 1x1 node.
pub fn gradient_check<F>(build: F, params: &[Tensor], step: f64, tol: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph, &[NodeId]) -> Result<NodeId>,
{
    let mut graph = Graph::new();
    let ids: Vec<NodeId> = params.iter().map(|p| graph.variable(p.clone())).collect();
    let root = build(&mut graph, &ids)?;
    graph.backward(root)?;
    let analytic: Vec<Tensor> = ids.iter().map(|&id| graph.grad_or_zeros(id)).collect();

    let eval = |values: &[Tensor]| -> Result<f64> {
        let mut g = Graph::new();
        let ids: Vec<NodeId> = values.iter().map(|p| g.variable(p.clone())).collect();
        let root = build(&mut g, &ids)?;
        Ok(g.value(root).item())
    };

    let mut work: Vec<Tensor> = params.to_vec();
    let mut per_param = Vec::with_capacity(params.len());
    for (p, grad) in analytic.iter().enumerate() {
        let mut worst: f64 = 0.0;
        for i in 0..params[p].numel() {
            let original = params[p].data()[i];
            work[p].data_mut()[i] = original + step;
            let plus = eval(&work)?;
            work[p].data_mut()[i] = original - step;
            let minus = eval(&work)?;
            work[p].data_mut()[i] = original;
            let numeric = (plus - minus) / (2.0 * step);
            let a = grad.data()[i];
            let denom = a.abs().max(numeric.abs()).max(ERROR_FLOOR);
            worst = worst.max((a - numeric).abs() / denom);
        }
        per_param.push(worst);
    }
    let max_rel_error = per_param.iter().copied().fold(0.0, f64::max);
    Ok(GradCheckReport {
        passed: max_rel_error <= tol,
        per_param,
        max_rel_error,
        tolerance: tol,
    })
}
