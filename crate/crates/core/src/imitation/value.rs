use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::neural::{Adam, Mlp};

use super::ImitationError;

/// `½ mean (V(x) − y)²` over the whole batch.
pub fn value_loss(net: &Mlp, inputs: &DMatrix<f64>, targets: &[f64]) -> Result<f64, ImitationError> {
    let out = net.forward(inputs)?;
    let n = targets.len() as f64;
    Ok(out.iter().zip(targets).map(|(v, y)| 0.5 * (v - y).powi(2)).sum::<f64>() / n)
}

/// `passes` shuffled sweeps of Adam steps on minibatches of `minibatch`
/// columns. Returns the full-batch loss before the first pass and after
/// each pass.
pub fn value_update<R: Rng + ?Sized>(
    net: &mut Mlp,
    opt: &mut Adam,
    inputs: &DMatrix<f64>,
    targets: &[f64],
    passes: usize,
    minibatch: usize,
    rng: &mut R,
) -> Result<Vec<f64>, ImitationError> {
    let n = inputs.ncols();
    let mut losses = vec![value_loss(net, inputs, targets)?];
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..passes {
        order.shuffle(rng);
        for chunk in order.chunks(minibatch.max(1)) {
            let x = inputs.select_columns(chunk.iter());
            let cache = net.forward_cached(&x)?;
            let m = chunk.len() as f64;
            let grad_out = DMatrix::from_fn(1, chunk.len(), |_, j| (cache.output()[(0, j)] - targets[chunk[j]]) / m);
            let (grads, _) = net.backward(&cache, &grad_out)?;
            opt.step(net.params_mut(), &grads);
        }
        losses.push(value_loss(net, inputs, targets)?);
    }
    Ok(losses)
}
