use ndarray::Array2;

use super::{AdamState, Tape, Var};

/// A named group of parameter matrices updated together by one optimizer.
///
/// `tensors` and `tensors_mut` must list the matrices in the same order.
pub trait ParamGroup {
    fn tensors(&self) -> Vec<&Array2<f64>>;
    fn tensors_mut(&mut self) -> Vec<&mut Array2<f64>>;

    /// Registers every matrix on the tape, in `tensors` order.
    fn bind_all(&self, tape: &mut Tape, requires_grad: bool) -> Vec<Var> {
        self.tensors()
            .into_iter()
            .map(|t| tape.leaf(t.clone(), requires_grad))
            .collect()
    }

    fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}

/// Applies one Adam step using the gradients accumulated on `tape` for
/// `vars`, which must come from [`ParamGroup::bind_all`] on `group`.
pub fn adam_step<G: ParamGroup + ?Sized>(
    adam: &mut AdamState,
    group: &mut G,
    tape: &Tape,
    vars: &[Var],
) {
    let zeros: Vec<Array2<f64>> = vars
        .iter()
        .filter(|&&v| tape.grad(v).is_none())
        .map(|&v| Array2::zeros(tape.shape(v)))
        .collect();
    let mut spare = zeros.iter();
    let grads: Vec<&Array2<f64>> = vars
        .iter()
        .map(|&v| {
            tape.grad(v)
                .unwrap_or_else(|| spare.next().expect("zero gradient"))
        })
        .collect();
    let mut params = group.tensors_mut();
    adam.step(&mut params, &grads);
}
