use ndarray::Array2;

use super::{Tape, Var};

const DEFAULT_MAX_COORDS: usize = 64;

/// Compares reverse-mode gradients against central finite differences.
///
/// `build` maps parameter leaves to a scalar loss on an evaluation-mode tape,
/// so dropout is disabled. Up to 64 coordinates per parameter are checked,
/// evenly strided when the parameter is larger. Returns the maximum of
/// `|analytic - fd| / max(1, |fd|)`.
pub fn gradient_check<F>(build: F, params: &[Array2<f64>], h: f64) -> f64
where
    F: Fn(&mut Tape, &[Var]) -> Var,
{
    gradient_check_with(build, params, h, DEFAULT_MAX_COORDS)
}

pub fn gradient_check_with<F>(build: F, params: &[Array2<f64>], h: f64, max_coords: usize) -> f64
where
    F: Fn(&mut Tape, &[Var]) -> Var,
{
    let eval = |values: &[Array2<f64>]| -> f64 {
        let mut tape = Tape::eval();
        let vars: Vec<Var> = values.iter().map(|p| tape.constant(p.clone())).collect();
        let loss = build(&mut tape, &vars);
        tape.scalar(loss)
    };

    let mut tape = Tape::eval();
    let vars: Vec<Var> = params.iter().map(|p| tape.param(p.clone())).collect();
    let loss = build(&mut tape, &vars);
    tape.backward(loss);
    let analytic: Vec<Array2<f64>> = vars
        .iter()
        .map(|&v| tape.grad(v).expect("parameter leaf").clone())
        .collect();

    let mut worst = 0.0_f64;
    let mut probe = params.to_vec();
    for (k, param) in params.iter().enumerate() {
        let len = param.len();
        let count = len.min(max_coords.max(1));
        let cols = param.ncols();
        for c in 0..count {
            let flat = if count == len { c } else { c * len / count };
            let idx = (flat / cols, flat % cols);
            let orig = param[idx];
            probe[k][idx] = orig + h;
            let up = eval(&probe);
            probe[k][idx] = orig - h;
            let down = eval(&probe);
            probe[k][idx] = orig;
            let fd = (up - down) / (2.0 * h);
            let err = (analytic[k][idx] - fd).abs() / fd.abs().max(1.0);
            worst = worst.max(err);
        }
    }
    worst
}
