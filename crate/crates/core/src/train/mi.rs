use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{propagate, DropoutKey};
use crate::autodiff::{glorot_uniform, ParamGroup, Tape, Var};

/// Norm floor of the cosine similarity.
pub const COSINE_EPS: f64 = 1e-12;

/// MI calculator (Φ): one GCN weight per structure and a projection MLP
/// `H -> H -> P` shared by all three.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiParams {
    pub gcn_star: Array2<f64>,
    pub gcn_r1: Array2<f64>,
    pub gcn_r2: Array2<f64>,
    pub proj_w1: Array2<f64>,
    pub proj_b1: Array2<f64>,
    pub proj_w2: Array2<f64>,
    pub proj_b2: Array2<f64>,
}

impl PhiParams {
    pub fn init<R: Rng + ?Sized>(
        in_dim: usize,
        hidden: usize,
        projection: usize,
        rng: &mut R,
    ) -> Self {
        PhiParams {
            gcn_star: glorot_uniform(in_dim, hidden, rng),
            gcn_r1: glorot_uniform(in_dim, hidden, rng),
            gcn_r2: glorot_uniform(in_dim, hidden, rng),
            proj_w1: glorot_uniform(hidden, hidden, rng),
            proj_b1: Array2::zeros((1, hidden)),
            proj_w2: glorot_uniform(hidden, projection, rng),
            proj_b2: Array2::zeros((1, projection)),
        }
    }

    pub fn bind(&self, tape: &mut Tape, requires_grad: bool) -> PhiVars {
        let v = self.bind_all(tape, requires_grad);
        PhiVars::from_slice(&v)
    }
}

impl ParamGroup for PhiParams {
    fn tensors(&self) -> Vec<&Array2<f64>> {
        vec![
            &self.gcn_star,
            &self.gcn_r1,
            &self.gcn_r2,
            &self.proj_w1,
            &self.proj_b1,
            &self.proj_w2,
            &self.proj_b2,
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Array2<f64>> {
        vec![
            &mut self.gcn_star,
            &mut self.gcn_r1,
            &mut self.gcn_r2,
            &mut self.proj_w1,
            &mut self.proj_b1,
            &mut self.proj_w2,
            &mut self.proj_b2,
        ]
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PhiVars {
    pub gcn_star: Var,
    pub gcn_r1: Var,
    pub gcn_r2: Var,
    pub proj_w1: Var,
    pub proj_b1: Var,
    pub proj_w2: Var,
    pub proj_b2: Var,
}

impl PhiVars {
    pub fn from_slice(v: &[Var]) -> Self {
        assert_eq!(v.len(), 7, "phi has 7 tensors");
        PhiVars {
            gcn_star: v[0],
            gcn_r1: v[1],
            gcn_r2: v[2],
            proj_w1: v[3],
            proj_b1: v[4],
            proj_w2: v[5],
            proj_b2: v[6],
        }
    }

    pub fn all(&self) -> Vec<Var> {
        vec![
            self.gcn_star,
            self.gcn_r1,
            self.gcn_r2,
            self.proj_w1,
            self.proj_b1,
            self.proj_w2,
            self.proj_b2,
        ]
    }
}

/// Projected embeddings `MLP(dropout(relu(Â X W)))` for one structure.
/// `propagation` is the normalized structure `Â`.
pub fn mi_embed(
    tape: &mut Tape,
    propagation: Var,
    features: Var,
    gcn_weight: Var,
    phi: &PhiVars,
    dropout: f64,
    rng_layer: Option<(DropoutKey, u64)>,
) -> Var {
    let h = propagate(tape, propagation, features, gcn_weight);
    let mut h = tape.relu(h);
    if let (true, Some((key, layer))) = (tape.is_train() && dropout > 0.0, rng_layer) {
        h = tape.dropout(h, dropout, &mut key.rng(layer));
    }
    let z = tape.matmul(h, phi.proj_w1);
    let z = tape.add_row(z, phi.proj_b1);
    let z = tape.relu(z);
    let z = tape.matmul(z, phi.proj_w2);
    tape.add_row(z, phi.proj_b2)
}

/// Symmetric InfoNCE loss between row-aligned projections restricted to the
/// sampled rows. Negatives are the other sampled rows of the opposite view.
pub fn infonce(tape: &mut Tape, u: Var, v: Var, tau: f64, sample: &[usize]) -> Var {
    let b = sample.len();
    assert!(b >= 2, "infonce: need at least 2 samples, got {b}");
    assert!(tau > 0.0, "infonce: tau must be positive");
    let idx: std::rc::Rc<[usize]> = sample.into();
    let us = tape.gather_rows(u, idx.clone());
    let vs = tape.gather_rows(v, idx);
    let us = tape.l2_normalize_rows(us, COSINE_EPS);
    let vs = tape.l2_normalize_rows(vs, COSINE_EPS);
    let vt = tape.transpose(vs);
    let sim = tape.matmul(us, vt);
    let sim = tape.scale(sim, 1.0 / tau);
    let simt = tape.transpose(sim);
    let l_uv = tape.log_softmax(sim);
    let l_vu = tape.log_softmax(simt);
    let eye = tape.constant(Array2::eye(b));
    let d_uv = tape.elementwise_mul(l_uv, eye);
    let d_vu = tape.elementwise_mul(l_vu, eye);
    let both = tape.add(d_uv, d_vu);
    let total = tape.reduce_sum(both);
    tape.scale(total, -1.0 / (2 * b) as f64)
}

/// `infonce(G*, G_r1) + infonce(G*, G_r2)` over one shared sample. The
/// structures are raw (unnormalized) adjacency matrices.
#[allow(clippy::too_many_arguments)]
pub fn mi_loss(
    tape: &mut Tape,
    a_star: Var,
    a_r1: Var,
    a_r2: Var,
    features: Var,
    phi: &PhiVars,
    tau: f64,
    sample: &[usize],
    dropout: f64,
    key: Option<DropoutKey>,
) -> Var {
    let layer = |l: u64| key.map(|k| (k, l));
    let p_star = tape.gcn_normalize(a_star);
    let p1 = tape.gcn_normalize(a_r1);
    let p2 = tape.gcn_normalize(a_r2);
    let z_star = mi_embed(
        tape,
        p_star,
        features,
        phi.gcn_star,
        phi,
        dropout,
        layer(10),
    );
    let z1 = mi_embed(tape, p1, features, phi.gcn_r1, phi, dropout, layer(11));
    let z2 = mi_embed(tape, p2, features, phi.gcn_r2, phi, dropout, layer(12));
    let l1 = infonce(tape, z_star, z1, tau, sample);
    let l2 = infonce(tape, z_star, z2, tau, sample);
    tape.add(l1, l2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;

    #[test]
    fn identical_embeddings_give_log_two() {
        let mut tape = Tape::eval();
        let u = tape.constant(Array2::ones((2, 3)));
        let l = infonce(&mut tape, u, u, 0.5, &[0, 1]);
        assert!((tape.scalar(l) - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn three_samples_match_exponential_sums() {
        let u = array![
            [0.3, -1.0, 0.5],
            [1.2, 0.1, -0.4],
            [-0.7, 0.8, 0.2],
            [9.0, 9.0, 9.0]
        ];
        let v = array![
            [0.9, 0.4, -0.1],
            [-0.3, 1.1, 0.6],
            [0.2, -0.5, 1.3],
            [1.0, 0.0, 0.0]
        ];
        let sample = [2, 0, 1];
        let tau = 0.5;
        let cos = |a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>| {
            a.dot(&b) / (a.dot(&a).sqrt() * b.dot(&b).sqrt())
        };
        let mut expected = 0.0;
        for &i in &sample {
            let den_u: f64 = sample
                .iter()
                .map(|&k| (cos(u.row(i), v.row(k)) / tau).exp())
                .sum();
            let den_v: f64 = sample
                .iter()
                .map(|&k| (cos(v.row(i), u.row(k)) / tau).exp())
                .sum();
            let pos = (cos(u.row(i), v.row(i)) / tau).exp();
            expected += -(pos / den_u).ln() - (pos / den_v).ln();
        }
        expected /= 6.0;
        let mut tape = Tape::eval();
        let (uv, vv) = (tape.constant(u), tape.constant(v));
        let l = infonce(&mut tape, uv, vv, tau, &sample);
        assert!((tape.scalar(l) - expected).abs() < 1e-10);
    }

    #[test]
    #[should_panic(expected = "at least 2")]
    fn single_sample_panics() {
        let mut tape = Tape::eval();
        let u = tape.constant(Array2::ones((2, 3)));
        infonce(&mut tape, u, u, 0.5, &[0]);
    }

    #[test]
    fn collapsed_projections_give_two_log_b() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let mut phi = PhiParams::init(2, 4, 3, &mut rng);
        phi.proj_w2.fill(0.0);
        phi.proj_b2.fill(0.7);
        let a = array![[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]];
        let x = array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        let mut tape = Tape::eval();
        let vars = phi.bind(&mut tape, false);
        let (av, xv) = (tape.constant(a), tape.constant(x));
        let l = mi_loss(&mut tape, av, av, av, xv, &vars, 0.5, &[0, 1, 2], 0.0, None);
        assert!((tape.scalar(l) - 2.0 * 3f64.ln()).abs() < 1e-12);
    }
}
