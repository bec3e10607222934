use std::rc::Rc;

use ndarray::{s, Array2, Axis, Zip};
use rand::Rng;

use crate::graph::{gcn_normalize, DEGREE_FLOOR};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    RowSoftmax(Var),
    LogSoftmax(Var),
    Log(Var),
    Dropout(Var, Array2<f64>),
    ConcatCols(Var, Var),
    GatherRows(Var, Rc<[usize]>),
    L2NormalizeRows(Var, f64),
    Transpose(Var),
    ElemMul(Var, Var),
    ReduceMean(Var),
    ReduceSum(Var),
    GcnNormalize(Var),
    SegmentSoftmax(Var, Rc<[usize]>),
    ScatterPairs(Var, Rc<[(usize, usize)]>),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::MatMul(..) => "matmul",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::AddRow(..) => "add_row",
            Op::Scale(..) => "scale",
            Op::Relu(..) => "relu",
            Op::RowSoftmax(..) => "row_softmax",
            Op::LogSoftmax(..) => "log_softmax",
            Op::Log(..) => "log",
            Op::Dropout(..) => "dropout",
            Op::ConcatCols(..) => "concat_cols",
            Op::GatherRows(..) => "gather_rows",
            Op::L2NormalizeRows(..) => "l2_normalize_rows",
            Op::Transpose(..) => "transpose",
            Op::ElemMul(..) => "elementwise_mul",
            Op::ReduceMean(..) => "reduce_mean",
            Op::ReduceSum(..) => "reduce_sum",
            Op::GcnNormalize(..) => "gcn_normalize",
            Op::SegmentSoftmax(..) => "segment_softmax",
            Op::ScatterPairs(..) => "scatter_pairs",
        }
    }
}

/// One recorded value.
#[derive(Debug)]
pub struct Tensor {
    value: Array2<f64>,
    grad: Option<Array2<f64>>,
    requires_grad: bool,
    /// True when some gradient-carrying leaf feeds this value.
    needs_grad: bool,
    op: Op,
}

/// First primitive whose output contained NaN or Inf.
#[derive(Debug, Clone, PartialEq)]
pub struct NonFinite {
    pub index: usize,
    pub primitive: &'static str,
}

#[derive(Debug)]
pub struct Tape {
    tensors: Vec<Tensor>,
    train: bool,
    non_finite: Option<NonFinite>,
}

impl Default for Tape {
    fn default() -> Self {
        Tape::new()
    }
}

fn shape(m: &Array2<f64>) -> (usize, usize) {
    m.dim()
}

impl Tape {
    /// A tape in training mode (dropout active).
    pub fn new() -> Self {
        Tape {
            tensors: Vec::new(),
            train: true,
            non_finite: None,
        }
    }

    /// A tape in evaluation mode (dropout is the identity).
    pub fn eval() -> Self {
        Tape {
            train: false,
            ..Tape::new()
        }
    }

    pub fn is_train(&self) -> bool {
        self.train
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn non_finite(&self) -> Option<&NonFinite> {
        self.non_finite.as_ref()
    }

    fn push(&mut self, value: Array2<f64>, op: Op, inputs: &[Var]) -> Var {
        let idx = self.tensors.len();
        if self.non_finite.is_none() && value.iter().any(|x| !x.is_finite()) {
            log::debug!("non-finite output from {} at tape index {idx}", op.name());
            self.non_finite = Some(NonFinite {
                index: idx,
                primitive: op.name(),
            });
        }
        let needs_grad = inputs.iter().any(|v| self.tensors[v.0].needs_grad);
        self.tensors.push(Tensor {
            value,
            grad: None,
            requires_grad: false,
            needs_grad,
            op,
        });
        Var(idx)
    }

    pub fn leaf(&mut self, value: Array2<f64>, requires_grad: bool) -> Var {
        let v = self.push(value, Op::Leaf, &[]);
        let t = &mut self.tensors[v.0];
        t.requires_grad = requires_grad;
        t.needs_grad = requires_grad;
        if requires_grad {
            t.grad = Some(Array2::zeros(t.value.dim()));
        }
        v
    }

    pub fn param(&mut self, value: Array2<f64>) -> Var {
        self.leaf(value, true)
    }

    pub fn constant(&mut self, value: Array2<f64>) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.tensors[v.0].value
    }

    /// Scalar value of a 1x1 tensor.
    pub fn scalar(&self, v: Var) -> f64 {
        let m = self.value(v);
        assert_eq!(m.dim(), (1, 1), "scalar() on a {:?} tensor", m.dim());
        m[[0, 0]]
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.value(v).dim()
    }

    /// Accumulated gradient of a leaf created with `requires_grad`.
    pub fn grad(&self, v: Var) -> Option<&Array2<f64>> {
        self.tensors[v.0].grad.as_ref()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.tensors[v.0].requires_grad
    }

    pub fn zero_grad(&mut self) {
        for t in &mut self.tensors {
            if let Some(g) = t.grad.as_mut() {
                g.fill(0.0);
            }
        }
    }

    // ---- primitives -------------------------------------------------------

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(
            va.ncols(),
            vb.nrows(),
            "matmul: {:?} x {:?}",
            shape(va),
            shape(vb)
        );
        let out = va.dot(vb);
        self.push(out, Op::MatMul(a, b), &[a, b])
    }

    fn assert_same_shape(&self, op: &str, a: Var, b: Var) {
        assert_eq!(
            self.shape(a),
            self.shape(b),
            "{op}: shape mismatch {:?} vs {:?}",
            self.shape(a),
            self.shape(b)
        );
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.assert_same_shape("add", a, b);
        let out = self.value(a) + self.value(b);
        self.push(out, Op::Add(a, b), &[a, b])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.assert_same_shape("sub", a, b);
        let out = self.value(a) - self.value(b);
        self.push(out, Op::Sub(a, b), &[a, b])
    }

    /// Adds a `1 x C` row vector to every row of an `R x C` matrix.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let (va, vr) = (self.value(a), self.value(row));
        assert!(
            vr.nrows() == 1 && vr.ncols() == va.ncols(),
            "add_row: {:?} + {:?}",
            shape(va),
            shape(vr)
        );
        let out = va + &vr.row(0);
        self.push(out, Op::AddRow(a, row), &[a, row])
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let out = self.value(a) * c;
        self.push(out, Op::Scale(a, c), &[a])
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).mapv(|x| x.max(0.0));
        self.push(out, Op::Relu(a), &[a])
    }

    /// Row-wise softmax, stabilized by subtracting the row max.
    pub fn row_softmax(&mut self, a: Var) -> Var {
        let out = row_softmax(self.value(a));
        self.push(out, Op::RowSoftmax(a), &[a])
    }

    /// Row-wise log-softmax via log-sum-exp.
    pub fn log_softmax(&mut self, a: Var) -> Var {
        let mut out = self.value(a).clone();
        for mut row in out.rows_mut() {
            let m = row.fold(f64::NEG_INFINITY, |acc, &x| acc.max(x));
            let lse = m + row.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
            row.mapv_inplace(|x| x - lse);
        }
        self.push(out, Op::LogSoftmax(a), &[a])
    }

    pub fn log(&mut self, a: Var) -> Var {
        let out = self.value(a).mapv(f64::ln);
        self.push(out, Op::Log(a), &[a])
    }

    /// Inverted dropout: kept entries are scaled by `1 / (1 - p)`. Identity
    /// on an evaluation tape or when `p == 0`.
    pub fn dropout<R: Rng + ?Sized>(&mut self, a: Var, p: f64, rng: &mut R) -> Var {
        assert!((0.0..1.0).contains(&p), "dropout: p = {p} outside [0, 1)");
        if !self.train || p == 0.0 {
            return a;
        }
        let keep = 1.0 - p;
        let mask = self.value(a).map(|_| {
            if rng.random::<f64>() < keep {
                1.0 / keep
            } else {
                0.0
            }
        });
        let out = self.value(a) * &mask;
        self.push(out, Op::Dropout(a, mask), &[a])
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.nrows(), vb.nrows(), "concat_cols: row counts differ");
        let out = ndarray::concatenate(Axis(1), &[va.view(), vb.view()]).expect("concat");
        self.push(out, Op::ConcatCols(a, b), &[a, b])
    }

    pub fn gather_rows(&mut self, a: Var, index: impl Into<Rc<[usize]>>) -> Var {
        let index: Rc<[usize]> = index.into();
        let va = self.value(a);
        assert!(
            index.iter().all(|&i| i < va.nrows()),
            "gather_rows: index out of range for {} rows",
            va.nrows()
        );
        let out = va.select(Axis(0), &index);
        self.push(out, Op::GatherRows(a, index), &[a])
    }

    /// Divides each row by `max(||row||, eps)`.
    pub fn l2_normalize_rows(&mut self, a: Var, eps: f64) -> Var {
        let mut out = self.value(a).clone();
        for mut row in out.rows_mut() {
            let norm = row.dot(&row).sqrt().max(eps);
            row.mapv_inplace(|x| x / norm);
        }
        self.push(out, Op::L2NormalizeRows(a, eps), &[a])
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let out = self.value(a).t().to_owned();
        self.push(out, Op::Transpose(a), &[a])
    }

    pub fn elementwise_mul(&mut self, a: Var, b: Var) -> Var {
        self.assert_same_shape("elementwise_mul", a, b);
        let out = self.value(a) * self.value(b);
        self.push(out, Op::ElemMul(a, b), &[a, b])
    }

    pub fn reduce_mean(&mut self, a: Var) -> Var {
        let va = self.value(a);
        assert!(!va.is_empty(), "reduce_mean of an empty tensor");
        let out = Array2::from_elem((1, 1), va.sum() / va.len() as f64);
        self.push(out, Op::ReduceMean(a), &[a])
    }

    pub fn reduce_sum(&mut self, a: Var) -> Var {
        let out = Array2::from_elem((1, 1), self.value(a).sum());
        self.push(out, Op::ReduceSum(a), &[a])
    }

    /// Differentiable `D~^{-1/2} (A + I) D~^{-1/2}` over a square weighted
    /// adjacency, with `D~` the row sums of `A + I`.
    pub fn gcn_normalize(&mut self, a: Var) -> Var {
        let va = self.value(a);
        assert_eq!(va.nrows(), va.ncols(), "gcn_normalize: non-square input");
        let out = gcn_normalize(va);
        self.push(out, Op::GcnNormalize(a), &[a])
    }

    /// Softmax over consecutive segments of an `E x 1` column. Segment `i`
    /// spans rows `offsets[i]..offsets[i + 1]`; empty segments are allowed.
    pub fn segment_softmax(&mut self, a: Var, offsets: impl Into<Rc<[usize]>>) -> Var {
        let offsets: Rc<[usize]> = offsets.into();
        let va = self.value(a);
        assert_eq!(va.ncols(), 1, "segment_softmax expects a column");
        assert!(
            offsets.first() == Some(&0) && offsets.last() == Some(&va.nrows()),
            "segment_softmax: offsets must span 0..{}",
            va.nrows()
        );
        let mut out = va.clone();
        for w in offsets.windows(2) {
            let mut seg = out.slice_mut(s![w[0]..w[1], 0]);
            if seg.is_empty() {
                continue;
            }
            let m = seg.fold(f64::NEG_INFINITY, |acc, &x| acc.max(x));
            seg.mapv_inplace(|x| (x - m).exp());
            let z = seg.sum();
            seg.mapv_inplace(|x| x / z);
        }
        self.push(out, Op::SegmentSoftmax(a, offsets), &[a])
    }

    /// Scatters an `E x 1` column into an `n x n` zero matrix at `pairs`;
    /// repeated pairs add.
    pub fn scatter_pairs(
        &mut self,
        a: Var,
        pairs: impl Into<Rc<[(usize, usize)]>>,
        n: usize,
    ) -> Var {
        let pairs: Rc<[(usize, usize)]> = pairs.into();
        let va = self.value(a);
        assert!(
            va.ncols() == 1 && va.nrows() == pairs.len(),
            "scatter_pairs: {} values for {} pairs",
            va.nrows(),
            pairs.len()
        );
        let mut out = Array2::zeros((n, n));
        for (k, &(i, j)) in pairs.iter().enumerate() {
            out[[i, j]] += va[[k, 0]];
        }
        self.push(out, Op::ScatterPairs(a, pairs), &[a])
    }

    // ---- reverse pass ----------------------------------------------------

    /// Back-propagates from a 1x1 `loss` and adds `d loss / d leaf` into the
    /// gradient of every `requires_grad` leaf. Gradients accumulate across
    /// calls until [`Tape::zero_grad`].
    pub fn backward(&mut self, loss: Var) {
        assert_eq!(
            self.shape(loss),
            (1, 1),
            "backward needs a scalar loss, got {:?}",
            self.shape(loss)
        );
        let mut adj: Vec<Option<Array2<f64>>> = (0..=loss.0).map(|_| None).collect();
        adj[loss.0] = Some(Array2::ones((1, 1)));
        for idx in (0..=loss.0).rev() {
            let Some(g) = adj[idx].take() else { continue };
            if !self.tensors[idx].needs_grad {
                continue;
            }
            self.propagate(idx, g, &mut adj);
        }
    }

    fn wants(&self, v: Var) -> bool {
        self.tensors[v.0].needs_grad
    }

    fn propagate(&mut self, idx: usize, g: Array2<f64>, adj: &mut [Option<Array2<f64>>]) {
        fn acc(adj: &mut [Option<Array2<f64>>], v: Var, delta: Array2<f64>) {
            match adj[v.0].as_mut() {
                Some(existing) => *existing += &delta,
                None => adj[v.0] = Some(delta),
            }
        }

        let t = &self.tensors[idx];
        match &t.op {
            Op::Leaf => {
                if let Some(grad) = self.tensors[idx].grad.as_mut() {
                    *grad += &g;
                }
            }
            Op::MatMul(a, b) => {
                let (a, b) = (*a, *b);
                if self.wants(a) {
                    acc(adj, a, g.dot(&self.value(b).t()));
                }
                if self.wants(b) {
                    acc(adj, b, self.value(a).t().dot(&g));
                }
            }
            Op::Add(a, b) => {
                let (a, b) = (*a, *b);
                if self.wants(b) {
                    acc(adj, b, g.clone());
                }
                if self.wants(a) {
                    acc(adj, a, g);
                }
            }
            Op::Sub(a, b) => {
                let (a, b) = (*a, *b);
                if self.wants(b) {
                    acc(adj, b, -&g);
                }
                if self.wants(a) {
                    acc(adj, a, g);
                }
            }
            Op::AddRow(a, row) => {
                let (a, row) = (*a, *row);
                if self.wants(row) {
                    acc(adj, row, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                }
                if self.wants(a) {
                    acc(adj, a, g);
                }
            }
            Op::Scale(a, c) => {
                let (a, c) = (*a, *c);
                acc(adj, a, g * c);
            }
            Op::Relu(a) => {
                let a = *a;
                let mut d = g;
                Zip::from(&mut d).and(self.value(a)).for_each(|d, &x| {
                    if x <= 0.0 {
                        *d = 0.0
                    }
                });
                acc(adj, a, d);
            }
            Op::RowSoftmax(a) => {
                let a = *a;
                let y = &t.value;
                let mut d = Array2::zeros(y.dim());
                for ((mut dr, yr), gr) in d.rows_mut().into_iter().zip(y.rows()).zip(g.rows()) {
                    let dot = yr.dot(&gr);
                    Zip::from(&mut dr)
                        .and(&yr)
                        .and(&gr)
                        .for_each(|d, &y, &g| *d = y * (g - dot));
                }
                acc(adj, a, d);
            }
            Op::LogSoftmax(a) => {
                let a = *a;
                let y = &t.value;
                let mut d = Array2::zeros(y.dim());
                for ((mut dr, yr), gr) in d.rows_mut().into_iter().zip(y.rows()).zip(g.rows()) {
                    let total = gr.sum();
                    Zip::from(&mut dr)
                        .and(&yr)
                        .and(&gr)
                        .for_each(|d, &y, &g| *d = g - y.exp() * total);
                }
                acc(adj, a, d);
            }
            Op::Log(a) => {
                let a = *a;
                let d = g / self.value(a);
                acc(adj, a, d);
            }
            Op::Dropout(a, mask) => {
                let a = *a;
                let d = g * mask;
                acc(adj, a, d);
            }
            Op::ConcatCols(a, b) => {
                let (a, b) = (*a, *b);
                let split = self.value(a).ncols();
                if self.wants(a) {
                    acc(adj, a, g.slice(s![.., ..split]).to_owned());
                }
                if self.wants(b) {
                    acc(adj, b, g.slice(s![.., split..]).to_owned());
                }
            }
            Op::GatherRows(a, index) => {
                let a = *a;
                let mut d = Array2::zeros(self.value(a).dim());
                for (k, &i) in index.iter().enumerate() {
                    let mut row = d.row_mut(i);
                    row += &g.row(k);
                }
                acc(adj, a, d);
            }
            Op::L2NormalizeRows(a, eps) => {
                let (a, eps) = (*a, *eps);
                let x = self.value(a);
                let y = &t.value;
                let mut d = Array2::zeros(x.dim());
                for (((mut dr, xr), yr), gr) in d
                    .rows_mut()
                    .into_iter()
                    .zip(x.rows())
                    .zip(y.rows())
                    .zip(g.rows())
                {
                    let norm = xr.dot(&xr).sqrt();
                    if norm > eps {
                        let proj = yr.dot(&gr);
                        Zip::from(&mut dr)
                            .and(&yr)
                            .and(&gr)
                            .for_each(|d, &y, &g| *d = (g - y * proj) / norm);
                    } else {
                        Zip::from(&mut dr).and(&gr).for_each(|d, &g| *d = g / eps);
                    }
                }
                acc(adj, a, d);
            }
            Op::Transpose(a) => {
                let a = *a;
                acc(adj, a, g.t().to_owned());
            }
            Op::ElemMul(a, b) => {
                let (a, b) = (*a, *b);
                if self.wants(a) {
                    acc(adj, a, &g * self.value(b));
                }
                if self.wants(b) {
                    acc(adj, b, &g * self.value(a));
                }
            }
            Op::ReduceMean(a) => {
                let a = *a;
                let dim = self.value(a).dim();
                let n = (dim.0 * dim.1) as f64;
                acc(adj, a, Array2::from_elem(dim, g[[0, 0]] / n));
            }
            Op::ReduceSum(a) => {
                let a = *a;
                let dim = self.value(a).dim();
                acc(adj, a, Array2::from_elem(dim, g[[0, 0]]));
            }
            Op::GcnNormalize(a) => {
                let a = *a;
                let d = gcn_normalize_backward(self.value(a), &g);
                acc(adj, a, d);
            }
            Op::SegmentSoftmax(a, offsets) => {
                let a = *a;
                let y = &t.value;
                let mut d = Array2::zeros(y.dim());
                for w in offsets.windows(2) {
                    let (lo, hi) = (w[0], w[1]);
                    let dot: f64 = (lo..hi).map(|k| y[[k, 0]] * g[[k, 0]]).sum();
                    for k in lo..hi {
                        d[[k, 0]] = y[[k, 0]] * (g[[k, 0]] - dot);
                    }
                }
                acc(adj, a, d);
            }
            Op::ScatterPairs(a, pairs) => {
                let a = *a;
                let d = Array2::from_shape_fn((pairs.len(), 1), |(k, _)| {
                    let (i, j) = pairs[k];
                    g[[i, j]]
                });
                acc(adj, a, d);
            }
        }
    }
}

pub(crate) fn row_softmax(x: &Array2<f64>) -> Array2<f64> {
    let mut out = x.clone();
    for mut row in out.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |acc, &x| acc.max(x));
        row.mapv_inplace(|x| (x - m).exp());
        let z = row.sum();
        row.mapv_inplace(|x| x / z);
    }
    out
}

/// Adjoint of `out = r_i (A + I)_ij r_j` with `r = d^{-1/2}` and `d` the
/// row sums of `A + I`.
fn gcn_normalize_backward(a: &Array2<f64>, g: &Array2<f64>) -> Array2<f64> {
    let n = a.nrows();
    let m = |i: usize, j: usize| a[[i, j]] + if i == j { 1.0 } else { 0.0 };
    let d: Vec<f64> = a
        .rows()
        .into_iter()
        .map(|row| row.iter().sum::<f64>() + 1.0)
        .collect();
    let r: Vec<f64> = d
        .iter()
        .map(|&d| 1.0 / d.max(DEGREE_FLOOR).sqrt())
        .collect();
    // g_r[i] = sum_l G_il M_il r_l + sum_k G_ki r_k M_ki
    let mut g_r = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            let w = g[[i, j]] * m(i, j);
            g_r[i] += w * r[j];
            g_r[j] += w * r[i];
        }
    }
    let g_d: Vec<f64> = (0..n)
        .map(|i| {
            if d[i] > DEGREE_FLOOR {
                -0.5 * g_r[i] * r[i] * r[i] * r[i]
            } else {
                0.0
            }
        })
        .collect();
    Array2::from_shape_fn((n, n), |(i, j)| g[[i, j]] * r[i] * r[j] + g_d[i])
}
