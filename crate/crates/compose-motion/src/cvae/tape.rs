//! Reverse-mode autodiff over dense f64 matrices, sized for desk-scale
//! transformer blocks. A tape of eagerly evaluated nodes records the forward
//! pass; `backward` walks it once in reverse.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Matrix { rows, cols, data }
    }

    pub fn row_vector(data: Vec<f64>) -> Self {
        Matrix { rows: 1, cols: data.len(), data }
    }

    pub fn scalar(v: f64) -> Self {
        Matrix { rows: 1, cols: 1, data: vec![v] }
    }

    pub fn randn<R: Rng>(rows: usize, cols: usize, std: f64, rng: &mut R) -> Self {
        use rand_distr::{Distribution, Normal};
        let normal = Normal::new(0.0, std).expect("std > 0");
        let data = (0..rows * cols).map(|_| normal.sample(rng)).collect();
        Matrix { rows, cols, data }
    }

    pub fn filled(rows: usize, cols: usize, v: f64) -> Self {
        Matrix { rows, cols, data: vec![v; rows * cols] }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows);
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                let src = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
        out
    }

    fn matmul_nt(&self, other: &Matrix) -> Matrix {
        // self (m x k) * other^T (k x n), other stored n x k
        assert_eq!(self.cols, other.cols);
        let mut out = Matrix::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let a_row = &self.data[i * self.cols..(i + 1) * self.cols];
            for j in 0..other.rows {
                let b_row = &other.data[j * other.cols..(j + 1) * other.cols];
                let mut acc = 0.0;
                for (a, b) in a_row.iter().zip(b_row) {
                    acc += a * b;
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    fn matmul_tn(&self, other: &Matrix) -> Matrix {
        // self^T (k x m) * other (m x n), self stored m x k
        assert_eq!(self.rows, other.rows);
        let mut out = Matrix::zeros(self.cols, other.cols);
        for m in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(m, k);
                if a == 0.0 {
                    continue;
                }
                let src = &other.data[m * other.cols..(m + 1) * other.cols];
                let dst = &mut out.data[k * other.cols..(k + 1) * other.cols];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
        out
    }

    fn add_assign(&mut self, other: &Matrix) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}

/// Named parameter tensors with flat scalar indexing for optimizers and
/// finite-difference probes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    pub tensors: Vec<Matrix>,
    pub names: Vec<String>,
}

impl ParamSet {
    pub fn new() -> Self {
        ParamSet { tensors: Vec::new(), names: Vec::new() }
    }

    pub fn add(&mut self, name: impl Into<String>, m: Matrix) -> usize {
        self.tensors.push(m);
        self.names.push(name.into());
        self.tensors.len() - 1
    }

    /// Total scalar parameter count.
    pub fn total_len(&self) -> usize {
        self.tensors.iter().map(|t| t.len()).sum()
    }

    /// Map a flat scalar index to (tensor, offset).
    pub fn locate(&self, flat: usize) -> (usize, usize) {
        let mut rest = flat;
        for (i, t) in self.tensors.iter().enumerate() {
            if rest < t.len() {
                return (i, rest);
            }
            rest -= t.len();
        }
        panic!("flat index {flat} out of range");
    }

    pub fn get_flat(&self, flat: usize) -> f64 {
        let (i, o) = self.locate(flat);
        self.tensors[i].data[o]
    }

    pub fn set_flat(&mut self, flat: usize, v: f64) {
        let (i, o) = self.locate(flat);
        self.tensors[i].data[o] = v;
    }

    pub fn zeros_like(&self) -> Vec<Matrix> {
        self.tensors.iter().map(|t| Matrix::zeros(t.rows, t.cols)).collect()
    }
}

impl Default for ParamSet {
    fn default() -> Self {
        Self::new()
    }
}

/// Handle to a tape node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

enum Op {
    Const,
    Param(usize),
    MatMul(Var, Var),
    MatMulNT(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Tanh(Var),
    Gelu(Var),
    Exp(Var),
    SoftmaxRows(Var),
    LayerNorm { x: Var, gamma: Var, beta: Var },
    SumAll(Var),
    MeanAll(Var),
    SliceRows { x: Var, start: usize },
    SliceCols { x: Var, start: usize },
    ConcatRows(Vec<Var>),
    ConcatCols(Vec<Var>),
    /// Externally computed scalar with a precomputed gradient w.r.t. `x`.
    External { x: Var, grad: Matrix },
}

struct Node {
    value: Matrix,
    op: Op,
}

const LN_EPS: f64 = 1e-5;

/// Forward tape. Values are computed eagerly; `backward` produces parameter
/// gradients.
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn constant(&mut self, m: Matrix) -> Var {
        self.push(m, Op::Const)
    }

    pub fn param(&mut self, params: &ParamSet, index: usize) -> Var {
        self.push(params.tensors[index].clone(), Op::Param(index))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    /// a * b^T
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul_nt(self.value(b));
        self.push(v, Op::MatMulNT(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!((va.rows, va.cols), (vb.rows, vb.cols), "add shape mismatch");
        let mut v = va.clone();
        v.add_assign(vb);
        self.push(v, Op::Add(a, b))
    }

    /// matrix + row vector broadcast over rows
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let (va, vr) = (self.value(a), self.value(row));
        assert_eq!(vr.rows, 1, "broadcast operand must be a row vector");
        assert_eq!(va.cols, vr.cols, "add_row width mismatch");
        let mut v = va.clone();
        for r in 0..v.rows {
            for c in 0..v.cols {
                v.data[r * v.cols + c] += vr.data[c];
            }
        }
        self.push(v, Op::AddRow(a, row))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!((va.rows, va.cols), (vb.rows, vb.cols), "sub shape mismatch");
        let data = va.data.iter().zip(&vb.data).map(|(x, y)| x - y).collect();
        let v = Matrix::from_vec(va.rows, va.cols, data);
        self.push(v, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!((va.rows, va.cols), (vb.rows, vb.cols), "mul shape mismatch");
        let data = va.data.iter().zip(&vb.data).map(|(x, y)| x * y).collect();
        let v = Matrix::from_vec(va.rows, va.cols, data);
        self.push(v, Op::Mul(a, b))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!((va.rows, va.cols), (vb.rows, vb.cols), "div shape mismatch");
        let data = va.data.iter().zip(&vb.data).map(|(x, y)| x / y).collect();
        let v = Matrix::from_vec(va.rows, va.cols, data);
        self.push(v, Op::Div(a, b))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let va = self.value(a);
        let data = va.data.iter().map(|x| x * k).collect();
        let v = Matrix::from_vec(va.rows, va.cols, data);
        self.push(v, Op::Scale(a, k))
    }

    pub fn add_scalar(&mut self, a: Var, k: f64) -> Var {
        let va = self.value(a);
        let data = va.data.iter().map(|x| x + k).collect();
        let v = Matrix::from_vec(va.rows, va.cols, data);
        self.push(v, Op::AddScalar(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let va = self.value(a);
        let data = va.data.iter().map(|x| x.tanh()).collect();
        let v = Matrix::from_vec(va.rows, va.cols, data);
        self.push(v, Op::Tanh(a))
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        let va = self.value(a);
        let data = va.data.iter().map(|&x| gelu(x)).collect();
        let v = Matrix::from_vec(va.rows, va.cols, data);
        self.push(v, Op::Gelu(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let va = self.value(a);
        let data = va.data.iter().map(|x| x.exp()).collect();
        let v = Matrix::from_vec(va.rows, va.cols, data);
        self.push(v, Op::Exp(a))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let va = self.value(a);
        let mut v = Matrix::zeros(va.rows, va.cols);
        for r in 0..va.rows {
            let row = &va.data[r * va.cols..(r + 1) * va.cols];
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for (c, x) in row.iter().enumerate() {
                let e = (x - max).exp();
                v.data[r * va.cols + c] = e;
                sum += e;
            }
            for c in 0..va.cols {
                v.data[r * va.cols + c] /= sum;
            }
        }
        self.push(v, Op::SoftmaxRows(a))
    }

    /// Per-row layer normalization with learned gain and bias (1 x cols each).
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Var {
        let vx = self.value(x);
        let g = self.value(gamma);
        let b = self.value(beta);
        assert_eq!(g.cols, vx.cols);
        assert_eq!(b.cols, vx.cols);
        let mut v = Matrix::zeros(vx.rows, vx.cols);
        let n = vx.cols as f64;
        for r in 0..vx.rows {
            let row = &vx.data[r * vx.cols..(r + 1) * vx.cols];
            let mean = row.iter().sum::<f64>() / n;
            let var = row.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
            let s = (var + LN_EPS).sqrt();
            for c in 0..vx.cols {
                let xhat = (row[c] - mean) / s;
                v.data[r * vx.cols + c] = xhat * g.data[c] + b.data[c];
            }
        }
        self.push(v, Op::LayerNorm { x, gamma, beta })
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let s = self.value(a).data.iter().sum();
        self.push(Matrix::scalar(s), Op::SumAll(a))
    }

    pub fn mean_all(&mut self, a: Var) -> Var {
        let va = self.value(a);
        let s: f64 = va.data.iter().sum();
        let v = Matrix::scalar(s / va.len() as f64);
        self.push(v, Op::MeanAll(a))
    }

    pub fn slice_rows(&mut self, x: Var, start: usize, len: usize) -> Var {
        let vx = self.value(x);
        assert!(start + len <= vx.rows);
        let data = vx.data[start * vx.cols..(start + len) * vx.cols].to_vec();
        let v = Matrix::from_vec(len, vx.cols, data);
        self.push(v, Op::SliceRows { x, start })
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Var {
        let vx = self.value(x);
        assert!(start + len <= vx.cols);
        let mut v = Matrix::zeros(vx.rows, len);
        for r in 0..vx.rows {
            for c in 0..len {
                v.data[r * len + c] = vx.data[r * vx.cols + start + c];
            }
        }
        self.push(v, Op::SliceCols { x, start })
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty());
        let cols = self.value(parts[0]).cols;
        let rows: usize = parts.iter().map(|p| self.value(*p).rows).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for p in parts {
            let v = self.value(*p);
            assert_eq!(v.cols, cols, "concat_rows width mismatch");
            data.extend_from_slice(&v.data);
        }
        self.push(Matrix::from_vec(rows, cols, data), Op::ConcatRows(parts.to_vec()))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty());
        let rows = self.value(parts[0]).rows;
        let cols: usize = parts.iter().map(|p| self.value(*p).cols).sum();
        let mut v = Matrix::zeros(rows, cols);
        let mut offset = 0;
        for p in parts {
            let pv = self.value(*p);
            assert_eq!(pv.rows, rows, "concat_cols height mismatch");
            for r in 0..rows {
                for c in 0..pv.cols {
                    v.data[r * cols + offset + c] = pv.data[r * pv.cols + c];
                }
            }
            offset += pv.cols;
        }
        self.push(v, Op::ConcatCols(parts.to_vec()))
    }

    /// A scalar computed outside the tape with a known gradient w.r.t. `x`.
    pub fn external_scalar(&mut self, x: Var, value: f64, grad: Matrix) -> Var {
        let vx = self.value(x);
        assert_eq!((grad.rows, grad.cols), (vx.rows, vx.cols), "external grad shape mismatch");
        self.push(Matrix::scalar(value), Op::External { x, grad })
    }

    /// Reverse pass from a scalar node; accumulates parameter gradients into
    /// `param_grads` (one matrix per parameter tensor).
    pub fn backward(&self, loss: Var, param_grads: &mut [Matrix]) -> Result<()> {
        let lv = self.value(loss);
        if lv.rows != 1 || lv.cols != 1 {
            return Err(Error::invalid_argument("backward root must be a scalar node"));
        }
        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Matrix::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            let Some(gout) = grads[idx].take() else { continue };
            match &self.nodes[idx].op {
                Op::Const => {}
                Op::Param(p) => param_grads[*p].add_assign(&gout),
                Op::MatMul(a, b) => {
                    let da = gout.matmul_nt(self.value(*b));
                    let db = self.value(*a).matmul_tn(&gout);
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::MatMulNT(a, b) => {
                    let da = gout.matmul(self.value(*b));
                    let db = gout.matmul_tn(self.value(*a));
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, gout.clone());
                    accumulate(&mut grads, *b, gout);
                }
                Op::AddRow(a, row) => {
                    let mut dr = Matrix::zeros(1, gout.cols);
                    for r in 0..gout.rows {
                        for c in 0..gout.cols {
                            dr.data[c] += gout.data[r * gout.cols + c];
                        }
                    }
                    accumulate(&mut grads, *a, gout);
                    accumulate(&mut grads, *row, dr);
                }
                Op::Sub(a, b) => {
                    let db = Matrix::from_vec(gout.rows, gout.cols, gout.data.iter().map(|g| -g).collect());
                    accumulate(&mut grads, *a, gout);
                    accumulate(&mut grads, *b, db);
                }
                Op::Mul(a, b) => {
                    let va = self.value(*a);
                    let vb = self.value(*b);
                    let da = Matrix::from_vec(
                        gout.rows,
                        gout.cols,
                        gout.data.iter().zip(&vb.data).map(|(g, y)| g * y).collect(),
                    );
                    let db = Matrix::from_vec(
                        gout.rows,
                        gout.cols,
                        gout.data.iter().zip(&va.data).map(|(g, x)| g * x).collect(),
                    );
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::Div(a, b) => {
                    let vb = self.value(*b);
                    let vc = &self.nodes[idx].value;
                    let da = Matrix::from_vec(
                        gout.rows,
                        gout.cols,
                        gout.data.iter().zip(&vb.data).map(|(g, y)| g / y).collect(),
                    );
                    let db = Matrix::from_vec(
                        gout.rows,
                        gout.cols,
                        gout.data
                            .iter()
                            .zip(vc.data.iter().zip(&vb.data))
                            .map(|(g, (c, y))| -g * c / y)
                            .collect(),
                    );
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::Scale(a, k) => {
                    let da = Matrix::from_vec(gout.rows, gout.cols, gout.data.iter().map(|g| g * k).collect());
                    accumulate(&mut grads, *a, da);
                }
                Op::AddScalar(a) => accumulate(&mut grads, *a, gout),
                Op::Tanh(a) => {
                    let y = &self.nodes[idx].value;
                    let da = Matrix::from_vec(
                        gout.rows,
                        gout.cols,
                        gout.data.iter().zip(&y.data).map(|(g, t)| g * (1.0 - t * t)).collect(),
                    );
                    accumulate(&mut grads, *a, da);
                }
                Op::Gelu(a) => {
                    let vx = self.value(*a);
                    let da = Matrix::from_vec(
                        gout.rows,
                        gout.cols,
                        gout.data.iter().zip(&vx.data).map(|(g, &x)| g * gelu_deriv(x)).collect(),
                    );
                    accumulate(&mut grads, *a, da);
                }
                Op::Exp(a) => {
                    let y = &self.nodes[idx].value;
                    let da = Matrix::from_vec(
                        gout.rows,
                        gout.cols,
                        gout.data.iter().zip(&y.data).map(|(g, e)| g * e).collect(),
                    );
                    accumulate(&mut grads, *a, da);
                }
                Op::SoftmaxRows(a) => {
                    let y = &self.nodes[idx].value;
                    let mut da = Matrix::zeros(gout.rows, gout.cols);
                    for r in 0..gout.rows {
                        let ys = &y.data[r * y.cols..(r + 1) * y.cols];
                        let gs = &gout.data[r * gout.cols..(r + 1) * gout.cols];
                        let dot: f64 = ys.iter().zip(gs).map(|(y, g)| y * g).sum();
                        for c in 0..gout.cols {
                            da.data[r * gout.cols + c] = ys[c] * (gs[c] - dot);
                        }
                    }
                    accumulate(&mut grads, *a, da);
                }
                Op::LayerNorm { x, gamma, beta } => {
                    let vx = self.value(*x);
                    let g = self.value(*gamma);
                    let n = vx.cols as f64;
                    let mut dx = Matrix::zeros(vx.rows, vx.cols);
                    let mut dgamma = Matrix::zeros(1, vx.cols);
                    let mut dbeta = Matrix::zeros(1, vx.cols);
                    for r in 0..vx.rows {
                        let row = &vx.data[r * vx.cols..(r + 1) * vx.cols];
                        let mean = row.iter().sum::<f64>() / n;
                        let var = row.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
                        let s = (var + LN_EPS).sqrt();
                        let gs = &gout.data[r * gout.cols..(r + 1) * gout.cols];
                        let mut dvar = 0.0;
                        let mut dmean = 0.0;
                        for c in 0..vx.cols {
                            let xc = row[c] - mean;
                            let dxhat = gs[c] * g.data[c];
                            dgamma.data[c] += gs[c] * (xc / s);
                            dbeta.data[c] += gs[c];
                            dvar += dxhat * xc * (-0.5) / (s * s * s);
                            dmean += -dxhat / s;
                        }
                        for c in 0..vx.cols {
                            let xc = row[c] - mean;
                            let dxhat = gs[c] * g.data[c];
                            dx.data[r * vx.cols + c] = dxhat / s + dvar * 2.0 * xc / n + dmean / n;
                        }
                    }
                    accumulate(&mut grads, *x, dx);
                    accumulate(&mut grads, *gamma, dgamma);
                    accumulate(&mut grads, *beta, dbeta);
                }
                Op::SumAll(a) => {
                    let va = self.value(*a);
                    accumulate(&mut grads, *a, Matrix::filled(va.rows, va.cols, gout.data[0]));
                }
                Op::MeanAll(a) => {
                    let va = self.value(*a);
                    let v = gout.data[0] / va.len() as f64;
                    accumulate(&mut grads, *a, Matrix::filled(va.rows, va.cols, v));
                }
                Op::SliceRows { x, start } => {
                    let vx = self.value(*x);
                    let mut dx = Matrix::zeros(vx.rows, vx.cols);
                    dx.data[start * vx.cols..start * vx.cols + gout.len()].copy_from_slice(&gout.data);
                    accumulate(&mut grads, *x, dx);
                }
                Op::SliceCols { x, start } => {
                    let vx = self.value(*x);
                    let mut dx = Matrix::zeros(vx.rows, vx.cols);
                    for r in 0..gout.rows {
                        for c in 0..gout.cols {
                            dx.data[r * vx.cols + start + c] = gout.data[r * gout.cols + c];
                        }
                    }
                    accumulate(&mut grads, *x, dx);
                }
                Op::ConcatRows(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let pv = self.value(*p);
                        let slice = gout.data[offset * gout.cols..(offset + pv.rows) * gout.cols].to_vec();
                        accumulate(&mut grads, *p, Matrix::from_vec(pv.rows, pv.cols, slice));
                        offset += pv.rows;
                    }
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let pv = self.value(*p);
                        let mut dp = Matrix::zeros(pv.rows, pv.cols);
                        for r in 0..pv.rows {
                            for c in 0..pv.cols {
                                dp.data[r * pv.cols + c] = gout.data[r * gout.cols + offset + c];
                            }
                        }
                        accumulate(&mut grads, *p, dp);
                        offset += pv.cols;
                    }
                }
                Op::External { x, grad } => {
                    let up = gout.data[0];
                    let dx = Matrix::from_vec(grad.rows, grad.cols, grad.data.iter().map(|g| g * up).collect());
                    accumulate(&mut grads, *x, dx);
                }
            }
        }
        Ok(())
    }
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

fn accumulate(grads: &mut [Option<Matrix>], v: Var, delta: Matrix) {
    match &mut grads[v.0] {
        Some(g) => g.add_assign(&delta),
        slot => *slot = Some(delta),
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044715;

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

fn gelu_deriv(x: f64) -> f64 {
    let u = GELU_C * (x + GELU_A * x * x * x);
    let t = u.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}
