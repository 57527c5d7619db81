//! Row-major f64 matrices and the three products the networks need.
//!
//! No BLAS. The shapes here (batch up to a few thousand, width 256) are
//! served well by loops with light cache blocking that LLVM vectorizes for
//! the host target. Summation order is fixed, so results are deterministic
//! for a given build.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length mismatch");
        Mat { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        assert!(!rows.is_empty(), "from_rows needs at least one row");
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Mat { rows: rows.len(), cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn map_inplace(&mut self, f: impl Fn(f64) -> f64) {
        for v in &mut self.data {
            *v = f(*v);
        }
    }

    /// Adds `bias` to every row.
    pub fn add_bias(&mut self, bias: &[f64]) {
        assert_eq!(bias.len(), self.cols, "bias length mismatch");
        for r in 0..self.rows {
            let row = self.row_mut(r);
            for (v, b) in row.iter_mut().zip(bias) {
                *v += b;
            }
        }
    }

    /// Sum over rows, one value per column.
    pub fn col_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for r in 0..self.rows {
            for (o, v) in out.iter_mut().zip(self.row(r)) {
                *o += v;
            }
        }
        out
    }
}

/// Dot product with a fixed-width accumulator bank so the FMA chains pipeline.
pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "dot length mismatch");
    const LANES: usize = 16;
    let chunks = x.len() / LANES;
    let mut acc = [0.0f64; LANES];
    for c in 0..chunks {
        let xa = &x[c * LANES..(c + 1) * LANES];
        let ya = &y[c * LANES..(c + 1) * LANES];
        for l in 0..LANES {
            acc[l] = xa[l].mul_add(ya[l], acc[l]);
        }
    }
    let mut s = 0.0;
    for a in acc {
        s += a;
    }
    for t in chunks * LANES..x.len() {
        s = x[t].mul_add(y[t], s);
    }
    s
}

/// C = A · Bᵀ for A (m,k), B (n,k). This is the forward-pass shape: batch
/// inputs times a (out,in) weight matrix.
pub fn matmul_nt(a: &Mat, b: &Mat) -> Mat {
    assert_eq!(a.cols, b.cols, "matmul_nt inner dimension mismatch");
    let (m, n) = (a.rows, b.rows);
    let mut c = Mat::zeros(m, n);
    const IB: usize = 64;
    const JB: usize = 8;
    for i0 in (0..m).step_by(IB) {
        let i1 = (i0 + IB).min(m);
        for j0 in (0..n).step_by(JB) {
            let j1 = (j0 + JB).min(n);
            for i in i0..i1 {
                let ar = a.row(i);
                for j in j0..j1 {
                    let v = dot(ar, b.row(j));
                    c.row_mut(i)[j] = v;
                }
            }
        }
    }
    c
}

/// C = A · B for A (m,k), B (k,n). Used to push gradients back through a
/// layer: dX = dZ · W.
pub fn matmul_nn(a: &Mat, b: &Mat) -> Mat {
    assert_eq!(a.cols, b.rows, "matmul_nn inner dimension mismatch");
    let (m, n, k) = (a.rows, b.cols, a.cols);
    let mut c = Mat::zeros(m, n);
    const TB: usize = 64;
    for t0 in (0..k).step_by(TB) {
        let t1 = (t0 + TB).min(k);
        for i in 0..m {
            let ar = a.row(i);
            let cr = &mut c.data[i * n..(i + 1) * n];
            for t in t0..t1 {
                let s = ar[t];
                let br = &b.data[t * n..(t + 1) * n];
                for j in 0..n {
                    cr[j] = s.mul_add(br[j], cr[j]);
                }
            }
        }
    }
    c
}

/// C += Aᵀ · B for A (m,k), B (m,n), C (k,n). Accumulates weight gradients:
/// dW += dZᵀ · X summed over the batch dimension m.
pub fn matmul_tn_acc(a: &Mat, b: &Mat, c: &mut Mat) {
    assert_eq!(a.rows, b.rows, "matmul_tn batch dimension mismatch");
    assert_eq!(c.rows, a.cols, "matmul_tn output rows mismatch");
    assert_eq!(c.cols, b.cols, "matmul_tn output cols mismatch");
    let (m, n, k) = (a.rows, b.cols, a.cols);
    const IB: usize = 8;
    for i0 in (0..m).step_by(IB) {
        let i1 = (i0 + IB).min(m);
        for t in 0..k {
            let cr = &mut c.data[t * n..(t + 1) * n];
            for i in i0..i1 {
                let s = a.data[i * k + t];
                let br = &b.data[i * n..(i + 1) * n];
                for j in 0..n {
                    cr[j] = s.mul_add(br[j], cr[j]);
                }
            }
        }
    }
}

/// y = W · x + b for W (out,in): the single-sample forward step.
pub fn matvec_bias(w: &Mat, x: &[f64], b: &[f64]) -> Vec<f64> {
    assert_eq!(w.cols, x.len(), "matvec input length mismatch");
    assert_eq!(w.rows, b.len(), "matvec bias length mismatch");
    (0..w.rows).map(|o| dot(w.row(o), x) + b[o]).collect()
}

/// Squared Euclidean distance.
pub fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "sq_dist length mismatch");
    let mut s = 0.0;
    for (a, b) in x.iter().zip(y) {
        let d = a - b;
        s = d.mul_add(d, s);
    }
    s
}

pub fn mean(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty(), "mean of empty slice");
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation (divides by n).
pub fn std_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64;
    var.sqrt()
}
