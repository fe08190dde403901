use std::fmt;

use crate::error::{Error, Result};

/// Dense row-major `f64` array.
#[derive(Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.shape)
            .field("data", &self.data)
            .finish()
    }
}

impl Tensor {
    pub fn new(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        if shape.iter().any(|&d| d == 0) {
            return Err(Error::Shape(format!("zero extent in shape {shape:?}")));
        }
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} needs {numel} values, got {}",
                data.len()
            )));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let numel = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; numel],
        }
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        let numel = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![value; numel],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self {
            shape: vec![1],
            data: vec![value],
        }
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Self::new(&[rows.len(), cols], rows.concat())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    /// Size of the trailing axis.
    pub fn last_dim(&self) -> usize {
        *self.shape.last().expect("tensor has at least one axis")
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if numel != self.data.len() {
            return Err(Error::Shape(format!(
                "cannot reshape {:?} into {shape:?}",
                self.shape
            )));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        debug_assert_eq!(index.len(), self.shape.len());
        let mut flat = 0;
        for (&i, &d) in index.iter().zip(&self.shape) {
            flat = flat * d + i;
        }
        self.data[flat]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let n = self.last_dim();
        &self.data[r * n..(r + 1) * n]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// `out[m×n] += a[m×k] · b[k×n]`, or `a · bᵀ` when `b_transposed` (b is `n×k`).
pub(crate) fn gemm_acc(
    a: &[f64],
    b: &[f64],
    out: &mut [f64],
    m: usize,
    k: usize,
    n: usize,
    b_transposed: bool,
) {
    if b_transposed {
        // row-major axpy form vectorizes; dot products do not
        let mut bt = vec![0.0; k * n];
        for j in 0..n {
            for p in 0..k {
                bt[p * n + j] = b[j * k + p];
            }
        }
        gemm_acc(a, &bt, out, m, k, n, false);
    } else {
        // four output rows per pass share each load of a `b` row
        let full = m / 4 * 4;
        let (head, tail) = out.split_at_mut(full * n);
        for (blk, o4) in head.chunks_exact_mut(4 * n).enumerate() {
            let i = blk * 4;
            let (o0, rest) = o4.split_at_mut(n);
            let (o1, rest) = rest.split_at_mut(n);
            let (o2, o3) = rest.split_at_mut(n);
            for p in 0..k {
                let (a0, a1, a2, a3) = (a[i * k + p], a[(i + 1) * k + p], a[(i + 2) * k + p], a[(i + 3) * k + p]);
                let brow = &b[p * n..(p + 1) * n];
                for ((((x0, x1), x2), x3), &bv) in o0.iter_mut().zip(o1.iter_mut()).zip(o2.iter_mut()).zip(o3.iter_mut()).zip(brow) {
                    *x0 += a0 * bv;
                    *x1 += a1 * bv;
                    *x2 += a2 * bv;
                    *x3 += a3 * bv;
                }
            }
        }
        for (r, orow) in tail.chunks_exact_mut(n).enumerate() {
            let i = full + r;
            for p in 0..k {
                let av = a[i * k + p];
                let brow = &b[p * n..(p + 1) * n];
                for (o, &bv) in orow.iter_mut().zip(brow) {
                    *o += av * bv;
                }
            }
        }
    }
}

/// `out[k×n] += aᵀ · g` where `a` is `m×k` and `g` is `m×n`.
pub(crate) fn gemm_at_acc(a: &[f64], g: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    let full = m / 4 * 4;
    for i in (0..full).step_by(4) {
        let g0 = &g[i * n..(i + 1) * n];
        let g1 = &g[(i + 1) * n..(i + 2) * n];
        let g2 = &g[(i + 2) * n..(i + 3) * n];
        let g3 = &g[(i + 3) * n..(i + 4) * n];
        for p in 0..k {
            let (a0, a1, a2, a3) = (a[i * k + p], a[(i + 1) * k + p], a[(i + 2) * k + p], a[(i + 3) * k + p]);
            let orow = &mut out[p * n..(p + 1) * n];
            for ((((o, &v0), &v1), &v2), &v3) in orow.iter_mut().zip(g0).zip(g1).zip(g2).zip(g3) {
                *o += a0 * v0;
                *o += a1 * v1;
                *o += a2 * v2;
                *o += a3 * v3;
            }
        }
    }
    for i in full..m {
        let grow = &g[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            let orow = &mut out[p * n..(p + 1) * n];
            for (o, &gv) in orow.iter_mut().zip(grow) {
                *o += av * gv;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_mismatched_length() {
        assert!(Tensor::new(&[2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::new(&[0], vec![]).is_err());
    }

    #[test]
    fn index_is_row_major() {
        let t = Tensor::new(&[2, 3], (0..6).map(f64::from).collect()).unwrap();
        assert_eq!(t.get(&[1, 0]), 3.0);
        assert_eq!(t.row(1), &[3.0, 4.0, 5.0]);
    }

    #[test]
    fn gemm_variants_agree() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]; // 2x3
        let b = [1.0, 0.0, 2.0, 1.0, 0.0, 3.0]; // 3x2
        let bt = [1.0, 2.0, 0.0, 0.0, 1.0, 3.0]; // 2x3 = bᵀ
        let mut o1 = [0.0; 4];
        let mut o2 = [0.0; 4];
        gemm_acc(&a, &b, &mut o1, 2, 3, 2, false);
        gemm_acc(&a, &bt, &mut o2, 2, 3, 2, true);
        assert_eq!(o1, [5.0, 11.0, 14.0, 23.0]);
        assert_eq!(o1, o2);
    }
}
