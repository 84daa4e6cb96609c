//! Dense tensors and Kronecker-structured linear algebra.
//!
//! Tensors are stored row-major: the last axis index varies fastest. A
//! Kronecker product `F_1 ⊗ … ⊗ F_d` acting on `vec(T)` therefore pairs
//! factor `F_1` with the slowest axis and `F_d` with the fastest one, which
//! is the same as applying `F_k` as a mode-`k` product for every `k`.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::kernel1d::AxisGram;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "matrix {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        if self.rows == 0 || other.cols == 0 || self.cols == 0 {
            return Ok(out);
        }
        // SAFETY: every pointer/stride pair describes a buffer of exactly the
        // advertised row-major shape.
        unsafe {
            matrixmultiply::dgemm(
                self.rows,
                self.cols,
                other.cols,
                1.0,
                self.data.as_ptr(),
                self.cols as isize,
                1,
                other.data.as_ptr(),
                other.cols as isize,
                1,
                0.0,
                out.data.as_mut_ptr(),
                other.cols as isize,
                1,
            );
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::Shape(format!(
                "matrix {}x{} times vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// A d-way array of reals in row-major (last axis fastest) layout.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.iter().any(|&m| m == 0) {
            return Err(Error::Shape(format!(
                "tensor extents must be positive, got {shape:?}"
            )));
        }
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} needs {len} entries, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; len],
        }
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        let len = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![value; len],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn flat_index(&self, index: &[usize]) -> usize {
        flat_index(&self.shape, index)
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.data[flat_index(&self.shape, index)]
    }

    pub fn dot(&self, other: &DenseTensor) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn max_abs_diff(&self, other: &DenseTensor) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// `self += scale * other`.
    pub fn axpy(&mut self, scale: f64, other: &DenseTensor) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for a in &mut self.data {
            *a *= factor;
        }
    }

    fn check_axis(&self, axis: usize) -> Result<()> {
        if axis >= self.ndim() {
            return Err(Error::Shape(format!(
                "axis {axis} out of range for tensor of shape {:?}",
                self.shape
            )));
        }
        Ok(())
    }

    /// `(pre, extent, post)` split of the layout around `axis`.
    fn split(&self, axis: usize) -> (usize, usize, usize) {
        let pre = self.shape[..axis].iter().product();
        let post = self.shape[axis + 1..].iter().product();
        (pre, self.shape[axis], post)
    }
}

/// Row-major linearization of a multi-index.
pub fn flat_index(shape: &[usize], index: &[usize]) -> usize {
    index
        .iter()
        .zip(shape)
        .fold(0, |acc, (&i, &m)| acc * m + i)
}

/// Inverse of [`flat_index`].
pub fn multi_index(shape: &[usize], mut flat: usize) -> Vec<usize> {
    let mut index = vec![0; shape.len()];
    for (slot, &m) in index.iter_mut().zip(shape).rev() {
        *slot = flat % m;
        flat /= m;
    }
    index
}

/// Mode-`axis` product: contracts the tensor's `axis` with the columns of
/// `matrix`, so the result has `matrix.rows()` entries along that axis.
pub fn mode_multiply(tensor: &DenseTensor, matrix: &Matrix, axis: usize) -> Result<DenseTensor> {
    mode_product(tensor, matrix, axis, false)
}

/// Mode product with `matrixᵀ`, without forming the transpose.
pub fn mode_multiply_transposed(
    tensor: &DenseTensor,
    matrix: &Matrix,
    axis: usize,
) -> Result<DenseTensor> {
    mode_product(tensor, matrix, axis, true)
}

fn mode_product(
    tensor: &DenseTensor,
    matrix: &Matrix,
    axis: usize,
    transposed: bool,
) -> Result<DenseTensor> {
    tensor.check_axis(axis)?;
    let (out_rows, inner, rs_m, cs_m) = if transposed {
        (matrix.cols, matrix.rows, 1isize, matrix.cols as isize)
    } else {
        (matrix.rows, matrix.cols, matrix.cols as isize, 1isize)
    };
    let (pre, extent, post) = tensor.split(axis);
    if inner != extent {
        return Err(Error::Shape(format!(
            "mode-{axis} product of tensor {:?} with {}{}x{} matrix",
            tensor.shape,
            if transposed { "transposed " } else { "" },
            out_rows,
            inner
        )));
    }
    let mut shape = tensor.shape.clone();
    shape[axis] = out_rows;
    let mut out = DenseTensor::zeros(&shape);
    if out_rows == 0 {
        return Ok(out);
    }

    let a = matrix.data.as_ptr();
    let t = tensor.data.as_ptr();
    let o = out.data.as_mut_ptr();
    // SAFETY: offsets and strides below stay inside the (pre, extent, post)
    // and (pre, out_rows, post) layouts of the input and output buffers.
    unsafe {
        if post >= pre {
            // out[p] (out_rows x post) = M (out_rows x extent) · T[p] (extent x post)
            for p in 0..pre {
                matrixmultiply::dgemm(
                    out_rows,
                    extent,
                    post,
                    1.0,
                    a,
                    rs_m,
                    cs_m,
                    t.add(p * extent * post),
                    post as isize,
                    1,
                    0.0,
                    o.add(p * out_rows * post),
                    post as isize,
                    1,
                );
            }
        } else {
            // out[:, :, q] (pre x out_rows) = T[:, :, q] (pre x extent) · Mᵀ
            for q in 0..post {
                matrixmultiply::dgemm(
                    pre,
                    extent,
                    out_rows,
                    1.0,
                    t.add(q),
                    (extent * post) as isize,
                    post as isize,
                    a,
                    cs_m,
                    rs_m,
                    0.0,
                    o.add(q),
                    (out_rows * post) as isize,
                    post as isize,
                );
            }
        }
    }
    Ok(out)
}

/// `(F_1 ⊗ … ⊗ F_d) v` by successive mode products.
pub fn kron_matvec(factors: &[Matrix], v: &[f64]) -> Result<Vec<f64>> {
    if factors.is_empty() {
        return Err(Error::Shape("no Kronecker factors".into()));
    }
    let shape: Vec<usize> = factors.iter().map(Matrix::cols).collect();
    let mut t = DenseTensor::new(shape, v.to_vec()).map_err(|_| {
        Error::Shape(format!(
            "Kronecker factors with {} columns in total applied to vector of length {}",
            factors.iter().map(Matrix::cols).product::<usize>(),
            v.len()
        ))
    })?;
    for (axis, f) in factors.iter().enumerate() {
        t = mode_multiply(&t, f, axis)?;
    }
    Ok(t.into_vec())
}

/// `(K_1 ⊗ … ⊗ K_d)⁻¹ v` (nuggets included) using each axis' Cholesky factor.
pub fn kron_solve(grams: &[AxisGram], v: &[f64]) -> Result<Vec<f64>> {
    let shape: Vec<usize> = grams.iter().map(AxisGram::len).collect();
    let expected: usize = shape.iter().product();
    if grams.is_empty() || expected != v.len() {
        return Err(Error::Shape(format!(
            "Kronecker solve with axis sizes {shape:?} against vector of length {}",
            v.len()
        )));
    }
    let mut t = DenseTensor::new(shape, v.to_vec())?;
    kron_solve_in_place(grams, &mut t)?;
    Ok(t.into_vec())
}

/// Tensor form of [`kron_solve`], overwriting `tensor`.
pub fn kron_solve_in_place(grams: &[AxisGram], tensor: &mut DenseTensor) -> Result<()> {
    if grams.len() != tensor.ndim()
        || grams.iter().zip(tensor.shape()).any(|(g, &m)| g.len() != m)
    {
        return Err(Error::Shape(format!(
            "Kronecker solve with axis sizes {:?} against tensor {:?}",
            grams.iter().map(AxisGram::len).collect::<Vec<_>>(),
            tensor.shape()
        )));
    }
    for (axis, gram) in grams.iter().enumerate() {
        let l = gram.cholesky_factor();
        lower_solve_along(tensor, l, axis);
        lower_transpose_solve_along(tensor, l, axis);
    }
    Ok(())
}

/// Solves `L y = x` for every fiber along `axis`, in place.
fn lower_solve_along(tensor: &mut DenseTensor, l: &Matrix, axis: usize) {
    let (pre, n, post) = tensor.split(axis);
    let data = &mut tensor.data;
    for p in 0..pre {
        let block = &mut data[p * n * post..(p + 1) * n * post];
        for i in 0..n {
            let (done, rest) = block.split_at_mut(i * post);
            let row_i = &mut rest[..post];
            for j in 0..i {
                let lij = l[(i, j)];
                if lij != 0.0 {
                    let row_j = &done[j * post..(j + 1) * post];
                    for (a, b) in row_i.iter_mut().zip(row_j) {
                        *a -= lij * b;
                    }
                }
            }
            let inv = 1.0 / l[(i, i)];
            for a in row_i.iter_mut() {
                *a *= inv;
            }
        }
    }
}

/// Solves `Lᵀ y = x` for every fiber along `axis`, in place.
fn lower_transpose_solve_along(tensor: &mut DenseTensor, l: &Matrix, axis: usize) {
    let (pre, n, post) = tensor.split(axis);
    let data = &mut tensor.data;
    for p in 0..pre {
        let block = &mut data[p * n * post..(p + 1) * n * post];
        for i in (0..n).rev() {
            let (head, done) = block.split_at_mut((i + 1) * post);
            let row_i = &mut head[i * post..];
            for j in i + 1..n {
                let lji = l[(j, i)];
                if lji != 0.0 {
                    let row_j = &done[(j - i - 1) * post..(j - i) * post];
                    for (a, b) in row_i.iter_mut().zip(row_j) {
                        *a -= lji * b;
                    }
                }
            }
            let inv = 1.0 / l[(i, i)];
            for a in row_i.iter_mut() {
                *a *= inv;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel1d::gram_cholesky;

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((*seed >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    }

    fn random_tensor(shape: &[usize], seed: &mut u64) -> DenseTensor {
        let len = shape.iter().product();
        DenseTensor::new(shape.to_vec(), (0..len).map(|_| lcg(seed)).collect()).unwrap()
    }

    fn random_matrix(rows: usize, cols: usize, seed: &mut u64) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| lcg(seed))
    }

    #[test]
    fn identity_mode_product_is_noop() {
        let mut seed = 1;
        let t = random_tensor(&[3, 4, 2], &mut seed);
        for axis in 0..3 {
            let out = mode_multiply(&t, &Matrix::identity(t.shape()[axis]), axis).unwrap();
            assert_eq!(out, t);
        }
    }

    #[test]
    fn ones_times_ones_gives_twos() {
        let t = DenseTensor::filled(&[2, 3], 1.0);
        let m = Matrix::new(2, 2, vec![1.0; 4]).unwrap();
        let out = mode_multiply(&t, &m, 0).unwrap();
        assert_eq!(out.shape(), &[2, 3]);
        assert!(out.as_slice().iter().all(|&x| x == 2.0));
    }

    #[test]
    fn mode_product_matches_unfolding() {
        let mut seed = 7;
        let t = random_tensor(&[3, 4, 5], &mut seed);
        let m = random_matrix(7, 4, &mut seed);
        let out = mode_multiply(&t, &m, 1).unwrap();
        assert_eq!(out.shape(), &[3, 7, 5]);
        for a in 0..3 {
            for i in 0..7 {
                for c in 0..5 {
                    let expect: f64 = (0..4).map(|j| m[(i, j)] * t.get(&[a, j, c])).sum();
                    let got = out.get(&[a, i, c]);
                    assert!((got - expect).abs() <= 1e-12 * expect.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn transposed_product_matches_explicit_transpose() {
        let mut seed = 3;
        let t = random_tensor(&[4, 6], &mut seed);
        let m = random_matrix(6, 5, &mut seed);
        let a = mode_multiply_transposed(&t, &m, 1).unwrap();
        let b = mode_multiply(&t, &m.transpose(), 1).unwrap();
        assert!(a
            .as_slice()
            .iter()
            .zip(b.as_slice())
            .all(|(x, y)| (x - y).abs() < 1e-13));
    }

    #[test]
    fn mode_product_shape_error() {
        let t = DenseTensor::zeros(&[2, 3]);
        let m = Matrix::zeros(2, 2);
        let err = mode_multiply(&t, &m, 1).unwrap_err();
        assert!(matches!(err, Error::Shape(_)));
        assert!(err.to_string().contains("[2, 3]"));
    }

    #[test]
    fn flat_and_multi_index_round_trip() {
        let shape = [3, 1, 4, 2];
        let len: usize = shape.iter().product();
        for k in 0..len {
            assert_eq!(flat_index(&shape, &multi_index(&shape, k)), k);
        }
    }

    #[test]
    fn kron_solve_of_scalar_grams() {
        let grams = vec![
            gram_cholesky(&[0.5], 1.0, 1e-3).unwrap(),
            gram_cholesky(&[0.1], 2.0, 1e-2).unwrap(),
        ];
        let out = kron_solve(&grams, &[2.0]).unwrap();
        let expect = 2.0 / (1.001 * 1.01);
        assert!((out[0] - expect).abs() < 1e-14);
    }

    #[test]
    fn kron_solve_rejects_wrong_length() {
        let grams = vec![gram_cholesky(&[0.0, 1.0], 1.0, 1e-8).unwrap()];
        assert!(matches!(
            kron_solve(&grams, &[1.0, 2.0, 3.0]),
            Err(Error::Shape(_))
        ));
    }
}
