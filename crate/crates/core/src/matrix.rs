//! Dense row-major f32 matrix and the small numeric kernels shared by the
//! pruning, pooling, and diagnostics modules. Reductions accumulate in f64.

use crate::error::{Error, Result};

/// Dense row-major matrix of f32 values.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl Matrix {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "matrix data length {} does not match {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f32] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f32 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f32) {
        self.data[i * self.cols + j] = v;
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    /// Builds a matrix from the given rows of `self` in order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Matrix> {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            if i >= self.rows {
                return Err(Error::InvalidArgument(format!(
                    "row index {i} out of range for {} rows",
                    self.rows
                )));
            }
            data.extend_from_slice(self.row(i));
        }
        Matrix::from_vec(indices.len(), self.cols, data)
    }

    /// Matrix product, accumulating each entry in f64.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch(format!(
                "matmul {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let a = self.row(i);
            for j in 0..other.cols {
                let mut acc = 0.0f64;
                for (k, &av) in a.iter().enumerate() {
                    acc += av as f64 * other.get(k, j) as f64;
                }
                out.set(i, j, acc as f32);
            }
        }
        Ok(out)
    }

    /// L2 norm of each row.
    pub fn row_norms(&self) -> Vec<f64> {
        (0..self.rows).map(|i| l2_norm(self.row(i))).collect()
    }
}

pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

pub fn l2_norm(v: &[f32]) -> f64 {
    v.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt()
}

/// Cosine similarity; zero whenever either vector has zero norm.
pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let na = l2_norm(a);
    let nb = l2_norm(b);
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot(a, b) / (na * nb)
}

/// Indices of the `k` largest values, ordered by descending value and then
/// ascending index; ties at a value keep the lowest indices.
pub fn topk_indices(values: &[f64], k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > values.len() {
        return Err(Error::InvalidArgument(format!(
            "top-k count {k} out of range for {} values",
            values.len()
        )));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        values[b]
            .total_cmp(&values[a])
            .then_with(|| a.cmp(&b))
    });
    order.truncate(k);
    Ok(order)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn topk_tie_breaks_by_lowest_index() {
        let v = [0.1, 0.4, 0.4, 0.3];
        assert_eq!(topk_indices(&v, 2).unwrap(), vec![1, 2]);
    }

    #[test]
    fn topk_full_sort() {
        let v = [5.0, 1.0, 3.0];
        assert_eq!(topk_indices(&v, 3).unwrap(), vec![0, 2, 1]);
    }

    #[test]
    fn topk_rejects_out_of_range_k() {
        let v = [1.0, 2.0];
        assert!(topk_indices(&v, 0).is_err());
        assert!(topk_indices(&v, 3).is_err());
    }

    #[test]
    fn topk_duplicate_max_never_displaces_lower_copy() {
        // Appending a duplicate of the max at a higher index keeps the
        // lower-index copy in front.
        let v = [0.2, 0.9, 0.5, 0.9];
        assert_eq!(topk_indices(&v, 1).unwrap(), vec![1]);
        assert_eq!(topk_indices(&v, 2).unwrap(), vec![1, 3]);
    }

    #[test]
    fn matmul_matches_hand_product() {
        let a = Matrix::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let b = Matrix::from_vec(3, 2, vec![7.0, 8.0, 9.0, 10.0, 11.0, 12.0]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.data(), &[58.0, 64.0, 139.0, 154.0]);
    }

    #[test]
    fn matmul_rejects_dimension_mismatch() {
        let a = Matrix::zeros(2, 3);
        let b = Matrix::zeros(2, 2);
        assert!(a.matmul(&b).is_err());
    }

    #[test]
    fn cosine_of_zero_vector_is_zero() {
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 2.0]), 0.0);
    }

    #[test]
    fn cosine_is_scale_invariant() {
        let a = [1.0, 2.0, 3.0];
        let b = [7.0, 14.0, 21.0];
        assert!((cosine(&a, &b) - 1.0).abs() < 1e-12);
    }
}
