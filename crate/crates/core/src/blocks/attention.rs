//! Dense and top-k sparse scaled dot-product attention on token matrices.

use crate::error::{Error, Result};

/// Row-major real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(format!("{rows}x{cols}"), format!("{} values", data.len())));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    /// `self · other`.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::shape(
                format!("{} rows", self.cols),
                format!("{}x{}", other.rows, other.cols),
            ));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        let n = other.cols;
        crate::par::for_each_chunk_mut(&mut out.data, n.max(1), |r, dst| {
            for (k, &a) in self.row(r).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (d, b) in dst.iter_mut().zip(other.row(k)) {
                    *d += a * b;
                }
            }
        });
        Ok(out)
    }

    /// `self · otherᵀ`.
    pub fn matmul_transposed(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(Error::shape(
                format!("{} cols", self.cols),
                format!("{}x{}", other.rows, other.cols),
            ));
        }
        let mut out = Matrix::zeros(self.rows, other.rows);
        for r in 0..self.rows {
            for c in 0..other.rows {
                out.data[r * other.rows + c] = self.row(r).iter().zip(other.row(c)).map(|(a, b)| a * b).sum();
            }
        }
        Ok(out)
    }
}

/// Binary mask keeping the `k` largest entries of each row; ties go to the
/// lower column index.
pub fn topk_mask(scores: &Matrix, k: usize) -> Result<Vec<Vec<bool>>> {
    let n = scores.cols();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("k must lie in [1, {n}], got {k}")));
    }
    Ok((0..scores.rows())
        .map(|r| {
            let row = scores.row(r);
            let mut order: Vec<usize> = (0..n).collect();
            // stable sort keeps lower indices first among equal scores
            order.sort_by(|&a, &b| row[b].total_cmp(&row[a]));
            let mut mask = vec![false; n];
            for &c in &order[..k] {
                mask[c] = true;
            }
            mask
        })
        .collect())
}

fn check_qkv(q: &Matrix, k: &Matrix, v: &Matrix, temperature: f64) -> Result<()> {
    if q.cols() != k.cols() {
        return Err(Error::shape(format!("key width {}", q.cols()), k.cols()));
    }
    if k.rows() != v.rows() {
        return Err(Error::shape(format!("{} value rows", k.rows()), v.rows()));
    }
    if !(temperature.is_finite() && temperature > 0.0) {
        return Err(Error::invalid(format!("temperature must be positive, got {temperature}")));
    }
    Ok(())
}

/// Softmax over the entries of `logits` where `keep` is true; the rest get
/// weight exactly zero.
fn masked_softmax(logits: &[f64], keep: &[bool]) -> Vec<f64> {
    let max = logits
        .iter()
        .zip(keep)
        .filter(|(_, &m)| m)
        .map(|(&l, _)| l)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = logits
        .iter()
        .zip(keep)
        .map(|(&l, &m)| if m { (l - max).exp() } else { 0.0 })
        .collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    w
}

/// Attention weights `Softmax(M_k ⊙ QKᵀ/λ)` where masked entries are excluded
/// from the softmax. Each row has exactly `k` non-zero weights summing to 1.
pub fn sparse_attention_weights(q: &Matrix, k: &Matrix, topk: usize, temperature: f64) -> Result<Matrix> {
    if q.cols() != k.cols() {
        return Err(Error::shape(format!("key width {}", q.cols()), k.cols()));
    }
    if !(temperature.is_finite() && temperature > 0.0) {
        return Err(Error::invalid(format!("temperature must be positive, got {temperature}")));
    }
    let mut logits = q.matmul_transposed(k)?;
    logits.data_mut().iter_mut().for_each(|l| *l /= temperature);
    let mask = topk_mask(&logits, topk)?;
    let n = logits.cols();
    let mut out = Matrix::zeros(logits.rows(), n);
    for (r, keep) in mask.iter().enumerate() {
        out.data[r * n..(r + 1) * n].copy_from_slice(&masked_softmax(logits.row(r), keep));
    }
    Ok(out)
}

/// Top-k sparse attention `Softmax(M_k ⊙ QKᵀ/λ) V`.
pub fn sparse_attention(q: &Matrix, k: &Matrix, v: &Matrix, topk: usize, temperature: f64) -> Result<Matrix> {
    check_qkv(q, k, v, temperature)?;
    sparse_attention_weights(q, k, topk, temperature)?.matmul(v)
}

/// Baseline attention `Softmax(QKᵀ/λ) V`.
pub fn dense_attention(q: &Matrix, k: &Matrix, v: &Matrix, temperature: f64) -> Result<Matrix> {
    check_qkv(q, k, v, temperature)?;
    let mut logits = q.matmul_transposed(k)?;
    logits.data_mut().iter_mut().for_each(|l| *l /= temperature);
    let n = logits.cols();
    let keep = vec![true; n];
    let mut weights = Matrix::zeros(logits.rows(), n);
    for r in 0..logits.rows() {
        weights.data[r * n..(r + 1) * n].copy_from_slice(&masked_softmax(logits.row(r), &keep));
    }
    weights.matmul(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: usize, cols: usize, v: &[f64]) -> Matrix {
        Matrix::from_vec(rows, cols, v.to_vec()).unwrap()
    }

    #[test]
    fn mask_examples() {
        let s = m(1, 3, &[3.0, 1.0, 2.0]);
        assert_eq!(topk_mask(&s, 1).unwrap(), vec![vec![true, false, false]]);
        assert_eq!(topk_mask(&s, 3).unwrap(), vec![vec![true; 3]]);
        let tie = m(1, 3, &[2.0, 2.0, 0.0]);
        assert_eq!(topk_mask(&tie, 1).unwrap(), vec![vec![true, false, false]]);
        assert!(topk_mask(&s, 0).is_err());
        assert!(topk_mask(&s, 4).is_err());
    }

    #[test]
    fn k_one_picks_argmax_value_row() {
        let q = m(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let k = m(3, 2, &[2.0, 0.0, 0.0, 3.0, 1.0, 1.0]);
        let v = m(3, 2, &[10.0, 11.0, 20.0, 21.0, 30.0, 31.0]);
        let out = sparse_attention(&q, &k, &v, 1, 0.5).unwrap();
        assert_eq!(out.row(0), &[10.0, 11.0]);
        assert_eq!(out.row(1), &[20.0, 21.0]);
    }

    #[test]
    fn dimension_errors() {
        let q = m(2, 2, &[0.0; 4]);
        let k = m(2, 3, &[0.0; 6]);
        let v = m(2, 1, &[0.0; 2]);
        assert!(sparse_attention(&q, &k, &v, 1, 1.0).is_err());
        assert!(dense_attention(&q, &q, &m(3, 1, &[0.0; 3]), 1.0).is_err());
        assert!(dense_attention(&q, &q, &v, 0.0).is_err());
    }
}
