use crate::error::{Error, Result};
use crate::scalar::{from_usize, Scalar};
use crate::tensor::Tensor;

/// Row-wise softmax of an `n×k` matrix.
pub fn softmax<T: Scalar>(logits: &Tensor<T>) -> Result<Tensor<T>> {
    if logits.rank() != 2 {
        return Err(Error::dim(format!("softmax expects a matrix, got {:?}", logits.shape())));
    }
    let k = logits.shape()[1];
    let mut out = logits.data().to_vec();
    for row in out.chunks_exact_mut(k) {
        let max = row.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
        let mut sum = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    Tensor::new(logits.shape(), out)
}

/// Mean cross-entropy against class indices, with `dlogits = (softmax − onehot)/n`.
pub fn softmax_xent_indices<T: Scalar>(logits: &Tensor<T>, labels: &[usize]) -> Result<(T, Tensor<T>)> {
    if logits.rank() != 2 || logits.shape()[0] != labels.len() {
        return Err(Error::dim(format!(
            "logits {:?} do not match {} labels",
            logits.shape(),
            labels.len()
        )));
    }
    let (n, k) = (logits.shape()[0], logits.shape()[1]);
    if n == 0 {
        return Err(Error::EmptyInput("cross-entropy over an empty batch".into()));
    }
    if let Some(&bad) = labels.iter().find(|&&c| c >= k) {
        return Err(Error::Label(format!("class index {} out of range for {} classes", bad, k)));
    }
    let inv_n = T::one() / from_usize::<T>(n);
    let mut loss = T::zero();
    let mut grad = vec![T::zero(); n * k];
    for ((row, g), &c) in logits.data().chunks_exact(k).zip(grad.chunks_exact_mut(k)).zip(labels) {
        let max = row.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
        let sum: T = row.iter().map(|&v| (v - max).exp()).sum();
        let log_z = max + sum.ln();
        loss += log_z - row[c];
        for j in 0..k {
            let p = (row[j] - log_z).exp();
            let y = if j == c { T::one() } else { T::zero() };
            g[j] = (p - y) * inv_n;
        }
    }
    Ok((loss * inv_n, Tensor::new(&[n, k], grad)?))
}

/// Mean cross-entropy against one-hot label rows.
pub fn softmax_xent<T: Scalar>(logits: &Tensor<T>, labels: &Tensor<T>) -> Result<(T, Tensor<T>)> {
    if labels.shape() != logits.shape() || labels.rank() != 2 {
        return Err(Error::dim(format!(
            "labels {:?} do not match logits {:?}",
            labels.shape(),
            logits.shape()
        )));
    }
    let k = labels.shape()[1];
    let mut idx = Vec::with_capacity(labels.rows());
    for (i, row) in labels.data().chunks_exact(k).enumerate() {
        let ones = row.iter().filter(|&&v| v == T::one()).count();
        let zeros = row.iter().filter(|&&v| v == T::zero()).count();
        if ones != 1 || zeros != k - 1 {
            return Err(Error::Label(format!("label row {} is not one-hot", i)));
        }
        idx.push(row.iter().position(|&v| v == T::one()).unwrap());
    }
    softmax_xent_indices(logits, &idx)
}
