//! Dense row-major arrays of rank 1 to 3 with an optional gradient buffer.
//!
//! There is no autodiff here. Layers own their backward formulas and use the
//! `grad` buffer of their parameter tensors as the accumulation target.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::rng::RngState;
use crate::scalar::{from_usize, lit, Scalar};

pub const TENSOR_MAGIC: &[u8; 4] = b"DTNS";
pub const MAX_RANK: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
    grad: Option<Vec<T>>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: &[usize], data: Vec<T>) -> Result<Self> {
        check_rank(shape)?;
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::dim(format!(
                "shape {:?} needs {} elements, got {}",
                shape,
                n,
                data.len()
            )));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
            grad: None,
        })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self::new(shape, vec![T::zero(); n]).expect("valid zero tensor shape")
    }

    pub fn filled(shape: &[usize], value: T) -> Self {
        let n = shape.iter().product();
        Self::new(shape, vec![value; n]).expect("valid tensor shape")
    }

    pub fn from_vec(data: Vec<T>) -> Self {
        let n = data.len();
        Self::new(&[n], data).expect("rank-1 tensor")
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(m * n);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != n {
                return Err(Error::dim(format!(
                    "row {} has {} columns, expected {}",
                    i,
                    r.len(),
                    n
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(&[m, n], data)
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = T::one();
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    /// Extent of the leading axis.
    pub fn rows(&self) -> usize {
        self.shape.first().copied().unwrap_or(0)
    }

    /// Product of all trailing extents.
    pub fn row_len(&self) -> usize {
        self.shape.iter().skip(1).product()
    }

    pub fn row(&self, i: usize) -> &[T] {
        let w = self.row_len();
        &self.data[i * w..(i + 1) * w]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        let w = self.row_len();
        &mut self.data[i * w..(i + 1) * w]
    }

    pub fn get2(&self, i: usize, j: usize) -> T {
        self.data[i * self.shape[1] + j]
    }

    pub fn grad(&self) -> Option<&[T]> {
        self.grad.as_deref()
    }

    /// Gradient buffer, allocated as zeros on first access.
    pub fn grad_mut(&mut self) -> &mut [T] {
        let n = self.data.len();
        self.grad.get_or_insert_with(|| vec![T::zero(); n])
    }

    pub fn has_grad(&self) -> bool {
        self.grad.is_some()
    }

    pub fn zero_grad(&mut self) {
        if let Some(g) = self.grad.as_mut() {
            g.iter_mut().for_each(|v| *v = T::zero());
        }
    }

    pub fn clear_grad(&mut self) {
        self.grad = None;
    }

    /// Values and gradient buffer borrowed together.
    pub fn value_and_grad_mut(&mut self) -> (&mut [T], Option<&mut [T]>) {
        (&mut self.data, self.grad.as_deref_mut())
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        check_rank(shape)?;
        let n: usize = shape.iter().product();
        if n != self.data.len() {
            return Err(Error::dim(format!(
                "cannot reshape {:?} into {:?}",
                self.shape, shape
            )));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
            grad: None,
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }

    fn expect_matrix(&self, name: &str) -> Result<(usize, usize)> {
        if self.rank() != 2 {
            return Err(Error::dim(format!(
                "{} must be a matrix, got shape {:?}",
                name, self.shape
            )));
        }
        Ok((self.shape[0], self.shape[1]))
    }

    /// `self (m×k) · other (k×n)`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        let (m, k) = self.expect_matrix("lhs")?;
        let (k2, n) = other.expect_matrix("rhs")?;
        if k != k2 {
            return Err(Error::dim(format!(
                "matmul inner extents differ: {:?} x {:?}",
                self.shape, other.shape
            )));
        }
        let mut out = vec![T::zero(); m * n];
        gemm_nn(&self.data, &other.data, &mut out, m, k, n);
        Self::new(&[m, n], out)
    }

    /// `self (m×k) · otherᵀ` where `other` is `n×k`.
    pub fn matmul_t(&self, other: &Self) -> Result<Self> {
        let (m, k) = self.expect_matrix("lhs")?;
        let (n, k2) = other.expect_matrix("rhs")?;
        if k != k2 {
            return Err(Error::dim(format!(
                "matmul_t inner extents differ: {:?} x {:?}ᵀ",
                self.shape, other.shape
            )));
        }
        let mut out = vec![T::zero(); m * n];
        gemm_nt(&self.data, &other.data, &mut out, m, k, n);
        Self::new(&[m, n], out)
    }

    /// `selfᵀ · other` where `self` is `k×m` and `other` is `k×n`.
    pub fn t_matmul(&self, other: &Self) -> Result<Self> {
        let (k, m) = self.expect_matrix("lhs")?;
        let (k2, n) = other.expect_matrix("rhs")?;
        if k != k2 {
            return Err(Error::dim(format!(
                "t_matmul inner extents differ: {:?}ᵀ x {:?}",
                self.shape, other.shape
            )));
        }
        let mut out = vec![T::zero(); m * n];
        gemm_tn(&self.data, &other.data, &mut out, k, m, n);
        Self::new(&[m, n], out)
    }

    /// Glorot-uniform draw in `[-√(6/(rows+cols)), √(6/(rows+cols))]`.
    pub fn xavier_init(rows: usize, cols: usize, rng: &mut RngState) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::dim(format!(
                "xavier_init needs positive extents, got {}x{}",
                rows, cols
            )));
        }
        let bound: T = (lit::<T>(6.0) / from_usize::<T>(rows + cols)).sqrt();
        let data = (0..rows * cols)
            .map(|_| rng.uniform_in(-bound, bound))
            .collect();
        Self::new(&[rows, cols], data)
    }

    /// Per-column mean and biased (divide-by-n) variance of an `n×d` matrix.
    pub fn reduce_mean_var(&self) -> Result<(Self, Self)> {
        let (n, d) = self.expect_matrix("input")?;
        if n == 0 {
            return Err(Error::dim("reduce_mean_var over zero rows"));
        }
        let (mean, var) = column_mean_var(&self.data, n, d);
        Ok((Self::from_vec(mean), Self::from_vec(var)))
    }

    /// Writes the `DTNS` binary encoding (little-endian, f64 payload).
    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(TENSOR_MAGIC)?;
        w.write_all(&[self.shape.len() as u8])?;
        for &e in &self.shape {
            w.write_all(&(e as u64).to_le_bytes())?;
        }
        for &x in &self.data {
            w.write_all(&x.to_f64_lossless().to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        read_exact(r, &mut magic)?;
        if &magic != TENSOR_MAGIC {
            return Err(Error::Format(format!("bad tensor magic {:?}", magic)));
        }
        let mut rank = [0u8; 1];
        read_exact(r, &mut rank)?;
        let rank = rank[0] as usize;
        if rank == 0 || rank > MAX_RANK {
            return Err(Error::Format(format!("unsupported tensor rank {}", rank)));
        }
        let mut shape = Vec::with_capacity(rank);
        let mut buf = [0u8; 8];
        for _ in 0..rank {
            read_exact(r, &mut buf)?;
            shape.push(u64::from_le_bytes(buf) as usize);
        }
        let n = shape
            .iter()
            .try_fold(1usize, |acc, &e| acc.checked_mul(e))
            .filter(|&n| n <= (1 << 34))
            .ok_or_else(|| Error::Format(format!("implausible tensor shape {:?}", shape)))?;
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            read_exact(r, &mut buf)?;
            let v = f64::from_le_bytes(buf);
            data.push(T::from_f64(v).ok_or_else(|| Error::Format("non-representable value".into()))?);
        }
        Self::new(&shape, data).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(5 + 8 * (self.shape.len() + self.data.len()));
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf)
        .map_err(|e| Error::Format(format!("truncated tensor data: {}", e)))
}

fn check_rank(shape: &[usize]) -> Result<()> {
    if shape.is_empty() || shape.len() > MAX_RANK {
        return Err(Error::dim(format!(
            "tensor rank must be 1..={}, got shape {:?}",
            MAX_RANK, shape
        )));
    }
    Ok(())
}

pub(crate) fn column_mean_var<T: Scalar>(data: &[T], n: usize, d: usize) -> (Vec<T>, Vec<T>) {
    let inv_n = T::one() / from_usize::<T>(n);
    let mut mean = vec![T::zero(); d];
    for row in data.chunks_exact(d) {
        for (m, &x) in mean.iter_mut().zip(row) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m *= inv_n);
    let mut var = vec![T::zero(); d];
    for row in data.chunks_exact(d) {
        for ((v, &x), &m) in var.iter_mut().zip(row).zip(&mean) {
            let c = x - m;
            *v += c * c;
        }
    }
    var.iter_mut().for_each(|v| *v *= inv_n);
    (mean, var)
}

/// `c (m×n) += a (m×k) · b (k×n)`
pub(crate) fn gemm_nn<T: Scalar>(a: &[T], b: &[T], c: &mut [T], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    for i in 0..m {
        let crow = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == T::zero() {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (cv, &bv) in crow.iter_mut().zip(brow) {
                *cv += aip * bv;
            }
        }
    }
}

/// `c (m×n) += a (m×k) · bᵀ` with `b` stored `n×k`.
pub(crate) fn gemm_nt<T: Scalar>(a: &[T], b: &[T], c: &mut [T], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(c.len(), m * n);
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        for j in 0..n {
            let brow = &b[j * k..(j + 1) * k];
            let mut s = T::zero();
            for (&x, &y) in arow.iter().zip(brow) {
                s += x * y;
            }
            c[i * n + j] += s;
        }
    }
}

/// `c (m×n) += aᵀ · b` with `a` stored `k×m` and `b` stored `k×n`.
pub(crate) fn gemm_tn<T: Scalar>(a: &[T], b: &[T], c: &mut [T], k: usize, m: usize, n: usize) {
    debug_assert_eq!(a.len(), k * m);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    for p in 0..k {
        let brow = &b[p * n..(p + 1) * n];
        for i in 0..m {
            let api = a[p * m + i];
            if api == T::zero() {
                continue;
            }
            let crow = &mut c[i * n..(i + 1) * n];
            for (cv, &bv) in crow.iter_mut().zip(brow) {
                *cv += api * bv;
            }
        }
    }
}
