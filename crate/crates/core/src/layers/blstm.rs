//! Bidirectional LSTM reduced to the final hidden state of each direction.
//!
//! Gate rows are stacked in the order input, forget, cell candidate, output:
//!
//! ```text
//! z_t = x_t·Wᵀ + h_{t−1}·Uᵀ + b
//! i, f, o = σ(z_i), σ(z_f), σ(z_o);  g = tanh(z_g)
//! c_t = f⊙c_{t−1} + i⊙g;  h_t = o⊙tanh(c_t)
//! ```
//!
//! The output for a sequence of length T is `[h_fwd(T) ‖ h_bwd(1)]`.

use super::Params;
use crate::error::{Error, Result};
use crate::rng::RngState;
use crate::scalar::Scalar;
use crate::tensor::{gemm_nn, gemm_nt, gemm_tn, Tensor};

pub const GATES: usize = 4;

#[derive(Debug, Clone)]
pub struct LstmDirection<T> {
    /// `4H×d` input weights.
    pub w: Tensor<T>,
    /// `4H×H` recurrent weights.
    pub u: Tensor<T>,
    /// `4H` biases.
    pub b: Tensor<T>,
}

#[derive(Debug, Clone)]
struct Step<T> {
    x: Vec<T>,
    gates: Vec<T>,
    c: Vec<T>,
    tanh_c: Vec<T>,
    h: Vec<T>,
}

#[derive(Debug, Clone)]
struct Cache<T> {
    n: usize,
    len: usize,
    fwd: Vec<Step<T>>,
    bwd: Vec<Step<T>>,
}

#[inline]
fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

impl<T: Scalar> LstmDirection<T> {
    pub fn new(input: usize, hidden: usize, rng: &mut RngState) -> Result<Self> {
        Ok(Self {
            w: Tensor::xavier_init(GATES * hidden, input, rng)?,
            u: Tensor::xavier_init(GATES * hidden, hidden, rng)?,
            b: Tensor::zeros(&[GATES * hidden]),
        })
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w: Tensor::zeros(&[GATES * hidden, input]),
            u: Tensor::zeros(&[GATES * hidden, hidden]),
            b: Tensor::zeros(&[GATES * hidden]),
        }
    }

    pub fn hidden(&self) -> usize {
        self.u.shape()[1]
    }

    pub fn input_dim(&self) -> usize {
        self.w.shape()[1]
    }

    /// Runs the recurrence over `x` (`n×len×d`, row-major) and returns the
    /// final hidden state, plus the per-step cache when `record` is set.
    fn run(&self, x: &[T], n: usize, len: usize, reverse: bool, record: bool) -> (Vec<T>, Vec<Step<T>>) {
        let (d, hid) = (self.input_dim(), self.hidden());
        let g4 = GATES * hid;
        let mut h = vec![T::zero(); n * hid];
        let mut c = vec![T::zero(); n * hid];
        let mut steps = Vec::with_capacity(if record { len } else { 0 });
        let mut xt = vec![T::zero(); n * d];
        let mut z = vec![T::zero(); n * g4];
        for s in 0..len {
            let t = if reverse { len - 1 - s } else { s };
            for i in 0..n {
                let src = &x[(i * len + t) * d..(i * len + t + 1) * d];
                xt[i * d..(i + 1) * d].copy_from_slice(src);
            }
            for row in z.chunks_exact_mut(g4) {
                row.copy_from_slice(self.b.data());
            }
            gemm_nt(&xt, self.w.data(), &mut z, n, d, g4);
            gemm_nt(&h, self.u.data(), &mut z, n, hid, g4);

            let mut tanh_c = vec![T::zero(); n * hid];
            for i in 0..n {
                let zr = &mut z[i * g4..(i + 1) * g4];
                for k in 0..hid {
                    let ig = sigmoid(zr[k]);
                    let fg = sigmoid(zr[hid + k]);
                    let gg = zr[2 * hid + k].tanh();
                    let og = sigmoid(zr[3 * hid + k]);
                    zr[k] = ig;
                    zr[hid + k] = fg;
                    zr[2 * hid + k] = gg;
                    zr[3 * hid + k] = og;
                    let idx = i * hid + k;
                    c[idx] = fg * c[idx] + ig * gg;
                    tanh_c[idx] = c[idx].tanh();
                    h[idx] = og * tanh_c[idx];
                }
            }
            if record {
                steps.push(Step {
                    x: xt.clone(),
                    gates: z.clone(),
                    c: c.clone(),
                    tanh_c,
                    h: h.clone(),
                });
            }
        }
        (h, steps)
    }

    /// Backpropagation through time from a gradient on the final hidden state.
    /// Accumulates parameter gradients and adds input gradients into `dx`.
    fn backprop(&mut self, steps: &[Step<T>], dh_final: Vec<T>, n: usize, len: usize, reverse: bool, dx: &mut [T]) {
        let (d, hid) = (self.input_dim(), self.hidden());
        let g4 = GATES * hid;
        let zero = vec![T::zero(); n * hid];
        let mut dh = dh_final;
        let mut dc = vec![T::zero(); n * hid];
        let mut dz = vec![T::zero(); n * g4];
        let mut dxt = vec![T::zero(); n * d];
        for s in (0..len).rev() {
            let t = if reverse { len - 1 - s } else { s };
            let step = &steps[s];
            let (c_prev, h_prev) = if s > 0 {
                (&steps[s - 1].c, &steps[s - 1].h)
            } else {
                (&zero, &zero)
            };
            for i in 0..n {
                let gr = &step.gates[i * g4..(i + 1) * g4];
                let dzr = &mut dz[i * g4..(i + 1) * g4];
                for k in 0..hid {
                    let idx = i * hid + k;
                    let (ig, fg, gg, og) = (gr[k], gr[hid + k], gr[2 * hid + k], gr[3 * hid + k]);
                    let tc = step.tanh_c[idx];
                    let dho = dh[idx];
                    let dct = dc[idx] + dho * og * (T::one() - tc * tc);
                    let d_o = dho * tc;
                    let d_i = dct * gg;
                    let d_g = dct * ig;
                    let d_f = dct * c_prev[idx];
                    dc[idx] = dct * fg;
                    dzr[k] = d_i * ig * (T::one() - ig);
                    dzr[hid + k] = d_f * fg * (T::one() - fg);
                    dzr[2 * hid + k] = d_g * (T::one() - gg * gg);
                    dzr[3 * hid + k] = d_o * og * (T::one() - og);
                }
            }
            gemm_tn(&dz, &step.x, self.w.grad_mut(), n, g4, d);
            gemm_tn(&dz, h_prev, self.u.grad_mut(), n, g4, hid);
            let db = self.b.grad_mut();
            for row in dz.chunks_exact(g4) {
                for (g, &v) in db.iter_mut().zip(row) {
                    *g += v;
                }
            }
            dxt.iter_mut().for_each(|v| *v = T::zero());
            gemm_nn(&dz, self.w.data(), &mut dxt, n, g4, d);
            for i in 0..n {
                let dst = &mut dx[(i * len + t) * d..(i * len + t + 1) * d];
                for (a, &b) in dst.iter_mut().zip(&dxt[i * d..(i + 1) * d]) {
                    *a += b;
                }
            }
            dh.iter_mut().for_each(|v| *v = T::zero());
            gemm_nn(&dz, self.u.data(), &mut dh, n, g4, hid);
        }
    }
}

impl<T: Scalar> Params<T> for LstmDirection<T> {
    fn params(&self) -> Vec<&Tensor<T>> {
        vec![&self.w, &self.u, &self.b]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        vec![&mut self.w, &mut self.u, &mut self.b]
    }
}

#[derive(Debug, Clone)]
pub struct Blstm<T> {
    pub forward_dir: LstmDirection<T>,
    pub backward_dir: LstmDirection<T>,
    cache: Option<Cache<T>>,
}

impl<T: Scalar> Blstm<T> {
    pub fn new(input: usize, hidden: usize, rng: &mut RngState) -> Result<Self> {
        Ok(Self {
            forward_dir: LstmDirection::new(input, hidden, rng)?,
            backward_dir: LstmDirection::new(input, hidden, rng)?,
            cache: None,
        })
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            forward_dir: LstmDirection::zeros(input, hidden),
            backward_dir: LstmDirection::zeros(input, hidden),
            cache: None,
        }
    }

    pub fn from_directions(forward_dir: LstmDirection<T>, backward_dir: LstmDirection<T>) -> Result<Self> {
        for dir in [&forward_dir, &backward_dir] {
            let (h, d) = (dir.hidden(), dir.input_dim());
            if dir.w.shape() != [GATES * h, d] || dir.u.shape() != [GATES * h, h] || dir.b.shape() != [GATES * h] {
                return Err(Error::dim("inconsistent LSTM gate parameter shapes"));
            }
        }
        if forward_dir.hidden() != backward_dir.hidden() || forward_dir.input_dim() != backward_dir.input_dim() {
            return Err(Error::dim("BLSTM directions disagree on sizes"));
        }
        Ok(Self {
            forward_dir,
            backward_dir,
            cache: None,
        })
    }

    pub fn hidden(&self) -> usize {
        self.forward_dir.hidden()
    }

    pub fn input_dim(&self) -> usize {
        self.forward_dir.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        2 * self.hidden()
    }

    fn check(&self, x: &Tensor<T>) -> Result<(usize, usize)> {
        if x.rank() != 3 || x.shape()[2] != self.input_dim() {
            return Err(Error::dim(format!(
                "BLSTM expects n×T×{} input, got {:?}",
                self.input_dim(),
                x.shape()
            )));
        }
        let (n, len) = (x.shape()[0], x.shape()[1]);
        if len == 0 {
            return Err(Error::dim("BLSTM input sequence has zero length"));
        }
        Ok((n, len))
    }

    fn concat(&self, n: usize, hf: &[T], hb: &[T]) -> Tensor<T> {
        let hid = self.hidden();
        let mut out = Vec::with_capacity(n * 2 * hid);
        for i in 0..n {
            out.extend_from_slice(&hf[i * hid..(i + 1) * hid]);
            out.extend_from_slice(&hb[i * hid..(i + 1) * hid]);
        }
        Tensor::new(&[n, 2 * hid], out).expect("BLSTM output shape")
    }

    /// Batched forward: `n×T×d → n×2H`, caching every step for BPTT.
    pub fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (n, len) = self.check(x)?;
        let (hf, fwd) = self.forward_dir.run(x.data(), n, len, false, true);
        let (hb, bwd) = self.backward_dir.run(x.data(), n, len, true, true);
        self.cache = Some(Cache { n, len, fwd, bwd });
        Ok(self.concat(n, &hf, &hb))
    }

    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (n, len) = self.check(x)?;
        let (hf, _) = self.forward_dir.run(x.data(), n, len, false, false);
        let (hb, _) = self.backward_dir.run(x.data(), n, len, true, false);
        Ok(self.concat(n, &hf, &hb))
    }

    /// `n×2H` upstream gradient to `n×T×d` input gradient.
    pub fn backward(&mut self, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let cache = self
            .cache
            .take()
            .ok_or_else(|| Error::State("BLSTM backward called before forward".into()))?;
        let (n, len, hid, d) = (cache.n, cache.len, self.hidden(), self.input_dim());
        if dy.len() != n * 2 * hid {
            let msg = format!("BLSTM upstream gradient {:?} does not match {}x{}", dy.shape(), n, 2 * hid);
            self.cache = Some(cache);
            return Err(Error::dim(msg));
        }
        let mut dhf = Vec::with_capacity(n * hid);
        let mut dhb = Vec::with_capacity(n * hid);
        for row in dy.data().chunks_exact(2 * hid) {
            dhf.extend_from_slice(&row[..hid]);
            dhb.extend_from_slice(&row[hid..]);
        }
        let mut dx = vec![T::zero(); n * len * d];
        self.forward_dir.backprop(&cache.fwd, dhf, n, len, false, &mut dx);
        self.backward_dir.backprop(&cache.bwd, dhb, n, len, true, &mut dx);
        self.cache = Some(cache);
        Tensor::new(&[n, len, d], dx)
    }

    /// Single sequence `T×d → 2H`.
    pub fn forward_sequence(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        if x.rank() != 2 {
            return Err(Error::dim(format!("expected a T×d sequence, got {:?}", x.shape())));
        }
        let (len, d) = (x.shape()[0], x.shape()[1]);
        let y = self.forward(&x.clone().reshape(&[1, len, d])?)?;
        y.reshape(&[self.output_dim()])
    }

    /// Single sequence `2H → T×d`.
    pub fn backward_sequence(&mut self, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let dx = self.backward(&dy.clone().reshape(&[1, dy.len()])?)?;
        let (len, d) = (dx.shape()[1], dx.shape()[2]);
        dx.reshape(&[len, d])
    }
}

impl<T: Scalar> Params<T> for Blstm<T> {
    fn params(&self) -> Vec<&Tensor<T>> {
        let mut p = self.forward_dir.params();
        p.extend(self.backward_dir.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut p = self.forward_dir.params_mut();
        p.extend(self.backward_dir.params_mut());
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::check;

    fn randomized(input: usize, hidden: usize, seed: u64) -> Blstm<f64> {
        let mut rng = RngState::new(seed);
        let mut l = Blstm::new(input, hidden, &mut rng).unwrap();
        for p in l.params_mut() {
            for v in p.data_mut() {
                *v = rng.uniform_in(-0.8, 0.8);
            }
        }
        l
    }

    /// Gate-by-gate scalar loop, written independently of the batched kernels.
    fn scalar_oracle(dir: &LstmDirection<f64>, seq: &[Vec<f64>]) -> Vec<f64> {
        let hid = dir.hidden();
        let d = dir.input_dim();
        let sig = |z: f64| 1.0 / (1.0 + (-z).exp());
        let mut h = vec![0.0; hid];
        let mut c = vec![0.0; hid];
        for x in seq {
            let pre = |gate: usize, k: usize| {
                let r = gate * hid + k;
                let mut s = dir.b.data()[r];
                for j in 0..d {
                    s += dir.w.get2(r, j) * x[j];
                }
                for j in 0..hid {
                    s += dir.u.get2(r, j) * h[j];
                }
                s
            };
            let mut nh = vec![0.0; hid];
            let mut nc = vec![0.0; hid];
            for k in 0..hid {
                let i = sig(pre(0, k));
                let f = sig(pre(1, k));
                let g = pre(2, k).tanh();
                let o = sig(pre(3, k));
                nc[k] = f * c[k] + i * g;
                nh[k] = o * nc[k].tanh();
            }
            h = nh;
            c = nc;
        }
        h
    }

    #[test]
    fn zero_network_outputs_zero() {
        let mut l = Blstm::<f64>::zeros(4, 3);
        let x = Tensor::xavier_init(5, 4, &mut RngState::new(1)).unwrap();
        let y = l.forward_sequence(&x).unwrap();
        assert_eq!(y.shape(), &[6]);
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_step_with_shared_parameters_is_symmetric() {
        let mut l = randomized(4, 3, 2);
        l.backward_dir = l.forward_dir.clone();
        let x = Tensor::xavier_init(1, 4, &mut RngState::new(3)).unwrap();
        let y = l.forward_sequence(&x).unwrap();
        assert_eq!(&y.data()[..3], &y.data()[3..]);
    }

    #[test]
    fn matches_scalar_oracle() {
        let l = randomized(3, 2, 7);
        let mut rng = RngState::new(8);
        let seq: Vec<Vec<f64>> = (0..3).map(|_| (0..3).map(|_| rng.uniform_in(-1.0, 1.0)).collect()).collect();
        let flat: Vec<f64> = seq.iter().flatten().copied().collect();
        let y = l.infer(&Tensor::new(&[1, 3, 3], flat).unwrap()).unwrap();
        let hf = scalar_oracle(&l.forward_dir, &seq);
        let rev: Vec<Vec<f64>> = seq.iter().rev().cloned().collect();
        let hb = scalar_oracle(&l.backward_dir, &rev);
        for k in 0..2 {
            assert!((y.data()[k] - hf[k]).abs() < 1e-12);
            assert!((y.data()[2 + k] - hb[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_length_is_dimension_error() {
        let mut l = Blstm::<f64>::zeros(4, 3);
        assert!(matches!(l.forward(&Tensor::zeros(&[2, 0, 4])), Err(Error::Dimension(_))));
    }

    #[test]
    fn backward_before_forward_is_state_error() {
        let mut l = Blstm::<f64>::zeros(4, 3);
        assert!(matches!(l.backward(&Tensor::zeros(&[1, 6])), Err(Error::State(_))));
    }

    #[test]
    fn zero_upstream_zero_grads() {
        let mut l = randomized(4, 3, 5);
        let x = Tensor::xavier_init(5, 4, &mut RngState::new(6)).unwrap();
        l.forward_sequence(&x).unwrap();
        let dx = l.backward_sequence(&Tensor::zeros(&[6])).unwrap();
        assert!(dx.data().iter().all(|&v| v == 0.0));
        for p in l.params() {
            assert!(p.grad().unwrap().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn finite_differences_all_parameters_and_input() {
        let (len, d, hid) = (5, 4, 3);
        let mut l = randomized(d, hid, 31);
        let x = Tensor::xavier_init(len, d, &mut RngState::new(32)).unwrap().map(|v| 2.0 * v);
        let w = check::weights(2 * hid, 33);
        l.forward_sequence(&x).unwrap();
        let dx = l.backward_sequence(&Tensor::from_vec(w.clone())).unwrap();
        let base = l.clone();
        let x3 = |v: &[f64]| Tensor::new(&[1, len, d], v.to_vec()).unwrap();
        let mut xs = x.data().to_vec();
        let err = check::compare(&mut xs, dx.data(), 1e-5, |v| check::dot(base.infer(&x3(v)).unwrap().data(), &w));
        assert!(err < 1e-5, "input rel err {}", err);

        let x_in = x3(x.data());
        for pi in 0..6 {
            let grad = base.params()[pi].grad().unwrap().to_vec();
            let mut vals = base.params()[pi].data().to_vec();
            let err = check::compare(&mut vals, &grad, 1e-5, |v| {
                let mut m = base.clone();
                m.params_mut()[pi].data_mut().copy_from_slice(v);
                check::dot(m.infer(&x_in).unwrap().data(), &w)
            });
            assert!(err < 1e-5, "param {} rel err {}", pi, err);
        }
    }

    #[test]
    fn batched_equals_per_sequence() {
        let mut l = randomized(3, 2, 40);
        let x = Tensor::<f64>::xavier_init(3 * 4, 3, &mut RngState::new(41))
            .unwrap()
            .reshape(&[3, 4, 3])
            .unwrap();
        let y = l.forward(&x).unwrap();
        for i in 0..3 {
            let xi = Tensor::new(&[4, 3], x.row(i).to_vec()).unwrap();
            let yi = l.forward_sequence(&xi).unwrap();
            assert_eq!(y.row(i), yi.data());
        }
    }
}
