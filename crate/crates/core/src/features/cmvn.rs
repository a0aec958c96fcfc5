use super::FeatureMatrix;
use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};
use crate::tensor::{column_mean_var, Tensor};

pub const CMVN_VAR_FLOOR: f64 = 1e-10;

/// Session-level mean and variance normalization of every cepstral column.
pub fn cmvn_session<T: Scalar>(f: &FeatureMatrix<T>) -> Result<FeatureMatrix<T>> {
    let n = f.num_frames();
    if n < 2 {
        return Err(Error::DegenerateSession(format!(
            "session {} has {} frames, CMVN needs at least 2",
            f.session_id, n
        )));
    }
    let d = f.frames.shape()[1];
    let (mean, var) = column_mean_var(f.frames.data(), n, d);
    let floor: T = lit(CMVN_VAR_FLOOR);
    let inv_std: Vec<T> = var.iter().map(|&v| T::one() / v.max(floor).sqrt()).collect();
    let mut data = f.frames.data().to_vec();
    for row in data.chunks_exact_mut(d) {
        for j in 0..d {
            row[j] = (row[j] - mean[j]) * inv_std[j];
        }
    }
    Ok(FeatureMatrix {
        frames: Tensor::new(&[n, d], data)?,
        ..f.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FEATURE_DIM;
    use crate::rng::RngState;

    fn session(rows: usize, fill: impl Fn(usize, usize) -> f64) -> FeatureMatrix<f64> {
        let data = (0..rows * FEATURE_DIM).map(|k| fill(k / FEATURE_DIM, k % FEATURE_DIM)).collect();
        FeatureMatrix::new("s", Tensor::new(&[rows, FEATURE_DIM], data).unwrap()).unwrap()
    }

    #[test]
    fn two_frames_hand_case() {
        let f = session(2, |i, _| if i == 0 { 1.0 } else { 3.0 });
        let g = cmvn_session(&f).unwrap();
        assert_eq!(g.frames.row(0)[0], -1.0);
        assert_eq!(g.frames.row(1)[0], 1.0);
    }

    #[test]
    fn constant_column_goes_to_zero() {
        let f = session(5, |i, j| if j == 3 { 7.5 } else { i as f64 });
        let g = cmvn_session(&f).unwrap();
        for i in 0..5 {
            assert_eq!(g.frames.row(i)[3], 0.0);
        }
    }

    #[test]
    fn post_statistics() {
        let mut rng = RngState::new(3);
        let noise: Vec<f64> = (0..200 * FEATURE_DIM).map(|_| rng_val(&mut rng)).collect();
        let f = session(200, |i, j| j as f64 * 3.0 + (1.0 + j as f64) * noise[i * FEATURE_DIM + j]);
        let g = cmvn_session(&f).unwrap();
        let (m, v) = g.frames.reduce_mean_var().unwrap();
        for j in 0..FEATURE_DIM {
            assert!(m.data()[j].abs() < 1e-9);
            assert!((v.data()[j] - 1.0).abs() < 1e-9);
        }
    }

    fn rng_val(r: &mut RngState) -> f64 {
        r.normal()
    }

    #[test]
    fn single_frame_is_degenerate() {
        let f = session(1, |_, _| 0.0);
        assert!(matches!(cmvn_session(&f), Err(Error::DegenerateSession(_))));
    }
}
