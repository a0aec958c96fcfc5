use super::{FeatureMatrix, CONTEXT, FEATURE_DIM, SPLICE_STRIDE, WINDOW};
use crate::error::{Error, Result};
use crate::label::{Domain, Speaker};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// One `31×23` context window around a centre frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SpliceSample<T> {
    pub window: Tensor<T>,
    pub speaker: Option<Speaker>,
    pub domain: Domain,
    pub session_id: String,
    pub center: usize,
}

/// Centres 15, 30, 45, … whose full ±15 context lies inside the session.
pub fn splice_centers(n_frames: usize) -> impl Iterator<Item = usize> {
    (CONTEXT..)
        .step_by(SPLICE_STRIDE)
        .take_while(move |&c| c + CONTEXT < n_frames)
}

fn window_at<T: Scalar>(f: &FeatureMatrix<T>, center: usize) -> Tensor<T> {
    let start = (center - CONTEXT) * FEATURE_DIM;
    let data = f.frames.data()[start..start + WINDOW * FEATURE_DIM].to_vec();
    Tensor::new(&[WINDOW, FEATURE_DIM], data).expect("window shape")
}

/// Labeled windows; centres whose frame label is `None` are skipped.
pub fn splice<T: Scalar>(f: &FeatureMatrix<T>, labels: &[Option<Speaker>], domain: Domain) -> Result<Vec<SpliceSample<T>>> {
    if labels.len() != f.num_frames() {
        return Err(Error::Alignment(format!(
            "session {}: {} frame labels for {} frames",
            f.session_id,
            labels.len(),
            f.num_frames()
        )));
    }
    Ok(splice_centers(f.num_frames())
        .filter_map(|c| {
            labels[c].map(|speaker| SpliceSample {
                window: window_at(f, c),
                speaker: Some(speaker),
                domain,
                session_id: f.session_id.clone(),
                center: c,
            })
        })
        .collect())
}

/// Every valid centre, with no speaker label attached.
pub fn splice_unlabeled<T: Scalar>(f: &FeatureMatrix<T>, domain: Domain) -> Vec<SpliceSample<T>> {
    splice_centers(f.num_frames())
        .map(|c| SpliceSample {
            window: window_at(f, c),
            speaker: None,
            domain,
            session_id: f.session_id.clone(),
            center: c,
        })
        .collect()
}

/// Stacks windows into an `n×31×23` batch tensor.
pub fn stack_windows<'a, T: Scalar>(samples: impl IntoIterator<Item = &'a SpliceSample<T>>) -> Result<Tensor<T>> {
    let mut data = Vec::new();
    let mut n = 0;
    for s in samples {
        if s.window.shape() != [WINDOW, FEATURE_DIM] {
            return Err(Error::dim(format!(
                "window must be {}x{}, got {:?}",
                WINDOW,
                FEATURE_DIM,
                s.window.shape()
            )));
        }
        data.extend_from_slice(s.window.data());
        n += 1;
    }
    Tensor::new(&[n, WINDOW, FEATURE_DIM], data)
}
