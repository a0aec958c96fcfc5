use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::PredictionSet;
use crate::error::{Error, Result};
use crate::label::Speaker;
use crate::scalar::Scalar;

/// Decimal text with 6 significant digits.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{}", x);
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        let s = format!("{:.*}", decimals, x);
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{:.5e}", x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// `0/0` counts as 0.
fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct F1Report {
    /// `confusion[truth][predicted]`, indexed child, adult.
    pub confusion: [[usize; 2]; 2],
    pub per_class: [ClassScores; 2],
    pub mean_f1: f64,
    /// Session id → (sample count, mean F1 over that session's samples).
    pub per_session: BTreeMap<String, (usize, f64)>,
}

fn scores(confusion: &[[usize; 2]; 2]) -> ([ClassScores; 2], f64) {
    let mut per_class = [ClassScores {
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
    }; 2];
    for (c, slot) in per_class.iter_mut().enumerate() {
        let tp = confusion[c][c];
        let predicted = confusion[0][c] + confusion[1][c];
        let actual = confusion[c][0] + confusion[c][1];
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, actual);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        *slot = ClassScores { precision, recall, f1 };
    }
    let mean = (per_class[0].f1 + per_class[1].f1) / 2.0;
    (per_class, mean)
}

fn confusion_of<'a>(pairs: impl Iterator<Item = (Speaker, Speaker)> + 'a) -> [[usize; 2]; 2] {
    let mut m = [[0usize; 2]; 2];
    for (truth, predicted) in pairs {
        m[truth.index()][predicted.index()] += 1;
    }
    m
}

/// Unweighted mean of the child and adult F1 scores.
pub fn mean_f1<T: Scalar>(p: &PredictionSet<T>) -> Result<F1Report> {
    if p.is_empty() {
        return Err(Error::EmptyInput("no predictions to score".into()));
    }
    let mut pairs = Vec::with_capacity(p.len());
    for e in &p.entries {
        let truth = e
            .truth
            .ok_or_else(|| Error::Label(format!("prediction for session '{}' frame {} has no reference label", e.session_id, e.center)))?;
        pairs.push((truth, e.predicted));
    }
    let confusion = confusion_of(pairs.iter().copied());
    let (per_class, mean) = scores(&confusion);
    let mut by_session: BTreeMap<String, Vec<(Speaker, Speaker)>> = BTreeMap::new();
    for (e, pair) in p.entries.iter().zip(&pairs) {
        by_session.entry(e.session_id.clone()).or_default().push(*pair);
    }
    let per_session = by_session
        .into_iter()
        .map(|(id, v)| {
            let (_, m) = scores(&confusion_of(v.iter().copied()));
            (id, (v.len(), m))
        })
        .collect();
    Ok(F1Report {
        confusion,
        per_class,
        mean_f1: mean,
        per_session,
    })
}

impl F1Report {
    pub fn samples(&self) -> usize {
        self.confusion.iter().flatten().sum()
    }

    /// Human-readable report; the per-session table is optional.
    pub fn to_text(&self, per_session: bool) -> String {
        let mut s = String::new();
        writeln!(s, "samples: {}", self.samples()).unwrap();
        writeln!(s, "class\tprecision\trecall\tf1").unwrap();
        for sp in Speaker::ALL {
            let c = &self.per_class[sp.index()];
            writeln!(s, "{}\t{}\t{}\t{}", sp, sig6(c.precision), sig6(c.recall), sig6(c.f1)).unwrap();
        }
        writeln!(s, "confusion (rows truth, columns predicted: child adult)").unwrap();
        for sp in Speaker::ALL {
            let r = self.confusion[sp.index()];
            writeln!(s, "{}\t{}\t{}", sp, r[0], r[1]).unwrap();
        }
        writeln!(s, "mean F1: {}", sig6(self.mean_f1)).unwrap();
        if per_session {
            writeln!(s, "session\tsamples\tmean_f1").unwrap();
            for (id, (n, f)) in &self.per_session {
                writeln!(s, "{}\t{}\t{}", id, n, sig6(*f)).unwrap();
            }
        }
        s
    }

    /// Machine-readable `key=value` lines.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        writeln!(s, "samples={}", self.samples()).unwrap();
        writeln!(s, "mean_f1={}", sig6(self.mean_f1)).unwrap();
        for sp in Speaker::ALL {
            let c = &self.per_class[sp.index()];
            writeln!(s, "{}_precision={}", sp, sig6(c.precision)).unwrap();
            writeln!(s, "{}_recall={}", sp, sig6(c.recall)).unwrap();
            writeln!(s, "{}_f1={}", sp, sig6(c.f1)).unwrap();
        }
        for t in Speaker::ALL {
            for p in Speaker::ALL {
                writeln!(s, "confusion_{}_{}={}", t, p, self.confusion[t.index()][p.index()]).unwrap();
            }
        }
        s
    }
}
